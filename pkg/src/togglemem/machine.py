"""Word-parallel associative toggle memory.

A machine is a (words x bits) boolean array. An instruction names a set of
bits to test and a set of bits to complement; every word whose tested bits are
all true complements its toggle bits, all words at once. The matchline of each
word acts as a wired AND over its tested cells.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .adiabatic import capacitor_energy_delta
from .cell import BitTestMode

DEFAULT_E_HOLD = 43e-15
DEFAULT_E_CYCLE = 77e-15
DEFAULT_E_IRREVERSIBLE = 500e-15


class MachineError(ValueError):
    pass


class Reversibility(Enum):
    REVERSIBLE = "reversible"
    IRREVERSIBLE = "irreversible"


class EnergyMode(Enum):
    ANALYTIC = "analytic"
    CALIBRATED = "calibrated"


@dataclass(frozen=True)
class Instruction:
    test_set: frozenset[int]
    toggle_set: frozenset[int]

    def __init__(self, test_set: Iterable[int] = (), toggle_set: Iterable[int] = ()):
        object.__setattr__(self, "test_set", frozenset(int(i) for i in test_set))
        object.__setattr__(self, "toggle_set", frozenset(int(i) for i in toggle_set))
        if not self.toggle_set:
            raise MachineError("instruction must toggle at least one bit")

    def check_width(self, width: int) -> None:
        bad = [i for i in self.test_set | self.toggle_set if not 0 <= i < width]
        if bad:
            raise MachineError(f"bit indices {sorted(bad)} out of range for width {width}")

    def to_line(self) -> str:
        fmt = lambda s: ",".join(str(i) for i in sorted(s))
        return f"test={fmt(self.test_set)} toggle={fmt(self.toggle_set)}"

    @classmethod
    def from_line(cls, line: str) -> Instruction:
        fields = {}
        for part in line.split():
            key, sep, value = part.partition("=")
            if not sep or key not in ("test", "toggle"):
                raise MachineError(f"cannot parse instruction {line!r}")
            fields[key] = [int(x) for x in value.split(",") if x]
        return cls(fields.get("test", ()), fields.get("toggle", ()))


@dataclass(frozen=True)
class EnergyModelParams:
    """Per-word energy charged for one instruction (two supply cycles).

    Matched words hold their bus and return it (``e_hold``); unmatched words
    either cycle the bus through the supply (``e_cycle``) or, when
    ``discharge`` is irreversible, dump it to ground (``e_irreversible``).
    """

    mode: EnergyMode = EnergyMode.ANALYTIC
    f: float = 10e6
    e_hold_two_cycle: float = DEFAULT_E_HOLD
    e_cycle_two_cycle: float = DEFAULT_E_CYCLE
    e_irreversible: float = DEFAULT_E_IRREVERSIBLE
    discharge: BitTestMode = BitTestMode.RECOVERY

    def __post_init__(self):
        if min(self.e_hold_two_cycle, self.e_cycle_two_cycle, self.e_irreversible) < 0:
            raise ValueError("energies must be >= 0")

    @property
    def e_unmatched(self) -> float:
        if self.discharge is BitTestMode.IRREVERSIBLE:
            return self.e_irreversible
        return self.e_cycle_two_cycle

    @classmethod
    def calibrated(cls, net, f: float, discharge: BitTestMode = BitTestMode.RECOVERY):
        """Replace the per-word constants with transient results for ``net`` at ``f``."""
        from .transient import run_two_cycle_protocol

        hold = run_two_cycle_protocol(net, True, f).e_two_cycle
        cycle = run_two_cycle_protocol(net, False, f).e_two_cycle
        dump = -capacitor_energy_delta(net.C_bus, net.supply.v_high, 0.0)
        return cls(EnergyMode.CALIBRATED, f, hold, cycle, dump, discharge)


@dataclass(frozen=True)
class LedgerEntry:
    index: int
    matched: int
    unmatched: int
    e_matched: float
    e_unmatched: float
    reversibility: Reversibility

    @property
    def e_total(self) -> float:
        return self.e_matched + self.e_unmatched


@dataclass
class EnergyLedger:
    entries: list[LedgerEntry] = field(default_factory=list)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    @property
    def total(self) -> float:
        return sum(e.e_total for e in self.entries)

    def to_csv(self) -> str:
        from .transient import format_number

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["instr", "matched", "unmatched", "class", "e_J"])
        for e in self.entries:
            w.writerow([e.index, e.matched, e.unmatched, e.reversibility.value,
                        format_number(e.e_total)])
        return buf.getvalue()


class Machine:
    """Bit array of ``n_words`` words, each ``width`` bits wide."""

    def __init__(self, bits):
        bits = np.array(bits, dtype=bool)
        if bits.ndim != 2:
            raise MachineError("machine state must be a 2-D (words x bits) array")
        self.bits = bits

    @classmethod
    def zeros(cls, n_words: int, width: int) -> Machine:
        return cls(np.zeros((n_words, width), dtype=bool))

    @classmethod
    def random(cls, n_words: int, width: int, rng: np.random.Generator) -> Machine:
        return cls(rng.random((n_words, width)) < 0.5)

    @property
    def n_words(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def copy(self) -> Machine:
        return Machine(self.bits.copy())

    def __eq__(self, other):
        return isinstance(other, Machine) and np.array_equal(self.bits, other.bits)

    def __repr__(self):
        return f"Machine(n_words={self.n_words}, width={self.width})"

    def to_text(self) -> str:
        """One word per line, highest bit index first."""
        return "".join(
            "".join("1" if b else "0" for b in row[::-1]) + "\n" for row in self.bits
        )

    @classmethod
    def from_text(cls, text: str) -> Machine:
        rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not rows or any(set(r) - {"0", "1"} for r in rows):
            raise MachineError("snapshot lines must contain only 0/1 characters")
        if len({len(r) for r in rows}) != 1:
            raise MachineError("all words must have the same width")
        return cls([[c == "1" for c in r[::-1]] for r in rows])


def classify_instruction(i: Instruction, width: int | None = None) -> Reversibility:
    if width is not None:
        i.check_width(width)
    if i.test_set & i.toggle_set:
        return Reversibility.IRREVERSIBLE
    return Reversibility.REVERSIBLE


def match_words(m: Machine, i: Instruction) -> np.ndarray:
    """Matchline result per word: True when every tested bit is set."""
    if not i.test_set:
        return np.ones(m.n_words, dtype=bool)
    return m.bits[:, sorted(i.test_set)].all(axis=1)


def execute_instruction(
    m: Machine, i: Instruction, p: EnergyModelParams = EnergyModelParams(), index: int = 0
) -> tuple[Machine, LedgerEntry]:
    """Apply one broadcast instruction; returns the new machine and its ledger entry."""
    i.check_width(m.width)
    matched = match_words(m, i)
    bits = m.bits.copy()
    bits[np.ix_(matched, sorted(i.toggle_set))] ^= True
    n_match = int(matched.sum())
    n_miss = m.n_words - n_match
    entry = LedgerEntry(
        index, n_match, n_miss,
        n_match * p.e_hold_two_cycle, n_miss * p.e_unmatched,
        classify_instruction(i),
    )
    return Machine(bits), entry


def invert_program(prog: Sequence[Instruction]) -> list[Instruction]:
    """Reverse a program of reversible instructions (each one is its own inverse)."""
    for k, ins in enumerate(prog):
        if classify_instruction(ins) is Reversibility.IRREVERSIBLE:
            raise MachineError(
                f"instruction {k} ({ins.to_line()}) tests a bit it toggles; cannot invert"
            )
    return list(reversed(prog))


def run_program(
    m: Machine, prog: Sequence[Instruction], p: EnergyModelParams = EnergyModelParams()
) -> tuple[Machine, EnergyLedger]:
    ledger = EnergyLedger()
    for k, ins in enumerate(prog):
        m, entry = execute_instruction(m, ins, p, index=k)
        ledger.entries.append(entry)
    return m, ledger


@dataclass(frozen=True)
class EnergyReport:
    total: float
    reversible_total: float
    irreversible_total: float
    matched_total: float
    unmatched_total: float
    matched_words: int
    unmatched_words: int
    irreversible_dominates: bool

    @property
    def matched_per_word(self) -> float:
        return self.matched_total / self.matched_words if self.matched_words else 0.0

    @property
    def unmatched_per_word(self) -> float:
        return self.unmatched_total / self.unmatched_words if self.unmatched_words else 0.0

    @property
    def matched_to_unmatched_ratio(self) -> float:
        """Mean matched-word energy over mean unmatched-word energy (nan if undefined)."""
        if not self.unmatched_per_word:
            return float("nan")
        return self.matched_per_word / self.unmatched_per_word

    def lines(self) -> list[str]:
        fj = lambda e: f"{e * 1e15:.3f} fJ"
        return [
            f"total energy: {fj(self.total)}",
            f"reversible instructions: {fj(self.reversible_total)}",
            f"irreversible instructions: {fj(self.irreversible_total)}",
            f"matched words: {self.matched_words} ({fj(self.matched_total)})",
            f"unmatched words: {self.unmatched_words} ({fj(self.unmatched_total)})",
            f"matched/unmatched per-word ratio: {self.matched_to_unmatched_ratio:.3f}",
            f"irreversible energy dominates: {'yes' if self.irreversible_dominates else 'no'}",
            "excluded: trigger-line (V_TO) broadcast energy, bus droop restoration",
        ]


def energy_report(ledger: EnergyLedger) -> EnergyReport:
    rev = sum(e.e_total for e in ledger if e.reversibility is Reversibility.REVERSIBLE)
    irr = sum(e.e_total for e in ledger if e.reversibility is Reversibility.IRREVERSIBLE)
    return EnergyReport(
        total=rev + irr,
        reversible_total=rev,
        irreversible_total=irr,
        matched_total=sum(e.e_matched for e in ledger),
        unmatched_total=sum(e.e_unmatched for e in ledger),
        matched_words=sum(e.matched for e in ledger),
        unmatched_words=sum(e.unmatched for e in ledger),
        irreversible_dominates=irr > rev,
    )


def parallel_speedup(y_processors: float, x_slowdown: float) -> tuple[float, bool]:
    """Throughput of Y parallel units each X times slower, relative to one fast unit.

    The flag is True when the parallel machine does not beat the single one.
    """
    if y_processors < 1 or x_slowdown <= 0:
        raise ValueError("need y_processors >= 1 and x_slowdown > 0")
    ratio = y_processors / x_slowdown
    return ratio, ratio <= 1


def random_reversible_program(
    width: int, length: int, rng: np.random.Generator, max_test: int = 4
) -> list[Instruction]:
    prog = []
    for _ in range(length):
        perm = rng.permutation(width)
        n_test = int(rng.integers(0, min(max_test, width - 1) + 1))
        n_toggle = int(rng.integers(1, min(3, width - n_test) + 1))
        prog.append(Instruction(perm[:n_test], perm[n_test : n_test + n_toggle]))
    return prog


def read_program(text: str) -> list[Instruction]:
    return [Instruction.from_line(ln) for ln in text.splitlines() if ln.strip()
            and not ln.lstrip().startswith("#")]


def write_program(prog: Iterable[Instruction]) -> str:
    return "".join(ins.to_line() + "\n" for ins in prog)
