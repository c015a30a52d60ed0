"""Scenario files: parsing, validation and execution.

A scenario is a flat INI-like document::

    [scenario]
    kind = transient
    name = fig8

    [network]
    C = 1p
    R_on = 5k

    [protocol]
    f = 10M
    toggle_output = false

Values are SI numbers with an optional suffix (f p n u m k M G). Each run
writes CSV data series plus ``summary.txt`` into the output directory.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import adiabatic as am
from .cell import BusState, CellState, TriggerParams, conditional_toggle
from .machine import (
    BitTestMode, EnergyMode, EnergyModelParams, Machine, MachineError, energy_report,
    invert_program, random_reversible_program, read_program, run_program, write_program,
)
from .transient import (
    BusNetwork, SimulationError, format_number, improvement_ratio, run_two_cycle_protocol,
    sweep_driver_width, sweep_frequency, sweep_to_csv,
)

EXIT_OK = 0
EXIT_SCENARIO = 2
EXIT_SIMULATION = 3
EXIT_MACHINE = 4
EXIT_MODEL = 5
EXIT_NOT_RESTORED = 6

KINDS = ("analytic", "transient", "sweep-freq", "sweep-width", "machine", "toggle")

SUFFIXES = {"f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "m": 1e-3,
            "k": 1e3, "M": 1e6, "G": 1e9}
_QUANTITY = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)([fpnumkMG]?)$")


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def parse_quantity(text: str) -> float:
    """``'1p'`` -> 1e-12, ``'10M'`` -> 1e7, ``'2.5e-9'`` -> 2.5e-9."""
    m = _QUANTITY.match(text.strip())
    if not m:
        raise ValueError(f"cannot parse quantity {text!r}")
    return float(m.group(1)) * SUFFIXES.get(m.group(2), 1.0)


def _optional_quantity(text: str) -> float | None:
    return None if text.strip().lower() in ("none", "inf", "open") else parse_quantity(text)


def _quantity_list(text: str) -> list[float]:
    return [parse_quantity(x) for x in text.split(",") if x.strip()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _choice(*options: str) -> Callable[[str], str]:
    def conv(text: str) -> str:
        t = text.strip().lower()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return t
    return conv


def _int(text: str) -> int:
    return int(text.strip())


SCHEMA: dict[str, dict[str, Callable[[str], Any]]] = {
    "scenario": {"kind": _choice(*KINDS), "name": str.strip, "seed": _int},
    "network": {
        "C": parse_quantity, "R_on": parse_quantity, "R_stray": _optional_quantity,
        "R_ground": _optional_quantity, "v_low": parse_quantity, "v_high": parse_quantity,
        "v_init": _optional_quantity,
    },
    "protocol": {"f": parse_quantity, "toggle_output": _choice("true", "false", "both"),
                 "baseline": _bool},
    "sweep": {"freqs": _quantity_list, "widths": _quantity_list},
    "machine": {
        "words": _int, "width": _int, "program_length": _int, "programs": _int,
        "reverse_check": _bool, "energy_mode": _choice("analytic", "calibrated"),
        "discharge": _choice("recovery", "irreversible"),
        "e_hold": parse_quantity, "e_cycle": parse_quantity, "e_irreversible": parse_quantity,
        "program_file": str.strip,
    },
    "toggle": {
        "v_start": parse_quantity, "v_dd": parse_quantity, "bit": _bool,
        "pulse_width": parse_quantity, "pulses": _int, "threshold": parse_quantity,
        "min_pulse": parse_quantity, "max_pulse": parse_quantity, "droop": parse_quantity,
    },
}

NEEDS_NETWORK = {"analytic", "transient", "sweep-freq", "sweep-width"}


@dataclass
class Scenario:
    kind: str
    name: str = "scenario"
    seed: int = 0
    network: BusNetwork | None = None
    f: float = 10e6
    toggle_outputs: tuple[bool, ...] = (False,)
    baseline: bool = True
    freqs: list[float] = field(default_factory=list)
    widths: list[float] = field(default_factory=list)
    machine: dict[str, Any] = field(default_factory=dict)
    toggle: dict[str, Any] = field(default_factory=dict)


def _read_sections(text: str) -> tuple[dict[str, dict[str, tuple[Any, int]]], dict[str, int]]:
    sections: dict[str, dict[str, tuple[Any, int]]] = {}
    header_lines: dict[str, int] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in SCHEMA:
                raise ScenarioError(f"unknown section [{current}]", lineno)
            sections.setdefault(current, {})
            header_lines[current] = lineno
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ScenarioError(f"expected 'key = value', got {line!r}", lineno)
        if current is None:
            raise ScenarioError(f"key {key!r} outside any section", lineno)
        conv = SCHEMA[current].get(key)
        if conv is None:
            raise ScenarioError(f"unknown key {key!r} in [{current}]", lineno)
        try:
            sections[current][key] = (conv(value), lineno)
        except ValueError as exc:
            raise ScenarioError(f"{key}: {exc}", lineno) from None
    return sections, header_lines


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document, filling defaults."""
    sections, headers = _read_sections(text)

    def get(section, key, default=None):
        return sections.get(section, {}).get(key, (default, None))[0]

    def line_of(section, key):
        return sections.get(section, {}).get(key, (None, headers.get(section)))[1]

    kind = get("scenario", "kind")
    if kind is None:
        raise ScenarioError("missing required key 'kind' in [scenario]", headers.get("scenario"))
    s = Scenario(kind=kind, name=get("scenario", "name", "scenario"), seed=get("scenario", "seed", 0))

    if kind in NEEDS_NETWORK:
        C = get("network", "C")
        if C is None:
            raise ScenarioError("missing required key 'C' in [network]", headers.get("network"))
        v_low, v_high = get("network", "v_low", 0.5), get("network", "v_high", 1.0)
        try:
            supply = am.SupplyWaveform.half_sinusoid(v_low, v_high, get("protocol", "f", 10e6))
            s.network = BusNetwork(
                C_bus=C, R_on=get("network", "R_on", 5e3), supply=supply,
                R_stray=get("network", "R_stray"), v_init=get("network", "v_init"),
                R_ground=get("network", "R_ground"),
            )
        except ValueError as exc:
            raise ScenarioError(str(exc), headers.get("network")) from None

    s.f = get("protocol", "f", 10e6)
    if not s.f > 0:
        raise ScenarioError("f must be positive", line_of("protocol", "f"))
    choice = get("protocol", "toggle_output", "false")
    s.toggle_outputs = {"false": (False,), "true": (True,), "both": (False, True)}[choice]
    s.baseline = get("protocol", "baseline", True)

    s.freqs = get("sweep", "freqs", [1e6, 2e6, 5e6, 10e6, 20e6])
    if any(f <= 0 for f in s.freqs) or s.freqs != sorted(s.freqs):
        raise ScenarioError("freqs must be positive and sorted", line_of("sweep", "freqs"))
    s.widths = get("sweep", "widths", [0.5, 1.0, 1.5, 2.0, 2.5])
    if any(w <= 0 for w in s.widths):
        raise ScenarioError("widths must be positive", line_of("sweep", "widths"))

    m = {k: v for k, (v, _) in sections.get("machine", {}).items()}
    s.machine = {
        "words": 256, "width": 32, "program_length": 100, "programs": 1,
        "reverse_check": True, "energy_mode": "analytic", "discharge": "recovery",
        "e_hold": 43e-15, "e_cycle": 77e-15, "e_irreversible": 500e-15, "program_file": None, **m,
    }
    for key in ("words", "width", "program_length", "programs"):
        if s.machine[key] < 1 or (key == "width" and s.machine[key] < 2):
            raise ScenarioError(f"{key} too small", line_of("machine", key))

    t = {k: v for k, (v, _) in sections.get("toggle", {}).items()}
    s.toggle = {"v_start": 1.0, "v_dd": 1.0, "bit": False, "pulse_width": 5e-9, "pulses": 10,
                "threshold": 0.70, "min_pulse": 2e-9, "max_pulse": 20e-9, "droop": 0.05, **t}
    if kind == "toggle":
        try:
            _trigger_params(s)
            BusState(s.toggle["v_start"], v_dd=s.toggle["v_dd"])
        except ValueError as exc:
            raise ScenarioError(str(exc), headers.get("toggle")) from None
    return s


def _trigger_params(s: Scenario) -> TriggerParams:
    t = s.toggle
    return TriggerParams(t["threshold"], t["min_pulse"], t["max_pulse"], t["droop"])


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(Path(path).read_text())


# --- bundled examples ---------------------------------------------------------


def bundled_scenarios() -> dict[str, str]:
    """Name -> text of every scenario shipped with the package."""
    root = resources.files("togglemem") / "scenarios"
    out = {}
    for entry in sorted(root.iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".ini"):
            out[entry.name[:-4]] = entry.read_text()
    return out


def describe(text: str) -> str:
    first = text.lstrip().splitlines()[0] if text.strip() else ""
    return first.lstrip("#").strip()


# --- execution ----------------------------------------------------------------


def _fj(e: float) -> str:
    return f"{e * 1e15:.3f} fJ"


def compare_to_baseline(s: Scenario) -> float:
    """Step-drive dissipation over sinusoidal net dissipation, at the scenario frequency."""
    if s.network is None:
        raise ScenarioError("baseline comparison needs a [network] section")
    return improvement_ratio(s.network, s.f)


def _run_transient(s: Scenario, out: Path, summary: list[str]) -> float:
    net = s.network
    T = 0.5 / s.f
    worst = 0.0
    summary.append(f"frequency: {s.f:.6g} Hz (half period {T * 1e9:.6g} ns)")
    summary.append(f"R_on: {net.R_on:.6g} ohm, C: {net.C_bus:.6g} F, "
                   f"R_stray: {'none' if net.R_stray is None else f'{net.R_stray:.6g} ohm'}")
    for v11 in s.toggle_outputs:
        res = run_two_cycle_protocol(net, v11, s.f)
        tag = "true" if v11 else "false"
        fname = "trace.csv" if len(s.toggle_outputs) == 1 else f"trace_{tag}.csv"
        (out / fname).write_text(res.trace.to_csv())
        worst = max(worst, res.trace.conservation_error())
        summary.append(f"toggle output {tag}:")
        summary.append(f"  peak net energy in first half-cycle: {_fj(res.peak_first_half)}")
        for k, e in enumerate(res.e_net_per_half_cycle, start=1):
            summary.append(f"  net energy at {k * T * 1e9:.6g} ns: {_fj(e)}")
        summary.append(f"  dissipated at {4 * T * 1e9:.6g} ns: {_fj(res.trace.e_dissipated[-1])}")
        summary.append(f"  conservation error: {res.trace.conservation_error():.3e}")
    predicted = am.predicted_recovery_energy(s.f, net.R_on, net.C_bus, net.supply.v_high)
    summary.append(f"simple-model two-cycle prediction: {_fj(predicted)}")
    if s.baseline:
        summary.append(f"improvement ratio vs step drive: {compare_to_baseline(s):.2f}")
    return worst


def _run_sweep_freq(s: Scenario, out: Path, summary: list[str]) -> None:
    rows = []
    for v11 in s.toggle_outputs:
        rows = sweep_frequency(s.network, v11, s.freqs)
        tag = "true" if v11 else "false"
        fname = "sweep.csv" if len(s.toggle_outputs) == 1 else f"sweep_{tag}.csv"
        (out / fname).write_text(sweep_to_csv(rows, ("f_Hz", "e_two_cycle_J")))
        summary.append(f"toggle output {tag}:")
        for f, e in rows:
            summary.append(f"  f = {f:.6g} Hz: {_fj(e)}")
        table = dict(rows)
        if 10e6 in table and 20e6 in table:
            slope = am.loglog_slope((10e6, table[10e6]), (20e6, table[20e6]))
            summary.append(f"  loglog slope 10->20 MHz: {slope:.4f}")
        if len(rows) >= 2:
            slope = am.loglog_slope(rows[-2], rows[-1])
            summary.append(f"  loglog slope of last two points: {slope:.4f}")
        f0, e0 = rows[0]
        r_ser = am.fit_series_resistance(f0, e0, s.network.C_bus, s.network.supply.v_high)
        summary.append(f"  fitted R_ser at {f0:.6g} Hz: {r_ser:.6g} ohm")


def _run_sweep_width(s: Scenario, out: Path, summary: list[str]) -> None:
    rows = sweep_driver_width(s.network, s.widths, s.f)
    (out / "sweep.csv").write_text(sweep_to_csv(rows, ("W_um", "e_cycle_J")))
    summary.append(f"frequency: {s.f:.6g} Hz")
    for w, e in rows:
        summary.append(f"  W = {w:.6g} um: {_fj(e)}")
    energies = [e for _, e in rows]
    decreasing = all(b < a for a, b in zip(energies, energies[1:]))
    summary.append(f"energy strictly decreasing in W: {'yes' if decreasing else 'no'}")


def _energy_params(s: Scenario) -> EnergyModelParams:
    m = s.machine
    discharge = BitTestMode(m["discharge"])
    if m["energy_mode"] == "calibrated":
        net = s.network or BusNetwork(
            1e-12, 5e3, am.SupplyWaveform.half_sinusoid(0.5, 1.0, s.f))
        return EnergyModelParams.calibrated(net, s.f, discharge)
    return EnergyModelParams(EnergyMode.ANALYTIC, s.f, m["e_hold"], m["e_cycle"],
                             m["e_irreversible"], discharge)


def _run_machine(s: Scenario, out: Path, summary: list[str]) -> bool:
    m = s.machine
    rng = np.random.default_rng(s.seed)
    params = _energy_params(s)
    restored_all = True
    machine0 = Machine.random(m["words"], m["width"], rng)
    (out / "snapshot_initial.txt").write_text(machine0.to_text())
    summary.append(f"seed: {s.seed}")
    summary.append(f"machine: {m['words']} words x {m['width']} bits; "
                   f"energy mode {params.mode.value}, discharge {params.discharge.value}")
    ledger_total = None
    fixed = None
    if m["program_file"]:
        fixed = read_program(Path(m["program_file"]).read_text())
        summary.append(f"program file: {m['program_file']}")
    for k in range(1 if fixed else m["programs"]):
        prog = fixed or random_reversible_program(m["width"], m["program_length"], rng)
        forward, ledger = run_program(machine0, prog, params)
        if k == 0:
            (out / "program.txt").write_text(write_program(prog))
            (out / "ledger.csv").write_text(ledger.to_csv())
            (out / "snapshot_final.txt").write_text(forward.to_text())
            ledger_total = ledger
        if m["reverse_check"]:
            back, _ = run_program(forward, invert_program(prog), params)
            restored_all &= back == machine0
    summary.extend(energy_report(ledger_total).lines())
    if m["reverse_check"]:
        summary.append(f"programs checked: {m['programs']}")
        summary.append(f"RESTORED: {'yes' if restored_all else 'no'}")
    return restored_all


def _run_toggle(s: Scenario, out: Path, summary: list[str]) -> None:
    t = s.toggle
    p = _trigger_params(s)
    cell = CellState(t["bit"])
    bus = BusState(t["v_start"], v_dd=t["v_dd"])
    lines = ["pulse,bus_V,bit,toggled,reason"]
    count = 0
    for k in range(1, t["pulses"] + 1):
        cell, bus, toggled, reason = conditional_toggle(cell, bus, t["pulse_width"], p)
        count += toggled
        lines.append(f"{k},{format_number(bus.voltage)},{int(cell.bit)},{int(toggled)},"
                     f"{reason.value}")
    (out / "toggle.csv").write_text("\n".join(lines) + "\n")
    summary.append(f"pulse width: {t['pulse_width']:.6g} s, threshold "
                   f"{p.threshold_fraction * t['v_dd']:.6g} V, droop {p.droop_per_toggle:.6g} V "
                   f"(uncalibrated placeholder)")
    summary.append(f"successful toggles: {count} of {t['pulses']}")
    summary.append(f"final bus voltage: {bus.voltage:.6g} V; final bit: {int(cell.bit)}")


def _run_analytic(s: Scenario, out: Path, summary: list[str]) -> None:
    net = s.network
    V = net.supply.v_high
    T = 0.5 / s.f
    p = am.LumpedParams(net.R_on, net.C_bus, V, net.R_stray)
    supply_e, cap_e, res_e = am.step_charge_energies(net.C_bus, V)
    rows = [
        ("ramp_current_A", am.ramp_charging_current(p, T)),
        ("ramp_power_W", am.ramp_resistor_power(p, T)),
        ("ramp_loss_J", am.ramp_resistor_energy(p, T)),
        ("cap_delta_half_to_full_J", am.capacitor_energy_delta(net.C_bus, 0.5 * V, V)),
        ("step_supply_J", supply_e), ("step_cap_J", cap_e), ("step_resistor_J", res_e),
        ("conventional_power_W", am.conventional_dynamic_power(s.f, net.C_bus, V)),
        ("predicted_two_cycle_J", am.predicted_recovery_energy(s.f, net.R_on, net.C_bus, V)),
    ]
    lines = ["quantity,value"] + [f"{k},{format_number(v)}" for k, v in rows]
    (out / "analytic.csv").write_text("\n".join(lines) + "\n")
    summary.append(f"inputs: R={net.R_on:.6g} ohm, C={net.C_bus:.6g} F, V_1={V:.6g} V, "
                   f"f={s.f:.6g} Hz, T={T:.6g} s")
    summary.extend(f"{k}: {v:.6g}" for k, v in rows)


@dataclass
class RunResult:
    status: int
    out_dir: Path
    summary: list[str]
    message: str = ""


def run_scenario(s: Scenario, out_dir: str | Path) -> RunResult:
    """Run one scenario, write its artifacts, and map failures to exit codes."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = [f"scenario: {s.name}", f"kind: {s.kind}"]
    status = EXIT_OK
    message = ""
    try:
        if s.kind == "transient":
            worst = _run_transient(s, out, summary)
            summary.append(f"worst conservation error: {worst:.3e}")
        elif s.kind == "sweep-freq":
            _run_sweep_freq(s, out, summary)
        elif s.kind == "sweep-width":
            _run_sweep_width(s, out, summary)
        elif s.kind == "machine":
            if not _run_machine(s, out, summary):
                status = EXIT_NOT_RESTORED
        elif s.kind == "toggle":
            _run_toggle(s, out, summary)
        else:
            _run_analytic(s, out, summary)
    except SimulationError as exc:
        status, message = EXIT_SIMULATION, f"simulation error: {exc}"
    except MachineError as exc:
        status, message = EXIT_MACHINE, f"machine error: {exc}"
    except ScenarioError as exc:
        status, message = EXIT_SCENARIO, f"scenario error: {exc}"
    except (ValueError, OSError) as exc:
        status, message = EXIT_MODEL, f"model error: {exc}"
    if message:
        summary.append(message)
    summary.append(f"exit status: {status}")
    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    return RunResult(status, out, summary, message)
