import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from togglemem.cell import BitTestMode
from togglemem.machine import (
    EnergyLedger, EnergyModelParams, Instruction, Machine, MachineError, Reversibility,
    classify_instruction, energy_report, execute_instruction, invert_program, match_words,
    parallel_speedup, random_reversible_program, read_program, run_program, write_program,
)


def brute_force_execute(rows, ins):
    """Word-by-word reference: toggle when every tested bit is set."""
    out = []
    for word in rows:
        word = list(word)
        if all(word[i] for i in ins.test_set):
            for j in ins.toggle_set:
                word[j] = not word[j]
        out.append(word)
    return out


def all_patterns(k):
    return Machine(list(itertools.product([False, True], repeat=k)))


def test_classify_examples():
    assert classify_instruction(Instruction(range(7), [7])) is Reversibility.REVERSIBLE
    assert classify_instruction(Instruction([7], [7])) is Reversibility.IRREVERSIBLE
    assert classify_instruction(Instruction([], [7])) is Reversibility.REVERSIBLE
    with pytest.raises(MachineError):
        classify_instruction(Instruction([9], [1]), width=8)


def test_instruction_needs_toggle_bits():
    with pytest.raises(MachineError):
        Instruction([1, 2], [])


def test_keyword_flag_example():
    m = Machine([[True] * 7 + [False], [True] * 6 + [False, False]])
    out, entry = execute_instruction(m, Instruction(range(7), [7]))
    assert out.bits[0, 7] and not out.bits[1, 7]
    assert np.array_equal(out.bits[1], m.bits[1])
    assert (entry.matched, entry.unmatched) == (1, 1)


def test_width_mismatch_rejected():
    with pytest.raises(MachineError):
        execute_instruction(Machine.zeros(4, 8), Instruction([1], [8]))


def test_ledger_arithmetic_defaults():
    m = Machine([[True, False]] * 2 + [[False, False]] * 3)
    _, entry = execute_instruction(m, Instruction([0], [1]))
    assert (entry.matched, entry.unmatched) == (2, 3)
    assert entry.e_total == pytest.approx(2 * 43e-15 + 3 * 77e-15, rel=1e-12)
    assert entry.e_total == pytest.approx(317e-15, rel=1e-12)


def test_irreversible_discharge_mode_charges_half_cv2():
    m = Machine([[True, False]] * 2 + [[False, False]] * 3)
    p = EnergyModelParams(discharge=BitTestMode.IRREVERSIBLE)
    _, entry = execute_instruction(m, Instruction([0], [1]), p)
    assert entry.e_total == pytest.approx(2 * 43e-15 + 3 * 500e-15)


def test_exhaustive_wired_and_width_10():
    k = 10
    m = all_patterns(k)
    ins = Instruction([0, 3, 4, 9], [5])
    expected = [all(row[i] for i in ins.test_set) for row in m.bits]
    assert list(match_words(m, ins)) == expected
    out, _ = execute_instruction(m, ins)
    assert out.bits.tolist() == brute_force_execute(m.bits.tolist(), ins)


@pytest.mark.parametrize("k", [1, 3, 5, 8])
def test_classification_matches_double_execution(k):
    m = all_patterns(k)
    rng = np.random.default_rng(k)
    for _ in range(40):
        test = [int(i) for i in np.flatnonzero(rng.random(k) < 0.4)]
        toggle = [int(i) for i in np.flatnonzero(rng.random(k) < 0.4)] or [int(rng.integers(k))]
        ins = Instruction(test, toggle)
        twice, _ = run_program(m, [ins, ins])
        restores = twice == m
        assert (classify_instruction(ins) is Reversibility.REVERSIBLE) == restores


def test_invert_program():
    a, b, c = Instruction([0], [1]), Instruction([1], [2]), Instruction([], [0])
    assert invert_program([a, b, c]) == [c, b, a]
    assert invert_program([]) == []
    with pytest.raises(MachineError, match="instruction 1"):
        invert_program([a, Instruction([3], [3]), c])


def test_single_instruction_program_equals_execute():
    m = Machine.random(16, 8, np.random.default_rng(1))
    ins = Instruction([0, 1], [5])
    m1, entry = execute_instruction(m, ins)
    m2, ledger = run_program(m, [ins])
    assert m1 == m2 and ledger.entries == [entry]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 16), st.integers(2, 12), st.integers(0, 30))
def test_forward_then_inverse_restores(seed, words, width, length):
    rng = np.random.default_rng(seed)
    m = Machine.random(words, width, rng)
    prog = random_reversible_program(width, length, rng)
    fwd, _ = run_program(m, prog)
    back, _ = run_program(fwd, invert_program(prog))
    assert back == m


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_machine_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    m = Machine.random(20, 6, rng)
    rows = m.bits.tolist()
    for ins in random_reversible_program(6, 15, rng) + [Instruction([2], [2, 4])]:
        m, _ = execute_instruction(m, ins)
        rows = brute_force_execute(rows, ins)
    assert m.bits.tolist() == rows


def test_word_independence_and_permutation_invariance():
    rng = np.random.default_rng(7)
    a, b = Machine.random(10, 8, rng), Machine.random(6, 8, rng)
    prog = random_reversible_program(8, 20, rng)
    joint, lj = run_program(Machine(np.vstack([a.bits, b.bits])), prog)
    ra, la = run_program(a, prog)
    rb, lb = run_program(b, prog)
    assert np.array_equal(joint.bits, np.vstack([ra.bits, rb.bits]))
    assert lj.total == pytest.approx(la.total + lb.total)
    perm = rng.permutation(16)
    pj, lp = run_program(Machine(np.vstack([a.bits, b.bits])[perm]), prog)
    assert lp.total == pytest.approx(lj.total)
    assert np.array_equal(pj.bits, joint.bits[perm])


def test_ledger_additive_under_concatenation():
    rng = np.random.default_rng(3)
    m = Machine.random(32, 8, rng)
    p1, p2 = random_reversible_program(8, 10, rng), random_reversible_program(8, 7, rng)
    mid, l1 = run_program(m, p1)
    _, l2 = run_program(mid, p2)
    _, l12 = run_program(m, p1 + p2)
    assert l12.total == pytest.approx(l1.total + l2.total)
    assert all(e.matched + e.unmatched == 32 and e.e_total >= 0 for e in l12)


def test_energy_report():
    assert energy_report(EnergyLedger()).total == 0.0
    m = Machine([[True, False]] * 4)
    _, ledger = run_program(m, [Instruction([0], [1])])
    rep = energy_report(ledger)
    assert rep.unmatched_total == 0.0
    m = Machine([[True, False]] * 2 + [[False, False]] * 3)
    _, ledger = run_program(m, [Instruction([0], [1]), Instruction([1], [1])])
    rep = energy_report(ledger)
    assert rep.matched_to_unmatched_ratio == pytest.approx(43 / 77)
    assert rep.irreversible_total == pytest.approx(ledger.entries[1].e_total)
    assert not rep.irreversible_dominates


def test_parallel_speedup():
    assert parallel_speedup(1e6, 100) == (1e4, False)
    assert parallel_speedup(50, 50) == (1.0, True)
    assert parallel_speedup(1, 10) == (0.1, True)
    with pytest.raises(ValueError):
        parallel_speedup(0, 1)


def test_snapshot_and_program_text_roundtrip():
    m = Machine([[True, False, False], [False, False, True]])
    assert m.to_text() == "001\n100\n"
    assert Machine.from_text(m.to_text()) == m
    prog = [Instruction([0, 2], [1]), Instruction([], [0, 1])]
    text = write_program(prog)
    assert text.splitlines()[0] == "test=0,2 toggle=1"
    assert read_program(text) == prog
    with pytest.raises(MachineError):
        Machine.from_text("01\n011\n")


def test_ledger_csv():
    m = Machine([[True, False]] * 2 + [[False, False]] * 3)
    _, ledger = run_program(m, [Instruction([0], [1])])
    lines = ledger.to_csv().splitlines()
    assert lines[0] == "instr,matched,unmatched,class,e_J"
    assert lines[1].startswith("0,2,3,reversible,")
    assert float(lines[1].split(",")[-1]) == pytest.approx(317e-15)


def test_calibrated_params_come_from_transient():
    from togglemem.adiabatic import SupplyWaveform
    from togglemem.transient import BusNetwork

    net = BusNetwork(1e-12, 5e3, SupplyWaveform.half_sinusoid(0.5, 1.0, 10e6))
    p = EnergyModelParams.calibrated(net, 10e6)
    assert 0 < p.e_hold_two_cycle < p.e_cycle_two_cycle
    assert p.e_irreversible == pytest.approx(0.5e-12)
