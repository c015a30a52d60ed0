import pytest

from togglemem.cli import main
from togglemem.scenario import (
    EXIT_MACHINE, EXIT_OK, EXIT_SCENARIO, EXIT_SIMULATION, ScenarioError,
    bundled_scenarios, compare_to_baseline, parse_quantity, parse_scenario, run_scenario,
)

EXPECTED_EXAMPLES = {"fig5", "fig8", "fig10", "fig11", "fig12", "fig13", "machine-demo"}

TRANSIENT = """\
[scenario]
kind = transient
name = t

[network]
C = 1p
R_on = 5k

[protocol]
f = 10M
"""


@pytest.mark.parametrize("text,value", [
    ("1p", 1e-12), ("10M", 10e6), ("5k", 5e3), ("2.5n", 2.5e-9), ("3u", 3e-6),
    ("4m", 4e-3), ("1G", 1e9), ("7f", 7e-15), ("1.5e-12", 1.5e-12), ("-2", -2.0),
])
def test_parse_quantity(text, value):
    assert parse_quantity(text) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("bad", ["", "1x", "k", "1 p", "1pp"])
def test_parse_quantity_rejects(bad):
    with pytest.raises(ValueError):
        parse_quantity(bad)


def test_transient_section_builds_default_network():
    s = parse_scenario(TRANSIENT)
    net = s.network
    assert net.C_bus == pytest.approx(1e-12)
    assert net.R_on == 5e3 and net.R_stray is None
    assert net.v_init == 0.5
    assert (net.supply.v_low, net.supply.v_high) == (0.5, 1.0)
    assert s.f == 10e6


def test_missing_c_names_the_key():
    with pytest.raises(ScenarioError, match="'C'"):
        parse_scenario(TRANSIENT.replace("C = 1p\n", ""))


@pytest.mark.parametrize("text,line", [
    ("[scenario]\nkind = transient\n[network]\nC = 1q\n", 4),
    ("[scenario]\nkind = transient\n\nbogus = 1\n", 4),
    ("[nope]\n", 1),
    ("[scenario]\nkind = warp\n", 2),
])
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text)
    assert info.value.line == line


def test_invariant_violation_reported():
    with pytest.raises(ScenarioError, match="C_bus"):
        parse_scenario(TRANSIENT.replace("C = 1p", "C = 0"))


def test_bundled_examples_present():
    assert set(bundled_scenarios()) == EXPECTED_EXAMPLES
    for text in bundled_scenarios().values():
        parse_scenario(text)


def test_list_examples(capsys):
    assert main(["list-examples"]) == 0
    out = capsys.readouterr().out
    assert all(name in out for name in EXPECTED_EXAMPLES)


def test_fig12_reports_slope(tmp_path):
    res = run_scenario(parse_scenario(bundled_scenarios()["fig12"]), tmp_path)
    assert res.status == EXIT_OK
    summary = (tmp_path / "summary.txt").read_text()
    assert "loglog slope 10->20 MHz" in summary
    assert "fitted R_ser" in summary
    assert (tmp_path / "sweep.csv").read_text().startswith("f_Hz,e_two_cycle_J\n")


def test_fig8_reports_boundary_energies(tmp_path):
    res = run_scenario(parse_scenario(bundled_scenarios()["fig8"]), tmp_path)
    assert res.status == EXIT_OK
    summary = (tmp_path / "summary.txt").read_text()
    assert "net energy at 100 ns" in summary and "net energy at 200 ns" in summary
    assert "improvement ratio" in summary


def test_machine_demo_restores(tmp_path):
    assert main(["run", "machine-demo", "--out", str(tmp_path)]) == 0
    summary = (tmp_path / "summary.txt").read_text()
    assert "RESTORED: yes" in summary
    assert "seed: 0" in summary
    assert (tmp_path / "ledger.csv").read_text().startswith("instr,matched,unmatched,class,e_J")


def test_runs_are_byte_identical(tmp_path):
    for name in ("fig8", "fig11", "machine-demo"):
        a, b = tmp_path / f"{name}-a", tmp_path / f"{name}-b"
        assert main(["run", name, "--out", str(a)]) == 0
        assert main(["run", name, "--out", str(b)]) == 0
        for f in a.iterdir():
            assert f.read_bytes() == (b / f.name).read_bytes(), f.name


def test_csv_values_roundtrip_through_unit_parser(tmp_path):
    main(["run", "fig10", "--out", str(tmp_path)])
    lines = (tmp_path / "trace.csv").read_text().splitlines()[1:]
    for line in lines:
        for cell in line.split(","):
            x = parse_quantity(cell)
            assert f"{x:.16e}" == cell


def test_bad_file_exit_status(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nkind = transient\n")
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == EXIT_SCENARIO
    assert main(["run", str(tmp_path / "missing.ini")]) == EXIT_SCENARIO


def test_simulation_error_exit_status(tmp_path):
    s = parse_scenario(TRANSIENT.replace("[protocol]", "[sweep]\nfreqs = 1M\n[protocol]"))
    s.kind = "sweep-freq"
    s.freqs = [0.0]
    assert run_scenario(s, tmp_path).status == EXIT_SIMULATION


def test_irreversible_program_cannot_be_reverse_checked(tmp_path):
    prog = tmp_path / "prog.txt"
    prog.write_text("test=0,1 toggle=2\ntest=3 toggle=3\n")
    s = parse_scenario(
        f"[scenario]\nkind = machine\n[machine]\nwidth = 4\nwords = 4\nprogram_file = {prog}\n")
    res = run_scenario(s, tmp_path / "o")
    assert res.status == EXIT_MACHINE
    assert "instruction 1" in res.message


def test_analytic_and_toggle_kinds(tmp_path):
    text = "[scenario]\nkind = analytic\n[network]\nC = 1p\nR_on = 5k\n[protocol]\nf = 10M\n"
    res = run_scenario(parse_scenario(text), tmp_path / "a")
    assert res.status == 0
    assert "ramp_loss_J: 1e-13" in (tmp_path / "a" / "summary.txt").read_text()
    res = run_scenario(parse_scenario(bundled_scenarios()["fig5"]), tmp_path / "t")
    assert "successful toggles: 6 of 10" in res.summary


def test_compare_to_baseline_scales_with_frequency():
    s2 = parse_scenario(TRANSIENT.replace("10M", "2M"))
    s20 = parse_scenario(TRANSIENT.replace("10M", "20M"))
    r2, r20 = compare_to_baseline(s2), compare_to_baseline(s20)
    assert r2 >= 20
    assert 5 <= r2 / r20 <= 15


def test_lossless_limit_ratio_grows():
    ratios = [compare_to_baseline(parse_scenario(TRANSIENT.replace("5k", r))) for r in
              ("5k", "500", "50")]
    assert ratios[0] < ratios[1] < ratios[2]
