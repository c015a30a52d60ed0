"""Lumped matchline transient simulation with energy bookkeeping.

The bus is a single node of capacitance ``C_bus``. It connects to the supply
through the driver switch (``R_on``), to ground through an optional discharge
path (``R_ground``), and always to ground through ``R_stray`` when present::

    C dv/dt = d(t) (v_s - v) / R_on - g(t) v / R_ground - v / R_stray

``d`` and ``g`` are the switch states from a :class:`SwitchSchedule`. The ODE
is integrated with the trapezoidal rule on a fixed grid; delivered and
dissipated energies are trapezoidal quadratures on the same grid.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.signal import lfilter

from .adiabatic import SupplyWaveform, capacitor_energy_delta
from .cell import matchline_gate

STEPS_PER_TAU = 200
MAX_DT_FRACTION = 0.1
WIDTH_RESISTIVITY = 12.5e3  # ohm * um; W = 2.5 um gives 5 kOhm


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class BusNetwork:
    C_bus: float
    R_on: float
    supply: SupplyWaveform
    R_stray: float | None = None
    v_init: float | None = None
    R_ground: float | None = None

    def __post_init__(self):
        if self.C_bus <= 0:
            raise ValueError("C_bus must be > 0")
        if self.R_on <= 0:
            raise ValueError("R_on must be > 0")
        if self.R_stray is not None and self.R_stray <= 0:
            raise ValueError("R_stray must be > 0 or None")
        if self.R_ground is not None and self.R_ground <= 0:
            raise ValueError("R_ground must be > 0 or None")
        if self.v_init is None:
            object.__setattr__(self, "v_init", 0.5 * self.supply.v_high)
        if not 0 <= self.v_init <= self.supply.v_high:
            raise ValueError(f"v_init {self.v_init} outside [0, {self.supply.v_high}]")

    @property
    def r_ground(self) -> float:
        return self.R_on if self.R_ground is None else self.R_ground


class SwitchInterval(NamedTuple):
    t_start: float
    t_end: float
    driver_on: bool
    ground_on: bool = False


@dataclass(frozen=True)
class SwitchSchedule:
    """Sorted, non-overlapping switch intervals; both switches are open in any gap."""

    intervals: tuple[SwitchInterval, ...] = ()

    def __post_init__(self):
        ivs = tuple(SwitchInterval(*iv) for iv in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        prev_end = -math.inf
        for iv in ivs:
            if iv.t_start < 0 or iv.t_end <= iv.t_start:
                raise SimulationError(f"bad switch interval {iv}")
            if iv.t_start < prev_end - 1e-18:
                raise SimulationError("switch intervals must be sorted and non-overlapping")
            prev_end = iv.t_end

    @classmethod
    def always(cls, horizon: float, driver_on: bool = True, ground_on: bool = False):
        return cls((SwitchInterval(0.0, horizon, driver_on, ground_on),))

    def states_at(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        drv = np.zeros(t.shape, dtype=bool)
        gnd = np.zeros(t.shape, dtype=bool)
        for iv in self.intervals:
            inside = (t >= iv.t_start) & (t < iv.t_end)
            drv |= inside & iv.driver_on
            gnd |= inside & iv.ground_on
        return drv, gnd


@dataclass(frozen=True)
class SimConfig:
    """``print_step`` defaults to horizon/100; ``dt`` defaults to the step rule."""

    horizon: float
    print_step: float | None = None
    dt: float | None = None

    def __post_init__(self):
        if not self.horizon > 0:
            raise SimulationError("horizon must be > 0")
        if self.print_step is None:
            object.__setattr__(self, "print_step", self.horizon / 100)
        if not 0 < self.print_step <= self.horizon / 100 * (1 + 1e-9):
            raise SimulationError("print_step must be positive and at most horizon/100")
        if self.dt is not None and not 0 < self.dt <= self.print_step:
            raise SimulationError("dt must satisfy 0 < dt <= print_step")


def _frozen(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TransientTrace:
    t: np.ndarray
    v_bus: np.ndarray
    v_supply: np.ndarray
    i_supply: np.ndarray
    e_supply: np.ndarray
    e_dissipated: np.ndarray
    C: float
    v_init: float
    dt: float = field(default=0.0)

    def __post_init__(self):
        for name in ("t", "v_bus", "v_supply", "i_supply", "e_supply", "e_dissipated"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    def __len__(self):
        return len(self.t)

    def _at(self, column: np.ndarray, t: float) -> float:
        if not self.t[0] - 1e-18 <= t <= self.t[-1] * (1 + 1e-12):
            raise ValueError(f"t={t} outside trace [{self.t[0]}, {self.t[-1]}]")
        return float(np.interp(t, self.t, column))

    def conservation_residual(self) -> np.ndarray:
        """Supply energy minus stored-energy change minus dissipation, per sample."""
        stored = 0.5 * self.C * (self.v_bus**2 - self.v_init**2)
        return self.e_supply - stored - self.e_dissipated

    def conservation_error(self) -> float:
        """Worst residual relative to the peak delivered energy."""
        peak = float(np.max(np.abs(self.e_supply)))
        worst = float(np.max(np.abs(self.conservation_residual())))
        return worst / peak if peak > 0 else worst

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_s", "v_bus_V", "v_supply_V", "i_A", "e_supply_J", "e_diss_J"])
        cols = (self.t, self.v_bus, self.v_supply, self.i_supply, self.e_supply, self.e_dissipated)
        for row in zip(*cols):
            w.writerow([format_number(x) for x in row])
        return buf.getvalue()


def format_number(x: float) -> str:
    # 17 significant digits round-trip exactly; no locale involvement.
    return f"{float(x):.16e}"


def _time_constants(net: BusNetwork, sched: SwitchSchedule) -> float:
    """Smallest RC time constant over the switch configurations that occur."""
    g_stray = 0.0 if net.R_stray is None else 1.0 / net.R_stray
    g_max = g_stray
    for iv in sched.intervals:
        g = g_stray + iv.driver_on / net.R_on + iv.ground_on / net.r_ground
        g_max = max(g_max, g)
    return net.C_bus / g_max if g_max > 0 else math.inf


def default_dt(net: BusNetwork, sched: SwitchSchedule, cfg: SimConfig) -> float:
    candidates = [_time_constants(net, sched), net.supply.half_period or math.inf]
    base = min(candidates)
    if math.isinf(base):
        base = cfg.print_step
    return base / STEPS_PER_TAU


def simulate(net: BusNetwork, sched: SwitchSchedule, cfg: SimConfig) -> TransientTrace:
    """Integrate the bus node over ``cfg.horizon`` and sample every print step."""
    for iv in sched.intervals:
        if iv.t_end > cfg.horizon * (1 + 1e-9):
            raise SimulationError(f"switch interval {iv} extends past horizon {cfg.horizon}")
    tau = _time_constants(net, sched)
    dt = cfg.dt if cfg.dt is not None else default_dt(net, sched, cfg)
    if dt > MAX_DT_FRACTION * tau:
        raise SimulationError(f"dt={dt:.3g} s exceeds {MAX_DT_FRACTION} * tau ({tau:.3g} s)")

    n_print = max(1, math.ceil(cfg.horizon / cfg.print_step - 1e-9))
    print_step = cfg.horizon / n_print
    n_sub = max(1, math.ceil(print_step / dt - 1e-9))
    dt = print_step / n_sub
    n = n_print * n_sub

    t = np.arange(n + 1) * dt
    vs = np.asarray(net.supply(t), dtype=float)
    drv, gnd = sched.states_at(t[:-1] + 0.5 * dt)
    g_d = drv / net.R_on
    g_shunt = gnd / net.r_ground + (0.0 if net.R_stray is None else 1.0 / net.R_stray)

    C = net.C_bus
    a = C / dt
    g_tot = g_d + g_shunt
    alpha = (a - 0.5 * g_tot) / (a + 0.5 * g_tot)
    beta = 0.5 * g_d * (vs[:-1] + vs[1:]) / (a + 0.5 * g_tot)

    v = np.empty(n + 1)
    v[0] = net.v_init
    # alpha is piecewise constant, so each run is a first-order linear filter.
    change = np.flatnonzero((np.diff(g_d) != 0) | (np.diff(g_shunt) != 0)) + 1
    bounds = np.concatenate(([0], change, [n]))
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        al = alpha[lo]
        v[lo + 1 : hi + 1], _ = lfilter([1.0], [1.0, -al], beta[lo:hi], zi=[al * v[lo]])

    i_left = g_d * (vs[:-1] - v[:-1])
    i_right = g_d * (vs[1:] - v[1:])
    de_supply = 0.5 * dt * (vs[:-1] * i_left + vs[1:] * i_right)
    de_diss = 0.5 * dt * (
        g_d * ((vs[:-1] - v[:-1]) ** 2 + (vs[1:] - v[1:]) ** 2)
        + g_shunt * (v[:-1] ** 2 + v[1:] ** 2)
    )
    e_supply = np.concatenate(([0.0], np.cumsum(de_supply)))
    e_diss = np.concatenate(([0.0], np.cumsum(de_diss)))
    i_node = np.concatenate((i_left[:1], i_right))

    idx = np.arange(n_print + 1) * n_sub
    return TransientTrace(
        t=t[idx], v_bus=v[idx], v_supply=vs[idx], i_supply=i_node[idx],
        e_supply=e_supply[idx], e_dissipated=e_diss[idx],
        C=C, v_init=net.v_init, dt=dt,
    )


def energy_from_supply(trace: TransientTrace, t: float) -> float:
    """Net energy delivered by the supply up to ``t``; drops when charge returns."""
    return trace._at(trace.e_supply, t)


def dissipated_energy(trace: TransientTrace, t: float) -> float:
    return trace._at(trace.e_dissipated, t)


def stored_energy_change(trace: TransientTrace, t: float) -> float:
    return capacitor_energy_delta(trace.C, trace.v_init, trace._at(trace.v_bus, t))


# --- charge-recovery protocol -------------------------------------------------


def control_timeline() -> list[tuple[bool, bool]]:
    """(V_FM, V_PRE) per half-cycle over the two-cycle conditional-toggle sequence.

    V_PRE is asserted for the first half-cycle (charge), drops for the middle
    two, and comes back for the last half-cycle so a held bus can return its
    charge. V_FM stays asserted throughout.
    """
    return [(True, True), (True, False), (True, False), (True, True)]


def protocol_schedule(toggle_output_true: bool, half_period: float) -> SwitchSchedule:
    intervals = []
    for k, (v_fm, v_pre) in enumerate(control_timeline()):
        if matchline_gate(v_fm, v_pre, toggle_output_true):
            intervals.append(SwitchInterval(k * half_period, (k + 1) * half_period, True))
    return SwitchSchedule(tuple(_merge(intervals)))


def _merge(intervals: Iterable[SwitchInterval]) -> list[SwitchInterval]:
    out: list[SwitchInterval] = []
    for iv in intervals:
        if out and out[-1].t_end == iv.t_start and out[-1][2:] == iv[2:]:
            out[-1] = out[-1]._replace(t_end=iv.t_end)
        else:
            out.append(iv)
    return out


@dataclass(frozen=True)
class ProtocolResult:
    trace: TransientTrace
    e_net_per_half_cycle: tuple[float, ...]
    frequency: float

    @property
    def e_two_cycle(self) -> float:
        return self.e_net_per_half_cycle[-1]

    @property
    def peak_first_half(self) -> float:
        """Largest net supply energy reached during the charging half-cycle."""
        T = 0.5 / self.frequency
        mask = self.trace.t <= T * (1 + 1e-9)
        return float(np.max(self.trace.e_supply[mask]))


def sinusoidal_network(net: BusNetwork, f: float) -> BusNetwork:
    s = net.supply
    return replace(net, supply=SupplyWaveform.half_sinusoid(s.v_low, s.v_high, f))


def run_two_cycle_protocol(
    net: BusNetwork, toggle_output_true: bool, f: float, dt: float | None = None
) -> ProtocolResult:
    """Run the two-cycle conditional-toggle sequence on a sinusoidal supply at ``f``.

    With the toggle output false the driver conducts the whole time, so the bus
    charges and discharges with the supply twice. With it true the bus charges,
    is held through the middle half-cycles, and discharges on the last one.
    Returns the net supply energy at each half-cycle boundary.
    """
    if not f > 0:
        raise SimulationError(f"frequency must be positive, got {f}")
    T = 0.5 / f
    sin_net = sinusoidal_network(net, f)
    sched = protocol_schedule(toggle_output_true, T)
    trace = simulate(sin_net, sched, SimConfig(horizon=4 * T, dt=dt))
    e_net = tuple(energy_from_supply(trace, k * T) for k in range(1, 5))
    return ProtocolResult(trace, e_net, f)


def sweep_frequency(
    net: BusNetwork, toggle_output_true: bool, freqs: Sequence[float]
) -> list[tuple[float, float]]:
    freqs = list(freqs)
    if any(f <= 0 for f in freqs):
        raise SimulationError("frequencies must be positive")
    if freqs != sorted(freqs):
        raise SimulationError("frequencies must be sorted")
    return [(f, run_two_cycle_protocol(net, toggle_output_true, f).e_two_cycle) for f in freqs]


def driver_resistance(width_um: float, resistivity: float = WIDTH_RESISTIVITY) -> float:
    if not width_um > 0:
        raise ValueError(f"driver width must be positive, got {width_um}")
    return resistivity / width_um


def run_one_cycle(net: BusNetwork, f: float) -> TransientTrace:
    """One full supply cycle with the driver closed: charge, then recover."""
    T = 0.5 / f
    return simulate(sinusoidal_network(net, f), SwitchSchedule.always(2 * T), SimConfig(2 * T))


def sweep_driver_width(
    net_base: BusNetwork, widths_um: Sequence[float], f: float
) -> list[tuple[float, float]]:
    rows = []
    for w in widths_um:
        net = replace(net_base, R_on=driver_resistance(w))
        trace = run_one_cycle(net, f)
        rows.append((w, float(trace.e_supply[-1])))
    return rows


# --- irreversible baseline ----------------------------------------------------


def run_step_drive_two_cycle(net: BusNetwork, f: float) -> TransientTrace:
    """Conventional matchline over two cycles at ``f``.

    Each cycle precharges the bus from a DC rail at ``v_high`` through the
    driver, then discharges it fully to ground through the ground path. The bus
    starts empty. All delivered energy ends up as heat.
    """
    if not f > 0:
        raise SimulationError(f"frequency must be positive, got {f}")
    T = 0.5 / f
    dc = replace(net, supply=SupplyWaveform.step(0.0, net.supply.v_high), v_init=0.0)
    sched = SwitchSchedule(tuple(
        SwitchInterval(k * T, (k + 1) * T, k % 2 == 0, k % 2 == 1) for k in range(4)
    ))
    return simulate(dc, sched, SimConfig(4 * T))


def improvement_ratio(net: BusNetwork, f: float, toggle_output_true: bool = False) -> float:
    """Step-drive two-cycle dissipation over sinusoidal-drive net two-cycle energy."""
    baseline = float(run_step_drive_two_cycle(net, f).e_dissipated[-1])
    recovered = run_two_cycle_protocol(net, toggle_output_true, f).e_two_cycle
    if recovered <= 0:
        return math.inf
    return baseline / recovered


def sweep_to_csv(rows: Iterable[tuple[float, float]], header: tuple[str, str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for x, e in rows:
        w.writerow([format_number(x), format_number(e)])
    return buf.getvalue()
