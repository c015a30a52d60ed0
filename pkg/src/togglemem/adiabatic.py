"""Closed-form energy relations for adiabatic (charge-recovery) switching.

Everything here works in SI units. A bus of capacitance C charged through a
channel resistance R is the whole model; the functions below give the
ramp-charging current, power and loss, the step-charging energy split, the
conventional f*C*V^2 dynamic power, and the two-cycle recovery energy law
that is linear in supply frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class SupplyKind(Enum):
    STEP = "step"
    RAMP = "ramp"
    HALF_SINUSOID = "half_sinusoid"


@dataclass(frozen=True)
class SupplyWaveform:
    """Supply voltage description.

    ``HALF_SINUSOID`` is a negated cosine: it sits at ``v_low`` at t=0, reaches
    ``v_high`` after half a period (1/(2f)) and repeats with period 1/f.
    """

    kind: SupplyKind
    v_low: float
    v_high: float
    rise_time: float | None = None
    frequency: float | None = None

    def __post_init__(self):
        if not (self.v_high > self.v_low >= 0):
            raise ValueError(f"need v_high > v_low >= 0, got {self.v_low}, {self.v_high}")
        if self.kind is SupplyKind.RAMP and not (self.rise_time and self.rise_time > 0):
            raise ValueError("ramp supply needs rise_time > 0")
        if self.kind is SupplyKind.HALF_SINUSOID and not (self.frequency and self.frequency > 0):
            raise ValueError("half-sinusoid supply needs frequency > 0")

    @classmethod
    def step(cls, v_low: float, v_high: float) -> SupplyWaveform:
        return cls(SupplyKind.STEP, v_low, v_high)

    @classmethod
    def ramp(cls, v_low: float, v_high: float, rise_time: float) -> SupplyWaveform:
        return cls(SupplyKind.RAMP, v_low, v_high, rise_time=rise_time)

    @classmethod
    def half_sinusoid(cls, v_low: float, v_high: float, frequency: float) -> SupplyWaveform:
        return cls(SupplyKind.HALF_SINUSOID, v_low, v_high, frequency=frequency)

    @property
    def half_period(self) -> float | None:
        """Time over which the supply swings low to high (None for a step)."""
        if self.kind is SupplyKind.RAMP:
            return self.rise_time
        if self.kind is SupplyKind.HALF_SINUSOID:
            return 0.5 / self.frequency
        return None

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.v_low, self.v_high
        if self.kind is SupplyKind.STEP:
            v = np.where(t < 0, lo, hi)
        elif self.kind is SupplyKind.RAMP:
            v = lo + (hi - lo) * np.clip(t / self.rise_time, 0.0, 1.0)
        else:
            mid, amp = 0.5 * (hi + lo), 0.5 * (hi - lo)
            v = mid - amp * np.cos(2 * math.pi * self.frequency * t)
        return v if v.ndim else float(v)


@dataclass(frozen=True)
class LumpedParams:
    """Series resistance ``R`` charging load ``C`` to ``V_1``.

    ``R_stray=None`` means no leakage path at all.
    """

    R: float
    C: float
    V_1: float
    R_stray: float | None = None

    def __post_init__(self):
        if self.R < 0:
            raise ValueError("R must be >= 0")
        if self.C <= 0:
            raise ValueError("C must be > 0")
        if self.R_stray is not None and self.R_stray <= 0:
            raise ValueError("R_stray must be > 0 or None")


def eval_supply(w: SupplyWaveform, t):
    return w(t)


def _check_rise_time(T: float) -> None:
    if not T > 0:
        raise ValueError(f"rise time must be positive, got {T}")


def ramp_charging_current(p: LumpedParams, T: float) -> float:
    """Quasi-static charging current C*V_1/T for a ramp of duration T."""
    _check_rise_time(T)
    return p.C * p.V_1 / T


def ramp_resistor_power(p: LumpedParams, T: float) -> float:
    _check_rise_time(T)
    return p.R * p.C / T**2 * p.C * p.V_1**2


def ramp_resistor_energy(p: LumpedParams, T: float) -> float:
    """Resistive loss of one ramp; goes to zero as T grows."""
    _check_rise_time(T)
    return p.R * p.C / T * p.C * p.V_1**2


def capacitor_energy_delta(C: float, v0: float, v1: float) -> float:
    """Change in stored energy going from v0 to v1 (negative on discharge)."""
    if C <= 0:
        raise ValueError("C must be > 0")
    return 0.5 * C * (v1**2 - v0**2)


def step_charge_energies(C: float, V_1: float) -> tuple[float, float, float]:
    """(from supply, stored in C, lost in R) when C is charged by a DC step."""
    if C <= 0:
        raise ValueError("C must be > 0")
    stored = 0.5 * C * V_1**2
    return C * V_1**2, stored, stored


def conventional_dynamic_power(f1: float, C: float, V_DD: float) -> float:
    if min(f1, C, V_DD) < 0:
        raise ValueError("inputs must be >= 0")
    return f1 * C * V_DD**2


def predicted_recovery_energy(f: float, R_ser: float, C: float, V_1: float) -> float:
    """Two-cycle dissipation of the simple series-resistance model, 2*f*R*C^2*V^2.

    This is the linear form of log10(E) = log10(f) + log10(2*R*C^2*V^2).
    """
    if min(f, R_ser, C, V_1) < 0:
        raise ValueError("inputs must be >= 0")
    return 2.0 * f * R_ser * C**2 * V_1**2


def fit_series_resistance(f: float, E_two_cycle: float, C: float, V_1: float) -> float:
    denom = 2.0 * f * C**2 * V_1**2
    if denom == 0:
        raise ValueError("f, C and V_1 must be nonzero")
    if E_two_cycle < 0:
        raise ValueError("energy must be >= 0")
    return E_two_cycle / denom


def loglog_slope(pt_a: tuple[float, float], pt_b: tuple[float, float]) -> float:
    """Slope of log(E) against log(f) between two (f, E) points."""
    (fa, ea), (fb, eb) = pt_a, pt_b
    if min(fa, ea, fb, eb) <= 0:
        raise ValueError("frequencies and energies must be positive")
    if fa == fb:
        raise ValueError("frequencies must differ")
    return (math.log10(eb) - math.log10(ea)) / (math.log10(fb) - math.log10(fa))
