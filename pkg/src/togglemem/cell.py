"""Behavioral conditional-toggle cell and the matchline driver gate.

The trigger network is reduced to the consequences that matter at word level:
a hard bus-voltage threshold, a pulse-width window, and a fixed bus droop for
every successful toggle.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import NamedTuple

from .adiabatic import predicted_recovery_energy

# Comparator resolution; keeps accumulated float droop from landing a hair
# above the threshold.
COMPARATOR_RESOLUTION = 1e-9

DEFAULT_R_SER = 5e3
DEFAULT_FREQUENCY = 10e6


class BitTestMode(Enum):
    IRREVERSIBLE = "irreversible"
    RECOVERY = "recovery"


@dataclass(frozen=True)
class CellState:
    bit: bool


@dataclass(frozen=True)
class BusState:
    voltage: float
    capacitance: float = 1e-12
    v_dd: float = 1.0

    def __post_init__(self):
        if self.capacitance <= 0:
            raise ValueError("capacitance must be > 0")
        if not 0 <= self.voltage <= self.v_dd:
            raise ValueError(f"bus voltage {self.voltage} outside [0, {self.v_dd}]")


@dataclass(frozen=True)
class TriggerParams:
    threshold_fraction: float = 0.70
    min_pulse: float = 2e-9
    max_pulse: float = 20e-9
    # Placeholder: the droop per trigger pulse has not been calibrated.
    droop_per_toggle: float = 0.05

    def __post_init__(self):
        if not 0 < self.threshold_fraction < 1:
            raise ValueError("threshold_fraction must lie in (0, 1)")
        if not 0 < self.min_pulse < self.max_pulse:
            raise ValueError("need 0 < min_pulse < max_pulse")
        if self.droop_per_toggle < 0:
            raise ValueError("droop_per_toggle must be >= 0")


@dataclass(frozen=True)
class ControlState:
    """Broadcast control lines; True means asserted (the physical pulses are active low)."""

    v_fm: bool = False
    v_pre: bool = False
    v_to: bool = False


class ToggleReason(Enum):
    TOGGLED = "toggled"
    BUS_BELOW_THRESHOLD = "bus_below_threshold"
    PULSE_TOO_SHORT = "pulse_too_short"
    PULSE_TOO_LONG = "pulse_too_long"


class ToggleResult(NamedTuple):
    cell: CellState
    bus: BusState
    toggled: bool
    reason: ToggleReason


def matchline_gate(v_fm: bool, v_pre: bool, v11: bool) -> bool:
    """Whether the P-switch driving the matchline conducts.

    The gate node is ``not v_fm or (not v_pre and v11)``; the switch is active
    low, so it conducts when that node is false.
    """
    gate = (not v_fm) or ((not v_pre) and v11)
    return not gate


def bit_test(
    cell: CellState,
    bus: BusState,
    mode: BitTestMode,
    frequency: float = DEFAULT_FREQUENCY,
    r_ser: float = DEFAULT_R_SER,
) -> tuple[BusState, float]:
    """Test one stored bit against the matchline.

    A true bit leaves the bus alone. A false bit either dumps the bus to
    ground (``IRREVERSIBLE``, losing all of its stored energy) or lets the
    supply walk it back to half V_DD (``RECOVERY``, losing the two-cycle
    series-resistance estimate at ``frequency``).
    """
    if cell.bit:
        return bus, 0.0
    if mode is BitTestMode.IRREVERSIBLE:
        lost = 0.5 * bus.capacitance * bus.voltage**2
        return replace(bus, voltage=0.0), lost
    lost = predicted_recovery_energy(frequency, r_ser, bus.capacitance, bus.v_dd)
    return replace(bus, voltage=0.5 * bus.v_dd), lost


def conditional_toggle(
    cell: CellState, bus: BusState, pulse_width: float, p: TriggerParams = TriggerParams()
) -> ToggleResult:
    if pulse_width <= 0:
        raise ValueError("pulse_width must be > 0")
    if pulse_width < p.min_pulse:
        return ToggleResult(cell, bus, False, ToggleReason.PULSE_TOO_SHORT)
    if pulse_width > p.max_pulse:
        return ToggleResult(cell, bus, False, ToggleReason.PULSE_TOO_LONG)
    # The trigger fires only when the bus is strictly above the threshold.
    if bus.voltage - p.threshold_fraction * bus.v_dd <= COMPARATOR_RESOLUTION:
        return ToggleResult(cell, bus, False, ToggleReason.BUS_BELOW_THRESHOLD)
    drooped = max(bus.voltage - p.droop_per_toggle, 0.0)
    return ToggleResult(
        CellState(not cell.bit), replace(bus, voltage=drooped), True, ToggleReason.TOGGLED
    )


def trigger_margin(r_kohm: float, w_um: float) -> tuple[float, bool]:
    """Resistor-width product of the trigger network; must exceed 4 to toggle."""
    if r_kohm <= 0 or w_um <= 0:
        raise ValueError("resistance and width must be positive")
    product = r_kohm * w_um
    return product, product > 4


def toggle_until_stuck(
    cell: CellState, bus: BusState, pulse_width: float, p: TriggerParams = TriggerParams(),
    limit: int = 10_000,
) -> tuple[CellState, BusState, int]:
    """Fire trigger pulses until one fails; returns the final state and toggle count."""
    count = 0
    while count < limit:
        cell, bus, toggled, _ = conditional_toggle(cell, bus, pulse_width, p)
        if not toggled:
            break
        count += 1
    return cell, bus, count
