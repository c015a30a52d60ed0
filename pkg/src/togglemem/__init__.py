"""Simulator for adiabatic associative toggle memory."""

from .adiabatic import LumpedParams, SupplyKind, SupplyWaveform
from .cell import BitTestMode, BusState, CellState, TriggerParams
from .machine import EnergyModelParams, Instruction, Machine
from .transient import BusNetwork, SimConfig, SwitchSchedule, simulate

__version__ = "0.1.0"
