"""Scenario definition, run loop, builtins and file I/O."""
from .model import BodySpec, FieldParams, MechanicsParams, Scenario, Schedule, SeedSpec, TubeParams
from .builtins import BUILTINS, builtin
from .engine import RunRecord, Simulation, run

__all__ = [
    "BodySpec", "FieldParams", "MechanicsParams", "Scenario", "Schedule", "SeedSpec",
    "TubeParams", "BUILTINS", "builtin", "RunRecord", "Simulation", "run",
]
