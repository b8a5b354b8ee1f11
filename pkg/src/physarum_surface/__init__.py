"""Agent model of a plasmodium growing over a water surface with floating bodies."""
from .errors import (
    ConfigurationError, GraphStoreError, InputError, ParseError, PhysarumError, QueryError,
    ScenarioError, TortuosityError, ValidationError,
)
from .scenario import BUILTINS, RunRecord, Scenario, Simulation, builtin, run
from .scenario.config import load_scenario
from .scenario.output import write_outputs

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "GraphStoreError", "InputError", "ParseError", "PhysarumError",
    "QueryError", "ScenarioError", "TortuosityError", "ValidationError",
    "BUILTINS", "RunRecord", "Scenario", "Simulation", "builtin", "run",
    "load_scenario", "write_outputs",
]
