"""Deterministic discrete-event simulator for a four-level disaster monitoring network."""

from dmcis.kernels import BACKEND
from dmcis.scenario import (
    MissingField,
    ParseError,
    Scenario,
    UnknownKey,
    dump_scenario,
    load_scenario,
    parse_scenario,
    validate_scenario,
)
from dmcis.world import RunSummary, Simulation, run_scenario

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "MissingField",
    "ParseError",
    "RunSummary",
    "Scenario",
    "Simulation",
    "UnknownKey",
    "dump_scenario",
    "load_scenario",
    "parse_scenario",
    "run_scenario",
    "validate_scenario",
]
