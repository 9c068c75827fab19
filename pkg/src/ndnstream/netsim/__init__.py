"""Deterministic discrete-event network emulator."""

from .engine import EventEngine
from .link import Link, ThrottleSchedule
from .scenario import Scenario, load_scenario, parse_scenario, run_scenario
from .topology import FchDirectory, NetworkSim

__all__ = [
    "EventEngine",
    "Link",
    "ThrottleSchedule",
    "Scenario",
    "load_scenario",
    "parse_scenario",
    "run_scenario",
    "FchDirectory",
    "NetworkSim",
]
