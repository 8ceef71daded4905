"""Deterministic in-process network simulator: scenarios, transport, services."""

from .scenario import (
    GroundTruth,
    Scenario,
    ScenarioError,
    ScenarioParams,
    SimCpe,
    SimHost,
    SimNet,
    SimService,
    SimSubnet,
    expected_grab_outcomes,
    generate_scenario,
    ground_truth,
    load_scenario,
    save_scenario,
)
from .services import SimServices
from .transport import SimTransport

__all__ = [
    "GroundTruth",
    "Scenario",
    "ScenarioError",
    "ScenarioParams",
    "SimCpe",
    "SimHost",
    "SimNet",
    "SimService",
    "SimSubnet",
    "SimServices",
    "SimTransport",
    "expected_grab_outcomes",
    "generate_scenario",
    "ground_truth",
    "load_scenario",
    "save_scenario",
]
