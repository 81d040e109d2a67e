"""Deterministic virtual-time simulation of the full rig."""

from .clock import EventQueue
from .cluster import FAULT_KINDS, ClusterSim
from .network import SimNetwork, transfer_delay, wire_size
from .report import SimReport
from .scenario import ScenarioError, build_sim, load_scenario

__all__ = [
    "ClusterSim",
    "EventQueue",
    "FAULT_KINDS",
    "ScenarioError",
    "SimNetwork",
    "SimReport",
    "build_sim",
    "load_scenario",
    "transfer_delay",
    "wire_size",
]
