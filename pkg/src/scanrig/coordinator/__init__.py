"""Coordinator: node registry, capture sessions, frame store, fleet jobs."""

from .core import CoordinatorConfig, CoordinatorCore, CoordinatorEffects, SessionBusy
from .fleet import EmptySelection, FleetJob, FleetRejected, FleetRow, parse_targets
from .registry import NodeRecord, NodeState, Registry, SlotConflict, UnknownNode
from .session import (
    AckReceived,
    CaptureSession,
    Event,
    FrameReceived,
    IllegalEvent,
    NodeLost,
    SessionReport,
    SessionState,
    StartSession,
    Timeout,
    session_report,
    session_step,
)
from .store import CaptureStore, StoredFrame

__all__ = [
    "AckReceived",
    "CaptureSession",
    "CaptureStore",
    "CoordinatorConfig",
    "CoordinatorCore",
    "CoordinatorEffects",
    "EmptySelection",
    "Event",
    "FleetJob",
    "FleetRejected",
    "FleetRow",
    "FrameReceived",
    "IllegalEvent",
    "NodeLost",
    "NodeRecord",
    "NodeState",
    "Registry",
    "SessionBusy",
    "SessionReport",
    "SessionState",
    "SlotConflict",
    "StartSession",
    "StoredFrame",
    "Timeout",
    "UnknownNode",
    "parse_targets",
    "session_report",
    "session_step",
]
