"""Capture-node agent: configuration, backends, staging, and the core FSM."""

from .backends import (
    BackendFailure,
    MockCaptureBackend,
    MockCommandBackend,
    ShellCaptureBackend,
    ShellCommandBackend,
)
from .config import AgentConfig, default_node
from .core import AgentCore, AgentEffects, reconnect_delay
from .staging import FrameMetadata, StagedFrame, StagingArea

__all__ = [
    "AgentConfig",
    "AgentCore",
    "AgentEffects",
    "BackendFailure",
    "FrameMetadata",
    "MockCaptureBackend",
    "MockCommandBackend",
    "ShellCaptureBackend",
    "ShellCommandBackend",
    "StagedFrame",
    "StagingArea",
    "default_node",
    "reconnect_delay",
]
