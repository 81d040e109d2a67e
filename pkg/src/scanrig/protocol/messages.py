"""Wire message types for the rig acquisition protocol.

Thirteen message kinds cover registration, liveness, session commands,
acknowledgements, frame transfer, and fleet maintenance. Instances are plain
frozen dataclasses; the codec in scanrig.protocol.codec maps them to frames.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

PROTOCOL_VERSION = 1
MAX_CHUNK_BYTES = 65536


class Phase(str, enum.Enum):
    """Capture phase within a session. Texture always precedes pattern."""

    TEXTURE = "texture"
    PATTERN = "pattern"


class AckStep(str, enum.Enum):
    """What a CaptureAck acknowledges (the ack kind is shared by all session
    commands; the step field tells them apart)."""

    LIGHT = "light"
    PATTERN = "pattern"
    CAPTURE_TEXTURE = "capture_texture"
    CAPTURE_PATTERN = "capture_pattern"


class ProtocolError(Exception):
    """Base for every decoding failure."""


class BodyTooLarge(ProtocolError):
    pass


class TruncatedFrame(ProtocolError):
    pass


class MalformedBody(ProtocolError):
    pass


class UnsupportedVersion(ProtocolError):
    pass


_PHASES = {Phase.TEXTURE.value, Phase.PATTERN.value}
LIGHT_LEVELS = (0, 50, 100)


def _check_phase(phase: str) -> None:
    if phase not in _PHASES:
        raise ValueError(f"phase must be one of {sorted(_PHASES)}, got {phase!r}")


@dataclass(frozen=True)
class PatternRef:
    """Projector pattern parameters carried inside commands."""

    kind: str = "dots"  # "dots" or "black"
    seed: int = 0
    density: float = 0.5
    width: int = 1920
    height: int = 1080

    def __post_init__(self):
        if self.kind not in ("dots", "black"):
            raise ValueError(f"pattern kind must be dots or black, got {self.kind!r}")
        if not 0.0 <= self.density <= 1.0:
            raise ValueError(f"density must be within [0, 1], got {self.density}")
        if self.width < 1 or self.height < 1:
            raise ValueError("pattern dimensions must be positive")
        if self.seed < 0:
            raise ValueError("pattern seed must be non-negative")


@dataclass(frozen=True)
class Hello:
    """Agent registration. Sent once per connection, before anything else."""

    node_id: str
    beam: int
    slot: int


@dataclass(frozen=True)
class HelloAck:
    node_id: str
    heartbeat_period: float = 1.0


@dataclass(frozen=True)
class Heartbeat:
    node_id: str
    seq: int


@dataclass(frozen=True)
class CaptureCommand:
    """Order one exposure. pattern must be present iff phase is pattern."""

    session_id: str
    phase: str
    pattern: PatternRef | None = None

    def __post_init__(self):
        _check_phase(self.phase)
        if self.phase == Phase.PATTERN.value and self.pattern is None:
            raise ValueError("pattern capture requires a pattern reference")
        if self.phase == Phase.TEXTURE.value and self.pattern is not None:
            raise ValueError("texture capture must not carry a pattern")


@dataclass(frozen=True)
class LightCommand:
    session_id: str
    level: int  # 0, 50 or 100

    def __post_init__(self):
        if self.level not in LIGHT_LEVELS:
            raise ValueError(f"level must be one of {LIGHT_LEVELS}, got {self.level}")


@dataclass(frozen=True)
class PatternCommand:
    session_id: str
    pattern: PatternRef


@dataclass(frozen=True)
class CaptureAck:
    """Per-node acknowledgement of a session command (see AckStep)."""

    session_id: str
    node_id: str
    step: str
    ok: bool = True
    error: str = ""

    def __post_init__(self):
        if self.step not in {s.value for s in AckStep}:
            raise ValueError(f"unknown ack step {self.step!r}")


@dataclass(frozen=True)
class FrameHeader:
    session_id: str
    node_id: str
    phase: str
    byte_size: int
    checksum: str  # sha256 hex of the full frame
    width: int = 0
    height: int = 0
    captured_at: float = 0.0

    def __post_init__(self):
        _check_phase(self.phase)
        if self.byte_size < 0:
            raise ValueError("byte_size must be non-negative")


@dataclass(frozen=True)
class FrameChunk:
    session_id: str
    node_id: str
    phase: str
    index: int
    data: bytes

    def __post_init__(self):
        _check_phase(self.phase)
        if self.index < 0:
            raise ValueError("chunk index must be non-negative")
        if len(self.data) > MAX_CHUNK_BYTES:
            raise ValueError(f"chunk of {len(self.data)} bytes exceeds {MAX_CHUNK_BYTES}")


@dataclass(frozen=True)
class FrameComplete:
    """Agent side: transfer finished. Coordinator side: receipt with status."""

    session_id: str
    node_id: str
    phase: str
    chunk_count: int = 0
    status: str = ""  # receipts only: ok, duplicate, checksum_mismatch, rejected

    def __post_init__(self):
        _check_phase(self.phase)

    @property
    def is_receipt(self) -> bool:
        return self.status != ""


@dataclass(frozen=True)
class FleetCommand:
    job_id: str
    node_id: str
    command: str
    timeout: float = 10.0


@dataclass(frozen=True)
class FleetResult:
    job_id: str
    node_id: str
    exit_code: int
    output: str = ""
    error: str = ""


@dataclass(frozen=True)
class Error:
    code: str
    detail: str = ""
    session_id: str = ""
    node_id: str = ""


Message = (
    Hello
    | HelloAck
    | Heartbeat
    | CaptureCommand
    | LightCommand
    | PatternCommand
    | CaptureAck
    | FrameHeader
    | FrameChunk
    | FrameComplete
    | FleetCommand
    | FleetResult
    | Error
)

MESSAGE_TYPES: dict[str, type] = {
    cls.__name__: cls
    for cls in (
        Hello,
        HelloAck,
        Heartbeat,
        CaptureCommand,
        LightCommand,
        PatternCommand,
        CaptureAck,
        FrameHeader,
        FrameChunk,
        FrameComplete,
        FleetCommand,
        FleetResult,
        Error,
    )
}

KIND_OF = {cls: name for name, cls in MESSAGE_TYPES.items()}
