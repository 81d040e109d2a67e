"""Length-prefixed JSON wire protocol between agents and the coordinator."""

from .codec import FrameDecoder, MAX_BODY_BYTES, decode_message, encode_message
from .messages import (
    MAX_CHUNK_BYTES,
    MESSAGE_TYPES,
    PROTOCOL_VERSION,
    AckStep,
    BodyTooLarge,
    CaptureAck,
    CaptureCommand,
    Error,
    FleetCommand,
    FleetResult,
    FrameChunk,
    FrameComplete,
    FrameHeader,
    Heartbeat,
    Hello,
    HelloAck,
    LightCommand,
    LIGHT_LEVELS,
    MalformedBody,
    Message,
    PatternCommand,
    PatternRef,
    Phase,
    ProtocolError,
    TruncatedFrame,
    UnsupportedVersion,
)

__all__ = [
    "AckStep",
    "BodyTooLarge",
    "CaptureAck",
    "CaptureCommand",
    "Error",
    "FleetCommand",
    "FleetResult",
    "FrameChunk",
    "FrameComplete",
    "FrameDecoder",
    "FrameHeader",
    "Heartbeat",
    "Hello",
    "HelloAck",
    "LightCommand",
    "LIGHT_LEVELS",
    "MalformedBody",
    "MAX_BODY_BYTES",
    "MAX_CHUNK_BYTES",
    "Message",
    "MESSAGE_TYPES",
    "PatternCommand",
    "PatternRef",
    "Phase",
    "ProtocolError",
    "PROTOCOL_VERSION",
    "TruncatedFrame",
    "UnsupportedVersion",
    "decode_message",
    "encode_message",
]
