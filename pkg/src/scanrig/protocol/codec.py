"""Framing and canonical JSON codec.

Frame layout: 4-byte big-endian body length, then the body. The body is JSON
with sorted keys and no whitespace, encoding {"version", "kind", "payload"}.
Binary chunk data travels base64-encoded inside the JSON; limits apply to the
decoded payload, not its base64 form. Body size is capped at 2**24 bytes.
"""

from __future__ import annotations

import base64
import binascii
import dataclasses
import json
import struct

from .messages import (
    MAX_CHUNK_BYTES,
    MESSAGE_TYPES,
    PROTOCOL_VERSION,
    BodyTooLarge,
    FrameChunk,
    MalformedBody,
    Message,
    PatternRef,
    TruncatedFrame,
    UnsupportedVersion,
)

MAX_BODY_BYTES = 1 << 24
_PREFIX = struct.Struct(">I")


def _payload_dict(msg: Message) -> dict:
    out = {}
    for f in dataclasses.fields(msg):
        value = getattr(msg, f.name)
        if isinstance(value, bytes):
            value = base64.b64encode(value).decode("ascii")
        elif isinstance(value, PatternRef):
            value = dataclasses.asdict(value)
        out[f.name] = value
    return out


def encode_message(msg: Message) -> bytes:
    """Serialize one message to a complete frame."""
    kind = type(msg).__name__
    if kind not in MESSAGE_TYPES:
        raise TypeError(f"not a protocol message: {type(msg)!r}")
    body = json.dumps(
        {"kind": kind, "payload": _payload_dict(msg), "version": PROTOCOL_VERSION},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    if len(body) > MAX_BODY_BYTES:
        raise BodyTooLarge(f"body of {len(body)} bytes exceeds {MAX_BODY_BYTES}")
    return _PREFIX.pack(len(body)) + body


def _coerce(cls: type, name: str, ftype: str, value):
    """Check a decoded payload field against the dataclass annotation."""
    if ftype == "bytes":
        if not isinstance(value, str):
            raise MalformedBody(f"{cls.__name__}.{name}: expected base64 string")
        try:
            raw = base64.b64decode(value, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise MalformedBody(f"{cls.__name__}.{name}: bad base64: {exc}") from exc
        if len(raw) > MAX_CHUNK_BYTES:
            raise MalformedBody(f"{cls.__name__}.{name}: chunk exceeds {MAX_CHUNK_BYTES} bytes")
        return raw
    if ftype == "PatternRef | None":
        if value is None:
            return None
        ftype = "PatternRef"
    if ftype == "PatternRef":
        if not isinstance(value, dict):
            raise MalformedBody(f"{cls.__name__}.{name}: expected object")
        return _build(PatternRef, value)
    if ftype == "str":
        if not isinstance(value, str):
            raise MalformedBody(f"{cls.__name__}.{name}: expected string")
        return value
    if ftype == "int":
        if not isinstance(value, int) or isinstance(value, bool):
            raise MalformedBody(f"{cls.__name__}.{name}: expected integer")
        return value
    if ftype == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise MalformedBody(f"{cls.__name__}.{name}: expected number")
        return float(value)
    if ftype == "bool":
        if not isinstance(value, bool):
            raise MalformedBody(f"{cls.__name__}.{name}: expected boolean")
        return value
    raise MalformedBody(f"{cls.__name__}.{name}: unsupported field type {ftype}")


def _build(cls: type, payload: dict):
    known = {f.name: f for f in dataclasses.fields(cls)}
    extra = set(payload) - set(known)
    if extra:
        raise MalformedBody(f"{cls.__name__}: unknown fields {sorted(extra)}")
    kwargs = {}
    for name, f in known.items():
        if name in payload:
            kwargs[name] = _coerce(cls, name, f.type, payload[name])
        elif f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
            raise MalformedBody(f"{cls.__name__}: missing field {name!r}")
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise MalformedBody(f"{cls.__name__}: {exc}") from exc


def decode_body(body: bytes) -> Message:
    """Decode one frame body (without the length prefix)."""
    if len(body) > MAX_BODY_BYTES:
        raise BodyTooLarge(f"body of {len(body)} bytes exceeds {MAX_BODY_BYTES}")
    try:
        obj = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedBody(f"body is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedBody("body must be a JSON object")
    extra = set(obj) - {"version", "kind", "payload"}
    if extra:
        raise MalformedBody(f"unknown envelope fields {sorted(extra)}")
    version = obj.get("version")
    if version != PROTOCOL_VERSION:
        raise UnsupportedVersion(f"version {version!r}, expected {PROTOCOL_VERSION}")
    kind = obj.get("kind")
    cls = MESSAGE_TYPES.get(kind) if isinstance(kind, str) else None
    if cls is None:
        raise MalformedBody(f"unknown message kind {kind!r}")
    payload = obj.get("payload")
    if not isinstance(payload, dict):
        raise MalformedBody("payload must be a JSON object")
    return _build(cls, payload)


def decode_message(data: bytes) -> Message:
    """Decode exactly one complete frame. Trailing bytes are an error."""
    if len(data) < _PREFIX.size:
        raise TruncatedFrame(f"{len(data)} bytes, need at least {_PREFIX.size}")
    (length,) = _PREFIX.unpack_from(data)
    if length > MAX_BODY_BYTES:
        raise BodyTooLarge(f"declared body of {length} bytes exceeds {MAX_BODY_BYTES}")
    body = data[_PREFIX.size :]
    if len(body) < length:
        raise TruncatedFrame(f"body has {len(body)} of {length} bytes")
    if len(body) > length:
        raise MalformedBody(f"{len(body) - length} trailing bytes after frame")
    return decode_body(body)


class FrameDecoder:
    """Incremental decoder for a byte stream of concatenated frames.

    feed() buffers arbitrary splits and returns every message completed so
    far; partial frames wait for more input. Errors raise and poison the
    stream (the caller should drop the connection).
    """

    def __init__(self):
        self._buf = bytearray()

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)

    def feed(self, data: bytes) -> list[Message]:
        self._buf.extend(data)
        out = []
        while True:
            if len(self._buf) < _PREFIX.size:
                break
            (length,) = _PREFIX.unpack_from(self._buf)
            if length > MAX_BODY_BYTES:
                raise BodyTooLarge(f"declared body of {length} bytes exceeds {MAX_BODY_BYTES}")
            end = _PREFIX.size + length
            if len(self._buf) < end:
                break
            body = bytes(self._buf[_PREFIX.size : end])
            del self._buf[:end]
            out.append(decode_body(body))
        return out
