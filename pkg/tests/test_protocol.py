import json

import pytest
from hypothesis import given, settings, strategies as st

from scanrig.protocol import (
    BodyTooLarge,
    CaptureAck,
    CaptureCommand,
    Error,
    FleetCommand,
    FleetResult,
    FrameChunk,
    FrameComplete,
    FrameDecoder,
    FrameHeader,
    Heartbeat,
    Hello,
    HelloAck,
    LightCommand,
    MalformedBody,
    PatternCommand,
    PatternRef,
    ProtocolError,
    TruncatedFrame,
    UnsupportedVersion,
    decode_message,
    encode_message,
)
from scanrig.protocol.codec import MAX_BODY_BYTES

# Frozen on first implementation; any change to the wire layout breaks this.
HELLO_FRAME_HEX = (
    "0000004a7b226b696e64223a2248656c6c6f222c227061796c6f6164223a7b2262"
    "65616d223a302c226e6f64655f6964223a226e3031222c22736c6f74223a307d2c"
    "2276657273696f6e223a317d"
)

SAMPLES = [
    Hello("n01", 0, 0),
    HelloAck("n01", 1.0),
    Heartbeat("n01", 17),
    LightCommand("s0001", 50),
    CaptureCommand("s0001", "texture"),
    CaptureCommand("s0001", "pattern", PatternRef("dots", 7, 0.5, 1280, 720)),
    PatternCommand("s0001", PatternRef("black", 0, 0.0, 8, 8)),
    CaptureAck("s0001", "n01", "light"),
    CaptureAck("s0001", "n01", "capture_pattern", ok=False, error="sensor timeout"),
    FrameHeader("s0001", "n01", "texture", 123456, "ab" * 32, 1920, 1080, 1.25),
    FrameChunk("s0001", "n01", "texture", 0, b"\x00\x01\xfeP6 binary"),
    FrameComplete("s0001", "n01", "texture", chunk_count=3),
    FrameComplete("s0001", "n01", "texture", status="ok"),
    FleetCommand("j0001", "n01", "uptime", 10.0),
    FleetResult("j0001", "n01", 0, "up 3 days", ""),
    Error("SlotConflict", "beam 0 slot 0 already held by n00"),
]


def test_golden_hello_frame():
    assert encode_message(Hello("n01", 0, 0)).hex() == HELLO_FRAME_HEX


def test_golden_hello_decodes_back():
    msg = decode_message(bytes.fromhex(HELLO_FRAME_HEX))
    assert msg == Hello("n01", 0, 0)


def test_frame_layout():
    data = encode_message(Heartbeat("n05", 3))
    length = int.from_bytes(data[:4], "big")
    assert length == len(data) - 4
    body = json.loads(data[4:])
    assert set(body) == {"kind", "payload", "version"}
    assert body["version"] == 1
    assert body["kind"] == "Heartbeat"
    # canonical form: sorted keys, no whitespace
    assert data[4:] == json.dumps(body, sort_keys=True, separators=(",", ":")).encode()


@pytest.mark.parametrize("msg", SAMPLES, ids=lambda m: type(m).__name__)
def test_round_trip_each_kind(msg):
    assert decode_message(encode_message(msg)) == msg


def test_concatenated_frames_decode_in_order():
    blob = b"".join(encode_message(m) for m in SAMPLES)
    dec = FrameDecoder()
    assert dec.feed(blob) == SAMPLES


def test_byte_at_a_time_feed():
    blob = b"".join(encode_message(m) for m in SAMPLES[:6])
    dec = FrameDecoder()
    out = []
    for i in range(len(blob)):
        out.extend(dec.feed(blob[i:i + 1]))
    assert out == SAMPLES[:6]


def test_split_at_every_boundary():
    blob = encode_message(FrameChunk("s1", "n1", "pattern", 2, bytes(range(256))))
    for cut in range(1, len(blob)):
        dec = FrameDecoder()
        got = dec.feed(blob[:cut]) + dec.feed(blob[cut:])
        assert got == [FrameChunk("s1", "n1", "pattern", 2, bytes(range(256)))]


# ---- typed failures --------------------------------------------------------

def test_unsupported_version():
    body = json.dumps({"kind": "Heartbeat", "payload": {"node_id": "n1", "seq": 0},
                       "version": 2}, sort_keys=True, separators=(",", ":")).encode()
    data = len(body).to_bytes(4, "big") + body
    with pytest.raises(UnsupportedVersion):
        decode_message(data)


def test_truncated_frame():
    data = encode_message(Hello("n01", 0, 0))
    with pytest.raises(TruncatedFrame):
        decode_message(data[:-1])
    with pytest.raises(TruncatedFrame):
        decode_message(data[:3])


def test_body_too_large_prefix():
    data = (MAX_BODY_BYTES + 1).to_bytes(4, "big") + b"x"
    with pytest.raises(BodyTooLarge):
        decode_message(data)


def test_oversized_chunk_rejected_on_encode():
    with pytest.raises(ValueError):
        FrameChunk("s1", "n1", "texture", 0, b"\x00" * 65537)


@pytest.mark.parametrize(
    "body",
    [
        b"not json at all",
        b"[]",
        b'{"kind":"Nope","payload":{},"version":1}',
        b'{"kind":"Hello","payload":{"node_id":"n1"},"version":1}',  # missing fields
        b'{"kind":"Hello","payload":{"node_id":"n1","beam":"x","slot":0},"version":1}',
        b'{"kind":"Hello","payload":{"node_id":"n1","beam":0,"slot":0,"extra":1},"version":1}',
        b'{"payload":{},"version":1}',
        b'{"kind":"FrameChunk","payload":{"session_id":"s","node_id":"n","phase":"texture","index":0,"data":"%%%"},"version":1}',
        b'{"kind":"LightCommand","payload":{"session_id":"s","level":75},"version":1}',
    ],
    ids=["garbage", "array", "unknown-kind", "missing-field", "bad-type",
         "extra-field", "no-kind", "bad-base64", "bad-level"],
)
def test_malformed_bodies(body):
    data = len(body).to_bytes(4, "big") + body
    with pytest.raises(MalformedBody):
        decode_message(data)


def test_trailing_bytes_rejected():
    good = encode_message(Hello("n01", 0, 0))
    body = good[4:] + b"JUNK"
    data = len(body).to_bytes(4, "big") + body
    with pytest.raises(MalformedBody):
        decode_message(data)


def test_decoder_survives_error_and_continues():
    bad = len(b"bogus").to_bytes(4, "big") + b"bogus"
    dec = FrameDecoder()
    with pytest.raises(MalformedBody):
        dec.feed(bad)
    # the broken frame is consumed; the stream stays usable
    assert dec.feed(encode_message(Heartbeat("n1", 1))) == [Heartbeat("n1", 1)]


# ---- property round-trips --------------------------------------------------

_ident = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), min_size=0, max_size=24
)

_pattern = st.builds(
    PatternRef,
    kind=st.sampled_from(["dots", "black"]),
    seed=st.integers(0, (1 << 64) - 1),
    density=st.floats(0.0, 1.0, allow_nan=False),
    width=st.integers(1, 4096),
    height=st.integers(1, 4096),
)

_messages = st.one_of(
    st.builds(Hello, node_id=_ident, beam=st.integers(0, 30), slot=st.integers(0, 3)),
    st.builds(Heartbeat, node_id=_ident, seq=st.integers(0, 1 << 31)),
    st.builds(LightCommand, session_id=_ident, level=st.sampled_from([0, 50, 100])),
    st.builds(PatternCommand, session_id=_ident, pattern=_pattern),
    st.builds(
        CaptureAck,
        session_id=_ident,
        node_id=_ident,
        step=st.sampled_from(["light", "pattern", "capture_texture", "capture_pattern"]),
        ok=st.booleans(),
        error=_ident,
    ),
    st.builds(
        FrameChunk,
        session_id=_ident,
        node_id=_ident,
        phase=st.sampled_from(["texture", "pattern"]),
        index=st.integers(0, 1 << 20),
        data=st.binary(max_size=2048),
    ),
    st.builds(
        FrameHeader,
        session_id=_ident,
        node_id=_ident,
        phase=st.sampled_from(["texture", "pattern"]),
        byte_size=st.integers(0, 1 << 40),
        checksum=st.text("0123456789abcdef", min_size=64, max_size=64),
        width=st.integers(0, 8192),
        height=st.integers(0, 8192),
        captured_at=st.floats(0, 1e9, allow_nan=False),
    ),
    st.builds(
        FleetResult,
        job_id=_ident,
        node_id=_ident,
        exit_code=st.integers(-255, 255),
        output=_ident,
        error=_ident,
    ),
)


@given(_messages)
@settings(max_examples=400)
def test_property_round_trip(msg):
    assert decode_message(encode_message(msg)) == msg


@given(st.binary(max_size=64))
@settings(max_examples=400)
def test_fuzz_raises_only_protocol_errors(data):
    dec = FrameDecoder()
    try:
        dec.feed(data)
    except ProtocolError:
        pass
