import hashlib

import pytest
from hypothesis import given, strategies as st

from scanrig.agent.backends import BackendFailure, MockCaptureBackend, MockCommandBackend
from scanrig.agent.config import AgentConfig, default_node
from scanrig.agent.core import AgentCore, reconnect_delay
from scanrig.agent.staging import StagingArea
from scanrig.protocol import (
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
    PatternCommand,
    PatternRef,
)
from scanrig.rng import SplitMix64


class FakeEffects:
    """Records everything; timers fire only when the test says so."""

    def __init__(self):
        self.connects = 0
        self.sent = []
        self.timers = []
        self.events = []

    def connect(self):
        self.connects += 1

    def send(self, msg):
        self.sent.append(msg)

    def set_timer(self, key, delay):
        self.timers.append((key, delay))

    def emit(self, kind, **fields):
        self.events.append((kind, fields))

    def pop_timer(self, tag):
        for i, (key, delay) in enumerate(self.timers):
            if key[0] == tag:
                return self.timers.pop(i)
        raise AssertionError(f"no {tag} timer pending: {self.timers}")

    def sent_of(self, cls):
        return [m for m in self.sent if isinstance(m, cls)]


def make_agent(**overrides):
    cfg = AgentConfig(node_id="n07", beam=1, slot=3, rng_seed=42,
                      frame_width=32, frame_height=24, **overrides)
    fx = FakeEffects()
    core = AgentCore(cfg, fx)
    return core, fx


def register(core, fx, now=0.0):
    core.start(now)
    core.on_connect_result(now, True)
    core.on_message(now, HelloAck(core.cfg.node_id))
    return now


# ---- reconnect policy ------------------------------------------------------

def test_jitter_golden_sequence():
    rng = SplitMix64(42)
    delays = [reconnect_delay(2.0, 0.1, rng) for _ in range(5)]
    assert delays == [
        2.096625951508729,
        1.8639641571507681,
        1.9114404521020554,
        1.937676286609455,
        1.8152120674160985,
    ]


@given(st.integers(0, (1 << 64) - 1), st.integers(1, 50))
def test_jitter_stays_in_band(seed, n):
    rng = SplitMix64(seed)
    for _ in range(n):
        d = reconnect_delay(2.0, 0.1, rng)
        assert 1.8 <= d <= 2.2


def test_connect_failure_schedules_jittered_retry():
    core, fx = make_agent()
    core.start(0.0)
    assert fx.connects == 1
    core.on_connect_result(0.0, False, "refused")
    key, delay = fx.pop_timer("reconnect")
    assert 1.8 <= delay <= 2.2
    core.on_timer(delay, key)
    assert fx.connects == 2


def test_deferred_start_waits_one_interval():
    core, fx = make_agent()
    core.start(0.0, immediate=False)
    assert fx.connects == 0
    key, delay = fx.pop_timer("reconnect")
    assert 1.8 <= delay <= 2.2
    core.on_timer(delay, key)
    assert fx.connects == 1


def test_stale_reconnect_timer_ignored_after_new_epoch():
    core, fx = make_agent()
    core.start(0.0)
    core.on_connect_result(0.0, False)
    stale_key, _ = fx.pop_timer("reconnect")
    # connection succeeds before the timer fires, then drops: epoch moves on
    core.on_connect_result(0.5, True)
    core.on_disconnect(0.6)
    core.on_timer(2.0, stale_key)
    assert fx.connects == 1  # the stale timer did not redial


# ---- handshake and heartbeats ----------------------------------------------

def test_hello_sent_on_connect():
    core, fx = make_agent()
    core.start(0.0)
    core.on_connect_result(0.0, True)
    assert fx.sent_of(Hello) == [Hello("n07", 1, 3)]


def test_heartbeats_count_up():
    core, fx = make_agent()
    register(core, fx)
    for expected_seq in range(3):
        key, delay = fx.pop_timer("heartbeat")
        assert delay == core.cfg.heartbeat_period
        core.on_timer(0.0, key)
        assert fx.sent_of(Heartbeat)[-1].seq == expected_seq


def test_heartbeat_stops_after_disconnect():
    core, fx = make_agent()
    register(core, fx)
    key, _ = fx.pop_timer("heartbeat")
    core.on_disconnect(1.0)
    core.on_timer(2.0, key)
    assert fx.sent_of(Heartbeat) == []


# ---- capture ---------------------------------------------------------------

def test_texture_capture_stages_and_acks():
    core, fx = make_agent()
    register(core, fx)
    core.on_message(1.0, CaptureCommand("s0001", "texture"))
    key, duration = fx.pop_timer("capture_done")
    frame_bytes = 32 * 24 * 3 + len(b"P6\n32 24\n255\n")
    assert duration == pytest.approx(
        core.cfg.exposure_time + frame_bytes / core.cfg.staging_write_rate
    )
    core.on_timer(1.0 + duration, key)
    acks = fx.sent_of(CaptureAck)
    assert acks[-1] == CaptureAck("s0001", "n07", "capture_texture")
    assert core.staging.get(("s0001", "texture")) is not None


def test_capture_output_is_deterministic():
    core1, fx1 = make_agent()
    core2, fx2 = make_agent()
    for core, fx in ((core1, fx1), (core2, fx2)):
        register(core, fx)
        core.on_message(0.5, CaptureCommand("s0001", "texture"))
        key, d = fx.pop_timer("capture_done")
        core.on_timer(0.5 + d, key)
    a = core1.staging.get(("s0001", "texture")).data
    b = core2.staging.get(("s0001", "texture")).data
    assert a == b
    assert a.startswith(b"P6\n32 24\n255\n")


def test_pattern_capture_differs_from_texture():
    core, fx = make_agent()
    register(core, fx)
    pat = PatternRef("dots", 7, 0.5, 32, 24)
    for cmd in (CaptureCommand("s0001", "texture"),
                CaptureCommand("s0001", "pattern", pat)):
        core.on_message(0.5, cmd)
        key, d = fx.pop_timer("capture_done")
        core.on_timer(0.5 + d, key)
    tex = core.staging.get(("s0001", "texture")).data
    pt = core.staging.get(("s0001", "pattern")).data
    assert tex != pt


def test_node_frames_are_distinct_across_fleet():
    backend = MockCaptureBackend()
    frames = {
        backend.capture("s0001", f"n{i:02d}", "texture", None, 16, 12)
        for i in range(96)
    }
    assert len(frames) == 96


def test_duplicate_capture_command_just_reacks():
    core, fx = make_agent()
    register(core, fx)
    core.on_message(1.0, CaptureCommand("s0001", "texture"))
    key, d = fx.pop_timer("capture_done")
    core.on_timer(1.0 + d, key)
    before = core.capture_backend.captures
    core.on_message(2.0, CaptureCommand("s0001", "texture"))
    assert core.capture_backend.captures == before
    assert fx.sent_of(CaptureAck)[-1].step == "capture_texture"


def test_backend_failure_nacks():
    core, fx = make_agent()
    register(core, fx)
    core.capture_backend.fail_times = 1
    core.on_message(1.0, CaptureCommand("s0001", "texture"))
    ack = fx.sent_of(CaptureAck)[-1]
    assert not ack.ok
    assert "BackendFailure" in ack.error
    assert core.staging.get(("s0001", "texture")) is None


def test_light_and_pattern_commands_ack():
    core, fx = make_agent()
    register(core, fx)
    core.on_message(1.0, LightCommand("s0001", 50))
    assert fx.sent_of(CaptureAck)[-1].step == "light"
    assert core.light_level == 50
    core.on_message(1.1, PatternCommand("s0001", PatternRef("dots", 3, 0.5, 8, 8)))
    assert fx.sent_of(CaptureAck)[-1].step == "pattern"


# ---- transfer --------------------------------------------------------------

def capture_both(core, fx, sid="s0001"):
    pat = PatternRef("dots", 7, 0.5, 32, 24)
    for cmd in (CaptureCommand(sid, "texture"), CaptureCommand(sid, "pattern", pat)):
        core.on_message(0.0, cmd)
        key, d = fx.pop_timer("capture_done")
        core.on_timer(d, key)


def run_read_timers(core, fx):
    while True:
        try:
            key, d = fx.pop_timer("read_done")
        except AssertionError:
            return
        core.on_timer(d, key)


def test_transfer_streams_header_chunks_complete():
    core, fx = make_agent(chunk_size=256)
    register(core, fx)
    capture_both(core, fx)
    key, d = fx.pop_timer("read_done")
    core.on_timer(d, key)
    headers = fx.sent_of(FrameHeader)
    assert len(headers) == 1  # serialized: pattern waits for the texture receipt
    h = headers[0]
    assert h.phase == "texture"
    chunks = fx.sent_of(FrameChunk)
    assert all(len(c.data) <= 256 for c in chunks)
    assert b"".join(c.data for c in chunks) == core.staging.get(("s0001", "texture")).data
    assert hashlib.sha256(b"".join(c.data for c in chunks)).hexdigest() == h.checksum
    done = [m for m in fx.sent_of(FrameComplete) if not m.is_receipt]
    assert done[-1].chunk_count == len(chunks)


def test_ok_receipt_unstages_and_moves_on():
    core, fx = make_agent()
    register(core, fx)
    capture_both(core, fx)
    run_read_timers(core, fx)
    core.on_message(1.0, FrameComplete("s0001", "n07", "texture", status="ok"))
    assert core.staging.get(("s0001", "texture")) is None
    run_read_timers(core, fx)
    assert fx.sent_of(FrameHeader)[-1].phase == "pattern"
    core.on_message(1.1, FrameComplete("s0001", "n07", "pattern", status="ok"))
    assert core.staging.get(("s0001", "pattern")) is None


def test_checksum_mismatch_retries_once_then_fails():
    core, fx = make_agent()
    register(core, fx)
    capture_both(core, fx)
    run_read_timers(core, fx)
    core.on_message(1.0, FrameComplete("s0001", "n07", "texture", status="checksum_mismatch"))
    run_read_timers(core, fx)
    # retried: a second header for the same phase went out
    assert [h.phase for h in fx.sent_of(FrameHeader)].count("texture") == 2
    core.on_message(1.2, FrameComplete("s0001", "n07", "texture", status="checksum_mismatch"))
    errs = fx.sent_of(Error)
    assert errs and errs[-1].code == "TransferFailed"


def test_rejected_receipt_drops_frame():
    core, fx = make_agent()
    register(core, fx)
    capture_both(core, fx)
    run_read_timers(core, fx)
    core.on_message(1.0, FrameComplete("s0001", "n07", "texture", status="rejected"))
    assert core.staging.get(("s0001", "texture")) is None
    assert ("transfer_dropped",) == tuple(
        k for k, f in fx.events if k == "transfer_dropped"
    )


def test_disconnect_requeues_active_transfer():
    core, fx = make_agent()
    register(core, fx)
    capture_both(core, fx)
    run_read_timers(core, fx)  # texture header is on the wire, no receipt yet
    n_headers = len(fx.sent_of(FrameHeader))
    core.on_disconnect(2.0)
    # reconnect and re-register: staged frames go out again, texture first
    core.on_timer(4.0, fx.pop_timer("reconnect")[0])
    core.on_connect_result(4.0, True)
    core.on_message(4.0, HelloAck("n07"))
    run_read_timers(core, fx)
    headers = fx.sent_of(FrameHeader)
    assert len(headers) == n_headers + 1
    assert headers[-1].phase == "texture"


def test_fleet_command_runs_and_reports_after_delay():
    core, fx = make_agent()
    register(core, fx)
    core.on_message(1.0, FleetCommand("j0001", "n07", "uptime", 10.0))
    assert core.command_backend.history == ["uptime"]
    key, delay = fx.pop_timer("fleet_done")
    assert delay == core.cfg.fleet_exec_time
    core.on_timer(1.0 + delay, key)
    results = fx.sent_of(FleetResult)
    assert results == [FleetResult("j0001", "n07", 0, "n07: uptime", "")]


def test_fleet_failure_exit_code():
    core, fx = make_agent()
    register(core, fx)
    core.command_backend.fail_commands.add("reboot")
    core.on_message(1.0, FleetCommand("j0002", "n07", "reboot", 10.0))
    key, delay = fx.pop_timer("fleet_done")
    core.on_timer(1.0 + delay, key)
    assert fx.sent_of(FleetResult)[-1].exit_code != 0


# ---- staging ---------------------------------------------------------------

def test_staging_capture_order():
    area = StagingArea()
    from scanrig.agent.staging import FrameMetadata, StagedFrame

    def put(sid, phase, t):
        meta = FrameMetadata(sid, "n0", phase, 1, 1, 3, "00", captured_at=t)
        area.put(StagedFrame(meta, b"abc"))

    put("s2", "texture", 5.0)
    put("s1", "texture", 1.0)
    put("s1", "pattern", 2.0)
    assert area.keys_in_capture_order() == [
        ("s1", "texture"), ("s1", "pattern"), ("s2", "texture")
    ]
    area.remove(("s1", "texture"))
    assert area.keys_in_capture_order() == [("s1", "pattern"), ("s2", "texture")]


def test_default_node_layout():
    assert default_node(0) == ("n00", 0, 0)
    assert default_node(5) == ("n05", 1, 1)
    assert default_node(95) == ("n95", 23, 3)
