"""Sans-IO agent state machine.

AgentCore never touches sockets or clocks. A host (the deterministic
simulator or the asyncio runtime) feeds it connection results, decoded
messages, and timer expirations, and it reacts through the AgentEffects
interface. Both hosts therefore run the identical control flow; only the
transport differs.
"""

from __future__ import annotations

import hashlib
from typing import Protocol

from ..protocol.messages import (
    AckStep,
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
    Message,
    PatternCommand,
    PatternRef,
    Phase,
)
from ..rng import SplitMix64
from .backends import BackendFailure, MockCaptureBackend, MockCommandBackend
from .config import AgentConfig
from .staging import FrameMetadata, StagedFrame, StagingArea

MAX_TRANSFER_RETRIES = 1  # one retransmit after a checksum mismatch


class AgentEffects(Protocol):
    def connect(self) -> None:
        """Begin dialing the coordinator; report via on_connect_result."""

    def send(self, msg: Message) -> None:
        """Queue a message on the current connection."""

    def set_timer(self, key: tuple, delay: float) -> None:
        """Arrange on_timer(now, key) after delay seconds."""

    def emit(self, kind: str, **fields) -> None:
        """Append to the node's event log."""


def reconnect_delay(base: float, jitter_fraction: float, rng: SplitMix64) -> float:
    """Next wait before redialing: base spread by a symmetric jitter draw.

    Constant policy, one rng draw per attempt; the delay never leaves
    [base*(1-j), base*(1+j)] regardless of attempt count.
    """
    return base * (1.0 + rng.next_symmetric(jitter_fraction))


class AgentCore:
    def __init__(
        self,
        cfg: AgentConfig,
        effects: AgentEffects,
        capture_backend=None,
        command_backend=None,
    ):
        self.cfg = cfg
        self.effects = effects
        self.capture_backend = capture_backend or MockCaptureBackend()
        self.command_backend = command_backend or MockCommandBackend(cfg.node_id)
        self.rng = SplitMix64(cfg.rng_seed)
        self.connected = False
        self.registered = False
        self.epoch = 0  # bumped on disconnect; stale timers check it
        self.attempt = 0
        self.hb_seq = 0
        self.staging = StagingArea()
        self.capture_jobs: dict[tuple[str, str], tuple[FrameMetadata, bytes, str | None]] = {}
        self.transfer_queue: list[tuple[str, str]] = []
        self.active_transfer: tuple[str, str] | None = None
        self.transfer_retries: dict[tuple[str, str], int] = {}
        self.light_level = 0
        self.projected: PatternRef | None = None
        self.pending_fleet: dict[str, FleetResult] = {}

    # -- lifecycle ---------------------------------------------------------

    def start(self, now: float, immediate: bool = True) -> None:
        """Boot the agent. immediate=False waits one reconnect interval first
        (a restarted node coming back on the regular cadence)."""
        self.effects.emit("agent_started", node=self.cfg.node_id)
        if immediate:
            self._attempt_connect(now)
        else:
            self._schedule_reconnect(now)

    def _attempt_connect(self, now: float) -> None:
        self.effects.emit("connect_attempt", node=self.cfg.node_id, attempt=self.attempt)
        self.effects.connect()

    def on_connect_result(self, now: float, ok: bool, reason: str = "") -> None:
        if ok:
            self.connected = True
            self.effects.emit("connected", node=self.cfg.node_id)
            self.effects.send(Hello(self.cfg.node_id, self.cfg.beam, self.cfg.slot))
        else:
            self.effects.emit("connect_failed", node=self.cfg.node_id, reason=reason)
            self._schedule_reconnect(now)

    def _schedule_reconnect(self, now: float) -> None:
        delay = reconnect_delay(self.cfg.reconnect_base, self.cfg.reconnect_jitter, self.rng)
        self.attempt += 1
        self.effects.emit(
            "reconnect_wait", node=self.cfg.node_id, delay=delay, attempt=self.attempt
        )
        self.effects.set_timer(("reconnect", self.epoch), delay)

    def on_disconnect(self, now: float, reason: str = "") -> None:
        if not self.connected:
            return
        self.connected = False
        self.registered = False
        self.epoch += 1
        if self.active_transfer is not None:
            # frame stays staged; it restarts from the header after re-registration
            self.transfer_queue.insert(0, self.active_transfer)
            self.active_transfer = None
        self.effects.emit("disconnected", node=self.cfg.node_id, reason=reason)
        self._schedule_reconnect(now)

    # -- timers ------------------------------------------------------------

    def on_timer(self, now: float, key: tuple) -> None:
        tag = key[0]
        if tag == "reconnect":
            if not self.connected and key[1] == self.epoch:
                self._attempt_connect(now)
        elif tag == "heartbeat":
            if self.connected and self.registered and key[1] == self.epoch:
                self.effects.send(Heartbeat(self.cfg.node_id, self.hb_seq))
                self.hb_seq += 1
                self.effects.set_timer(("heartbeat", self.epoch), self.cfg.heartbeat_period)
        elif tag == "capture_done":
            self._finish_capture(now, (key[1], key[2]))
        elif tag == "read_done":
            if key[3] == self.epoch:
                self._stream_frame(now, (key[1], key[2]))
        elif tag == "fleet_done":
            result = self.pending_fleet.pop(key[1], None)
            if result is not None and self.connected:
                self.effects.send(result)

    # -- inbound messages --------------------------------------------------

    def on_message(self, now: float, msg: Message) -> None:
        if isinstance(msg, HelloAck):
            self._on_registered(now)
        elif isinstance(msg, CaptureCommand):
            self._on_capture_command(now, msg)
        elif isinstance(msg, LightCommand):
            self.light_level = msg.level
            self.effects.emit("light_applied", node=self.cfg.node_id, level=msg.level)
            self._ack(msg.session_id, AckStep.LIGHT)
        elif isinstance(msg, PatternCommand):
            self.projected = msg.pattern
            self.effects.emit(
                "pattern_applied", node=self.cfg.node_id, seed=msg.pattern.seed,
                pattern_kind=msg.pattern.kind,
            )
            self._ack(msg.session_id, AckStep.PATTERN)
        elif isinstance(msg, FleetCommand):
            self._on_fleet_command(now, msg)
        elif isinstance(msg, FrameComplete) and msg.is_receipt:
            self._on_receipt(now, msg)
        elif isinstance(msg, Error):
            self.effects.emit(
                "error_received", node=self.cfg.node_id, code=msg.code, detail=msg.detail
            )

    def _on_registered(self, now: float) -> None:
        self.registered = True
        self.attempt = 0
        self.hb_seq = 0
        self.effects.emit("registered", node=self.cfg.node_id)
        self.effects.set_timer(("heartbeat", self.epoch), self.cfg.heartbeat_period)
        # staged but undelivered frames from before the disconnect go back on
        # the wire, oldest capture first
        for key in self.staging.keys_in_capture_order():
            if key not in self.transfer_queue and key != self.active_transfer:
                self.transfer_queue.append(key)
        self._start_next_transfer(now)

    # -- capture -----------------------------------------------------------

    def _ack(self, session_id: str, step: AckStep, ok: bool = True, error: str = "") -> None:
        if self.connected:
            self.effects.send(
                CaptureAck(session_id, self.cfg.node_id, step.value, ok=ok, error=error)
            )

    def _on_capture_command(self, now: float, cmd: CaptureCommand) -> None:
        key = (cmd.session_id, cmd.phase)
        step = (
            AckStep.CAPTURE_TEXTURE
            if cmd.phase == Phase.TEXTURE.value
            else AckStep.CAPTURE_PATTERN
        )
        if key in self.staging or key in self.capture_jobs:
            # repeated command for a phase already captured: acknowledge again
            self._ack(cmd.session_id, step)
            return
        pattern_seed = cmd.pattern.seed if cmd.pattern is not None else None
        try:
            data = self.capture_backend.capture(
                cmd.session_id,
                self.cfg.node_id,
                cmd.phase,
                pattern_seed,
                self.cfg.frame_width,
                self.cfg.frame_height,
            )
        except BackendFailure as exc:
            self.effects.emit(
                "capture_failed", node=self.cfg.node_id, session=cmd.session_id,
                phase=cmd.phase, reason=str(exc),
            )
            self._ack(cmd.session_id, step, ok=False, error=f"BackendFailure: {exc}")
            return
        if len(data) == 0:
            self.effects.emit(
                "capture_failed", node=self.cfg.node_id, session=cmd.session_id,
                phase=cmd.phase, reason="empty frame",
            )
            self._ack(cmd.session_id, step, ok=False, error="InvalidFrame: empty frame")
            return
        meta = FrameMetadata(
            session_id=cmd.session_id,
            node_id=self.cfg.node_id,
            phase=cmd.phase,
            width=self.cfg.frame_width,
            height=self.cfg.frame_height,
            byte_size=len(data),
            checksum=hashlib.sha256(data).hexdigest(),
            captured_at=now,
        )
        self.capture_jobs[key] = (meta, data, step.value)
        duration = self.cfg.exposure_time + len(data) / self.cfg.staging_write_rate
        self.effects.emit(
            "capture_started", node=self.cfg.node_id, session=cmd.session_id,
            phase=cmd.phase, bytes=len(data), duration=duration,
        )
        self.effects.set_timer(("capture_done", cmd.session_id, cmd.phase), duration)

    def _finish_capture(self, now: float, key: tuple[str, str]) -> None:
        job = self.capture_jobs.pop(key, None)
        if job is None:
            return
        meta, data, step = job
        meta = FrameMetadata(
            meta.session_id, meta.node_id, meta.phase, meta.width, meta.height,
            meta.byte_size, meta.checksum, captured_at=now,
        )
        self.staging.put(StagedFrame(meta, data))
        self.effects.emit(
            "capture_staged", node=self.cfg.node_id, session=meta.session_id,
            phase=meta.phase, bytes=meta.byte_size,
        )
        self._ack(meta.session_id, AckStep(step))
        if key not in self.transfer_queue:
            self.transfer_queue.append(key)
        self._start_next_transfer(now)

    # -- transfer ----------------------------------------------------------

    def _start_next_transfer(self, now: float) -> None:
        if not (self.connected and self.registered) or self.active_transfer is not None:
            return
        while self.transfer_queue:
            key = self.transfer_queue.pop(0)
            frame = self.staging.get(key)
            if frame is None:
                continue
            self.active_transfer = key
            read_delay = frame.meta.byte_size / self.cfg.staging_read_rate
            self.effects.emit(
                "transfer_started", node=self.cfg.node_id, session=key[0], phase=key[1],
                bytes=frame.meta.byte_size,
            )
            self.effects.set_timer(("read_done", key[0], key[1], self.epoch), read_delay)
            return

    def _stream_frame(self, now: float, key: tuple[str, str]) -> None:
        if key != self.active_transfer:
            return
        frame = self.staging.get(key)
        if frame is None:
            self.active_transfer = None
            self._start_next_transfer(now)
            return
        m = frame.meta
        self.effects.send(
            FrameHeader(
                m.session_id, m.node_id, m.phase, m.byte_size, m.checksum,
                width=m.width, height=m.height, captured_at=m.captured_at,
            )
        )
        chunks = 0
        for off in range(0, m.byte_size, self.cfg.chunk_size):
            self.effects.send(
                FrameChunk(
                    m.session_id, m.node_id, m.phase, chunks,
                    frame.data[off : off + self.cfg.chunk_size],
                )
            )
            chunks += 1
        self.effects.send(FrameComplete(m.session_id, m.node_id, m.phase, chunk_count=chunks))

    def _on_receipt(self, now: float, rc: FrameComplete) -> None:
        key = (rc.session_id, rc.phase)
        if rc.status in ("ok", "duplicate"):
            self.staging.remove(key)
            self.transfer_retries.pop(key, None)
            self.effects.emit(
                "transfer_done", node=self.cfg.node_id, session=rc.session_id,
                phase=rc.phase, status=rc.status,
            )
        elif rc.status == "checksum_mismatch":
            retries = self.transfer_retries.get(key, 0)
            if retries < MAX_TRANSFER_RETRIES:
                self.transfer_retries[key] = retries + 1
                self.effects.emit(
                    "transfer_retry", node=self.cfg.node_id, session=rc.session_id,
                    phase=rc.phase,
                )
                if key == self.active_transfer:
                    self.active_transfer = None
                self.transfer_queue.insert(0, key)
            else:
                self.effects.emit(
                    "transfer_failed", node=self.cfg.node_id, session=rc.session_id,
                    phase=rc.phase,
                )
                if self.connected:
                    self.effects.send(
                        Error(
                            code="TransferFailed",
                            detail="checksum mismatch after retry",
                            session_id=rc.session_id,
                            node_id=self.cfg.node_id,
                        )
                    )
        else:
            # rejected / session closed: the coordinator does not want it
            self.staging.remove(key)
            self.effects.emit(
                "transfer_dropped", node=self.cfg.node_id, session=rc.session_id,
                phase=rc.phase, status=rc.status,
            )
        if key == self.active_transfer:
            self.active_transfer = None
        self._start_next_transfer(now)

    # -- fleet -------------------------------------------------------------

    def _on_fleet_command(self, now: float, cmd: FleetCommand) -> None:
        exit_code, stdout, stderr = self.command_backend.run(cmd.command)
        result = FleetResult(cmd.job_id, self.cfg.node_id, exit_code, stdout, stderr)
        self.pending_fleet[cmd.job_id] = result
        self.effects.emit(
            "fleet_exec", node=self.cfg.node_id, job=cmd.job_id, command=cmd.command,
        )
        self.effects.set_timer(("fleet_done", cmd.job_id), self.cfg.fleet_exec_time)
