"""Sans-IO coordinator.

Mirror of the agent core: hosts deliver decoded messages, connection changes
and timer expirations; the core reacts through CoordinatorEffects. The same
object runs under the deterministic simulator and the asyncio server.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from ..protocol.messages import (
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
from .fleet import FleetJob, FleetRejected, FleetRow, parse_targets
from .registry import NodeState, Registry, SlotConflict, UnknownNode
from .session import (
    AckReceived,
    CaptureSession,
    FrameReceived,
    FRAME_EARLIEST,
    IllegalEvent,
    NodeLost,
    SessionState,
    StartSession,
    Timeout,
    session_report,
    session_step,
)
from .store import CaptureStore


class SessionBusy(RuntimeError):
    """Another capture session is still running."""


class CoordinatorEffects(Protocol):
    def send(self, conn_id: int, msg: Message) -> None: ...

    def close(self, conn_id: int) -> None: ...

    def set_timer(self, key: tuple, delay: float) -> None: ...

    def emit(self, kind: str, **fields) -> None: ...


@dataclass(frozen=True)
class CoordinatorConfig:
    heartbeat_period: float = 1.0
    lost_after_beats: int = 3
    sweep_interval: float = 0.5
    ack_deadline: float = 5.0
    transfer_deadline: float = 30.0
    fleet_limit: int = 8
    fleet_timeout: float = 10.0
    capture_root: str = "captures"
    max_frame_bytes: int = 64 * 1024 * 1024

    @property
    def lost_threshold(self) -> float:
        return self.lost_after_beats * self.heartbeat_period


@dataclass
class _Assembly:
    """One in-flight frame per connection (agents transfer serially)."""

    header: FrameHeader
    parts: list[bytes] = field(default_factory=list)
    received: int = 0
    next_index: int = 0
    discard_reason: str = ""


class CoordinatorCore:
    def __init__(
        self,
        cfg: CoordinatorConfig,
        effects: CoordinatorEffects,
        store: CaptureStore | None = None,
    ):
        self.cfg = cfg
        self.effects = effects
        self.registry = Registry()
        self.store = store or CaptureStore(Path(cfg.capture_root))
        self.sessions: dict[str, CaptureSession] = {}
        self.session_seq = 0
        self.current_session_id: str | None = None
        self.assemblies: dict[int, _Assembly] = {}
        self.fleet_jobs: dict[str, FleetJob] = {}
        self.fleet_seq = 0
        self.op_seq = 0
        self.on_fleet_complete: Callable[[FleetJob], None] | None = None

    # -- lifecycle ---------------------------------------------------------

    def start(self, now: float) -> None:
        self.effects.emit("coordinator_started")
        self.effects.set_timer(("sweep",), self.cfg.sweep_interval)

    def on_disconnect(self, conn_id: int, now: float) -> None:
        self.assemblies.pop(conn_id, None)
        node_id = self.registry.on_disconnect(conn_id, now)
        if node_id is not None:
            # the liveness sweep decides later whether the session gives up
            # on the node; a quick reconnect keeps it alive
            self.effects.emit("node_disconnected", node=node_id)

    # -- inbound -----------------------------------------------------------

    def on_message(self, conn_id: int, now: float, msg: Message) -> None:
        if isinstance(msg, Hello):
            self._on_hello(conn_id, now, msg)
        elif isinstance(msg, Heartbeat):
            self._on_heartbeat(conn_id, now, msg)
        elif isinstance(msg, CaptureAck):
            self._on_ack(conn_id, now, msg)
        elif isinstance(msg, FrameHeader):
            self._on_frame_header(conn_id, now, msg)
        elif isinstance(msg, FrameChunk):
            self._on_frame_chunk(conn_id, now, msg)
        elif isinstance(msg, FrameComplete) and not msg.is_receipt:
            self._on_frame_complete(conn_id, now, msg)
        elif isinstance(msg, FleetResult):
            self._on_fleet_result(conn_id, now, msg)
        elif isinstance(msg, Error):
            node = self.registry.node_for_conn(conn_id)
            self.effects.emit("agent_error", node=node, code=msg.code, detail=msg.detail)
        else:
            self.effects.emit("unexpected_message", kind=type(msg).__name__)

    def _on_hello(self, conn_id: int, now: float, msg: Hello) -> None:
        try:
            record = self.registry.register(msg, conn_id, now)
        except SlotConflict as exc:
            self.effects.send(conn_id, Error(code="SlotConflict", detail=str(exc)))
            self.effects.emit(
                "registration_rejected", node=msg.node_id, reason=str(exc)
            )
            self.effects.close(conn_id)
            return
        self.effects.send(
            conn_id, HelloAck(msg.node_id, heartbeat_period=self.cfg.heartbeat_period)
        )
        self.effects.emit(
            "node_registered", node=record.node_id, beam=record.beam, slot=record.slot
        )

    def _on_heartbeat(self, conn_id: int, now: float, msg: Heartbeat) -> None:
        try:
            self.registry.heartbeat(msg.node_id, msg.seq, now)
        except UnknownNode:
            self.effects.send(
                conn_id, Error(code="UnknownNode", detail=f"{msg.node_id} never registered")
            )

    def _conn_node(self, conn_id: int, claimed: str) -> str | None:
        node = self.registry.node_for_conn(conn_id)
        if node != claimed:
            self.effects.emit("spoofed_node", claimed=claimed, actual=node)
            return None
        return node

    # -- session machinery -------------------------------------------------

    def start_session(
        self,
        now: float,
        light_level: int = 100,
        pattern: PatternRef | None = None,
    ) -> CaptureSession:
        current = (
            self.sessions.get(self.current_session_id)
            if self.current_session_id
            else None
        )
        if current is not None and not current.terminal:
            raise SessionBusy(f"session {current.session_id} still {current.state.name}")
        self.session_seq += 1
        sid = f"s{self.session_seq:04d}"
        session = CaptureSession(
            session_id=sid,
            expected=frozenset(self.registry.connected_ids()),
            light_level=light_level,
            pattern=pattern or PatternRef(),
            started_at=now,
        )
        self.sessions[sid] = session
        self.current_session_id = sid
        self.effects.emit(
            "session_started",
            session=sid,
            nodes=len(session.expected),
            light_level=light_level,
            pattern_kind=session.pattern.kind,
            pattern_seed=session.pattern.seed,
        )
        self._apply(now, sid, StartSession())
        return self.sessions[sid]

    def _apply(self, now: float, sid: str, event) -> None:
        session = self.sessions.get(sid)
        if session is None or session.terminal:
            return
        try:
            new, entered = session_step(session, event, now)
        except IllegalEvent as exc:
            self.effects.emit("illegal_event", session=sid, detail=str(exc))
            return
        self.sessions[sid] = new
        for state in entered:
            self._on_enter(now, sid, state)

    def _send_node(self, node_id: str, msg: Message) -> bool:
        record = self.registry.nodes.get(node_id)
        if record is None or record.state is not NodeState.CONNECTED:
            return False
        self.effects.send(record.conn_id, msg)
        return True

    def _on_enter(self, now: float, sid: str, state: SessionState) -> None:
        session = self.sessions[sid]
        self.effects.emit("session_state", session=sid, state=state.name.lower())
        command = None
        if state is SessionState.LIGHTS_SET:
            command = LightCommand(sid, session.light_level)
        elif state is SessionState.TEXTURE_CAPTURE:
            command = CaptureCommand(sid, Phase.TEXTURE.value)
        elif state is SessionState.PATTERN_PROJECT:
            command = PatternCommand(sid, session.pattern)
        elif state is SessionState.PATTERN_CAPTURE:
            command = CaptureCommand(sid, Phase.PATTERN.value, session.pattern)
        if command is not None:
            for node_id in sorted(session.live):
                if self._send_node(node_id, command):
                    self.effects.emit(
                        "command_sent",
                        session=sid,
                        node=node_id,
                        command=type(command).__name__,
                        state=state.name.lower(),
                    )
            self.effects.set_timer(
                ("session_deadline", sid, int(state)), self.cfg.ack_deadline
            )
        elif state is SessionState.TRANSFERRING:
            self.effects.set_timer(
                ("session_deadline", sid, int(state)), self.cfg.transfer_deadline
            )
        elif state in (SessionState.COMPLETE, SessionState.PARTIAL_FAILURE):
            self._finalize(now, sid)

    def _finalize(self, now: float, sid: str) -> None:
        session = self.sessions[sid]
        report = session_report(session)
        self.store.write_manifest(
            sid,
            outcome=report.outcome,
            started_at=report.started_at,
            finished_at=report.finished_at,
            light_level=session.light_level,
            pattern={
                "kind": session.pattern.kind,
                "seed": session.pattern.seed,
                "density": session.pattern.density,
                "width": session.pattern.width,
                "height": session.pattern.height,
            },
            missing=session.missing,
        )
        if self.current_session_id == sid:
            self.current_session_id = None
        self.effects.emit(
            "session_finalized",
            session=sid,
            outcome=report.outcome,
            delivered=report.delivered,
            total=report.total,
            missing=[[n, p] for n, p in report.missing],
            duration=report.duration,
        )

    def session_snapshot(self, sid: str) -> dict | None:
        session = self.sessions.get(sid)
        if session is None:
            return None
        delivered, total = session.progress
        snap = {
            "session_id": session.session_id,
            "state": session.state.name.lower(),
            "terminal": session.terminal,
            "expected_nodes": len(session.expected),
            "delivered": delivered,
            "total": total,
            "lost_nodes": sorted(session.lost),
            "missing": [[n, p] for n, p in session.missing],
            "started_at": session.started_at,
        }
        if session.terminal:
            report = session_report(session)
            snap["outcome"] = report.outcome
            snap["finished_at"] = report.finished_at
            snap["duration"] = report.duration
        return snap

    # -- acks --------------------------------------------------------------

    def _on_ack(self, conn_id: int, now: float, msg: CaptureAck) -> None:
        if self._conn_node(conn_id, msg.node_id) is None:
            return
        self.effects.emit(
            "ack_received",
            session=msg.session_id,
            node=msg.node_id,
            step=msg.step,
            ok=msg.ok,
            error=msg.error,
        )
        if msg.session_id.startswith("op"):
            return  # standalone light/pattern op, log only
        if msg.session_id not in self.sessions:
            self.effects.emit("stray_ack", session=msg.session_id, node=msg.node_id)
            return
        self._apply(
            now, msg.session_id, AckReceived(msg.node_id, msg.step, msg.ok, msg.error)
        )

    # -- frame intake ------------------------------------------------------

    def _frame_reject_reason(self, now: float, h: FrameHeader) -> str:
        if h.byte_size <= 0 or h.byte_size > self.cfg.max_frame_bytes:
            return "InvalidFrame"
        session = self.sessions.get(h.session_id)
        if session is None:
            return "UnknownSession"
        if session.terminal:
            return "SessionClosed"
        if h.node_id not in session.expected:
            return "UnknownNode"
        earliest = FRAME_EARLIEST[h.phase]
        if session.state < earliest:
            return "PhaseMismatch"
        return ""

    def _on_frame_header(self, conn_id: int, now: float, msg: FrameHeader) -> None:
        if self._conn_node(conn_id, msg.node_id) is None:
            return
        if conn_id in self.assemblies:
            self.effects.emit(
                "frame_rejected", node=msg.node_id, reason="overlapping transfer"
            )
        assembly = _Assembly(header=msg)
        assembly.discard_reason = self._frame_reject_reason(now, msg)
        if assembly.discard_reason:
            self.effects.emit(
                "frame_rejected",
                node=msg.node_id,
                session=msg.session_id,
                phase=msg.phase,
                reason=assembly.discard_reason,
            )
        self.assemblies[conn_id] = assembly

    def _on_frame_chunk(self, conn_id: int, now: float, msg: FrameChunk) -> None:
        assembly = self.assemblies.get(conn_id)
        if assembly is None:
            self.effects.emit("orphan_chunk", node=msg.node_id)
            return
        if assembly.discard_reason:
            return
        if msg.index != assembly.next_index:
            assembly.discard_reason = "ChunkOrder"
            return
        assembly.next_index += 1
        assembly.received += len(msg.data)
        if assembly.received > assembly.header.byte_size:
            assembly.discard_reason = "Overflow"
            return
        assembly.parts.append(msg.data)

    def _on_frame_complete(self, conn_id: int, now: float, msg: FrameComplete) -> None:
        assembly = self.assemblies.pop(conn_id, None)
        if assembly is None:
            self.effects.emit("orphan_complete", node=msg.node_id)
            return
        h = assembly.header

        def receipt(status: str) -> None:
            self.effects.send(
                conn_id,
                FrameComplete(
                    h.session_id, h.node_id, h.phase,
                    chunk_count=assembly.next_index, status=status,
                ),
            )

        if assembly.discard_reason:
            receipt("rejected")
            return
        data = b"".join(assembly.parts)
        if (
            msg.chunk_count != assembly.next_index
            or len(data) != h.byte_size
        ):
            self.effects.emit(
                "frame_rejected", node=h.node_id, session=h.session_id,
                phase=h.phase, reason="SizeMismatch",
            )
            receipt("rejected")
            return
        if hashlib.sha256(data).hexdigest() != h.checksum:
            self.effects.emit(
                "frame_rejected", node=h.node_id, session=h.session_id,
                phase=h.phase, reason="ChecksumMismatch",
            )
            receipt("checksum_mismatch")
            return
        if self.store.has_frame(h.session_id, h.node_id, h.phase):
            self.effects.emit(
                "frame_duplicate", node=h.node_id, session=h.session_id, phase=h.phase
            )
            receipt("duplicate")
            return
        stored = self.store.store_frame(
            h.session_id, h.node_id, h.phase, data, captured_at=h.captured_at
        )
        self.effects.emit(
            "frame_stored",
            session=h.session_id,
            node=h.node_id,
            phase=h.phase,
            bytes=stored.byte_size,
            sha256=stored.checksum,
        )
        receipt("ok")
        self._apply(now, h.session_id, FrameReceived(h.node_id, h.phase))

    # -- timers ------------------------------------------------------------

    def on_timer(self, now: float, key: tuple) -> None:
        tag = key[0]
        if tag == "sweep":
            self._sweep(now)
            self.effects.set_timer(("sweep",), self.cfg.sweep_interval)
        elif tag == "session_deadline":
            _, sid, state_idx = key
            session = self.sessions.get(sid)
            if session is not None and not session.terminal and int(session.state) == state_idx:
                self.effects.emit(
                    "session_deadline", session=sid, state=session.state.name.lower()
                )
                self._apply(now, sid, Timeout(SessionState(state_idx)))
        elif tag == "fleet_node":
            _, job_id, node_id = key
            job = self.fleet_jobs.get(job_id)
            if job is not None and node_id in job.pending:
                job.pending.discard(node_id)
                job.rows[node_id] = FleetRow(node_id, "timeout", error="no result in time")
                self.effects.emit("fleet_node_done", job=job_id, node=node_id, status="timeout")
                self._fleet_dispatch(job, now)
                self._fleet_maybe_finish(job, now)

    def _sweep(self, now: float) -> None:
        session = (
            self.sessions.get(self.current_session_id)
            if self.current_session_id
            else None
        )
        for node_id in self.registry.stale_nodes(now, self.cfg.lost_threshold):
            record = self.registry.nodes[node_id]
            flipped = record.state is NodeState.CONNECTED
            if flipped:
                self.registry.mark_lost(node_id)
            route = (
                session is not None
                and not session.terminal
                and node_id in session.expected
                and node_id not in session.lost
            )
            if flipped or route:
                self.effects.emit("node_lost", node=node_id)
            if route:
                self._apply(now, session.session_id, NodeLost(node_id))
                session = self.sessions.get(session.session_id)

    # -- fleet -------------------------------------------------------------

    def run_fleet(
        self,
        now: float,
        command: str,
        selector: str = "all",
        limit: int | None = None,
        timeout: float | None = None,
    ) -> FleetJob:
        current = (
            self.sessions.get(self.current_session_id)
            if self.current_session_id
            else None
        )
        if current is not None and not current.terminal:
            raise FleetRejected(f"capture session {current.session_id} is active")
        targets = parse_targets(selector, self.registry)
        self.fleet_seq += 1
        job = FleetJob(
            job_id=f"j{self.fleet_seq:04d}",
            command=command,
            targets=targets,
            limit=limit or self.cfg.fleet_limit,
            timeout=timeout or self.cfg.fleet_timeout,
            started_at=now,
            queue=list(targets),
        )
        self.fleet_jobs[job.job_id] = job
        self.effects.emit(
            "fleet_started", job=job.job_id, command=command, targets=len(targets),
            limit=job.limit,
        )
        self._fleet_dispatch(job, now)
        self._fleet_maybe_finish(job, now)
        return job

    def _fleet_dispatch(self, job: FleetJob, now: float) -> None:
        while job.queue and len(job.pending) < job.limit:
            node_id = job.queue.pop(0)
            if not self._send_node(
                node_id, FleetCommand(job.job_id, node_id, job.command, job.timeout)
            ):
                job.rows[node_id] = FleetRow(
                    node_id, "unreachable", error="node not connected"
                )
                self.effects.emit(
                    "fleet_node_done", job=job.job_id, node=node_id, status="unreachable"
                )
                continue
            job.pending.add(node_id)
            job.peak_concurrency = max(job.peak_concurrency, len(job.pending))
            self.effects.set_timer(("fleet_node", job.job_id, node_id), job.timeout)
            self.effects.emit("fleet_dispatch", job=job.job_id, node=node_id)

    def _on_fleet_result(self, conn_id: int, now: float, msg: FleetResult) -> None:
        job = self.fleet_jobs.get(msg.job_id)
        if job is None or msg.node_id not in job.pending:
            self.effects.emit("stray_fleet_result", job=msg.job_id, node=msg.node_id)
            return
        job.pending.discard(msg.node_id)
        status = "ok" if msg.exit_code == 0 else "failed"
        job.rows[msg.node_id] = FleetRow(
            msg.node_id, status, exit_code=msg.exit_code, output=msg.output,
            error=msg.error,
        )
        self.effects.emit(
            "fleet_node_done", job=job.job_id, node=msg.node_id, status=status
        )
        self._fleet_dispatch(job, now)
        self._fleet_maybe_finish(job, now)

    def _fleet_maybe_finish(self, job: FleetJob, now: float) -> None:
        if not job.done or job.finished_at is not None:
            return
        job.finished_at = now
        counts: dict[str, int] = {}
        for row in job.rows.values():
            counts[row.status] = counts.get(row.status, 0) + 1
        self.effects.emit(
            "fleet_finished",
            job=job.job_id,
            peak_concurrency=job.peak_concurrency,
            **counts,
        )
        if self.on_fleet_complete is not None:
            self.on_fleet_complete(job)

    # -- standalone operator commands --------------------------------------

    def set_lights(self, now: float, level: int) -> dict:
        self.op_seq += 1
        op_id = f"op{self.op_seq:04d}"
        targets = self.registry.connected_ids()
        for node_id in targets:
            self._send_node(node_id, LightCommand(op_id, level))
        self.effects.emit("lights_set", op=op_id, level=level, nodes=len(targets))
        return {"op_id": op_id, "level": level, "nodes": targets}

    def project_pattern(self, now: float, pattern: PatternRef) -> dict:
        self.op_seq += 1
        op_id = f"op{self.op_seq:04d}"
        targets = self.registry.connected_ids()
        for node_id in targets:
            self._send_node(node_id, PatternCommand(op_id, pattern))
        self.effects.emit(
            "pattern_projected", op=op_id, pattern=pattern.kind, seed=pattern.seed,
            nodes=len(targets),
        )
        return {"op_id": op_id, "pattern": pattern.kind, "nodes": targets}

    def nodes_snapshot(self) -> list[dict]:
        return self.registry.snapshot()
