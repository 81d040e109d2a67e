"""Two-phase capture session state machine.

The session is a pure value; session_step consumes an event and returns the
successor plus the list of states entered, so hosts can fan out commands and
arm deadlines without the FSM knowing about transports. Captures overlap
transfers by design: frames may arrive in any state from TextureCapture
onward, and the Transferring state only waits for the remainder.

A Lost node drains gracefully: its undelivered (node, phase) pairs are marked
failed and every barrier forgets it, so the live nodes finish their work and
the session closes as PartialFailure listing exactly the failed pairs. A
deadline expiry, by contrast, abandons everything still outstanding.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from ..protocol.messages import AckStep, PatternRef, Phase


class SessionState(enum.IntEnum):
    IDLE = 0
    LIGHTS_SET = 1
    TEXTURE_CAPTURE = 2
    PATTERN_PROJECT = 3
    PATTERN_CAPTURE = 4
    TRANSFERRING = 5
    COMPLETE = 6
    PARTIAL_FAILURE = 7


TERMINAL_STATES = frozenset({SessionState.COMPLETE, SessionState.PARTIAL_FAILURE})

# which barrier each acknowledgement step belongs to
ACK_BARRIER = {
    AckStep.LIGHT.value: SessionState.LIGHTS_SET,
    AckStep.CAPTURE_TEXTURE.value: SessionState.TEXTURE_CAPTURE,
    AckStep.PATTERN.value: SessionState.PATTERN_PROJECT,
    AckStep.CAPTURE_PATTERN.value: SessionState.PATTERN_CAPTURE,
}

# earliest state in which a frame of a given phase can exist
FRAME_EARLIEST = {
    Phase.TEXTURE.value: SessionState.TEXTURE_CAPTURE,
    Phase.PATTERN.value: SessionState.PATTERN_CAPTURE,
}

_BARRIER_STATES = (
    SessionState.LIGHTS_SET,
    SessionState.TEXTURE_CAPTURE,
    SessionState.PATTERN_PROJECT,
    SessionState.PATTERN_CAPTURE,
)


class IllegalEvent(Exception):
    """An event that cannot occur in the session's current state."""


@dataclass(frozen=True)
class StartSession:
    pass


@dataclass(frozen=True)
class AckReceived:
    node_id: str
    step: str
    ok: bool = True
    error: str = ""


@dataclass(frozen=True)
class FrameReceived:
    node_id: str
    phase: str


@dataclass(frozen=True)
class NodeLost:
    node_id: str


@dataclass(frozen=True)
class Timeout:
    stage: SessionState


Event = StartSession | AckReceived | FrameReceived | NodeLost | Timeout


@dataclass(frozen=True)
class CaptureSession:
    session_id: str
    expected: frozenset[str]
    light_level: int = 100
    pattern: PatternRef = field(default_factory=PatternRef)
    started_at: float = 0.0
    state: SessionState = SessionState.IDLE
    lost: frozenset[str] = frozenset()
    pending: frozenset[str] = frozenset()
    delivered: frozenset[tuple[str, str]] = frozenset()
    failed: frozenset[tuple[str, str]] = frozenset()
    finished_at: float | None = None

    @property
    def terminal(self) -> bool:
        return self.state in TERMINAL_STATES

    @property
    def live(self) -> frozenset[str]:
        return self.expected - self.lost

    @property
    def required_pairs(self) -> frozenset[tuple[str, str]]:
        return frozenset(
            (n, ph.value) for n in self.expected for ph in (Phase.TEXTURE, Phase.PATTERN)
        )

    @property
    def missing(self) -> list[tuple[str, str]]:
        return sorted(self.failed)

    @property
    def progress(self) -> tuple[int, int]:
        return (len(self.delivered), len(self.required_pairs))


def _undelivered_pairs(s: CaptureSession, node: str) -> frozenset[tuple[str, str]]:
    pairs = {(node, Phase.TEXTURE.value), (node, Phase.PATTERN.value)}
    return frozenset(p for p in pairs if p not in s.delivered)


def _advance(s: CaptureSession, now: float) -> tuple[CaptureSession, list[SessionState]]:
    """Cascade through empty barriers and check transfer completion."""
    entered: list[SessionState] = []
    while True:
        if s.state in _BARRIER_STATES and not s.pending:
            nxt = SessionState(s.state + 1)
            pending = s.live if nxt in _BARRIER_STATES else frozenset()
            s = replace(s, state=nxt, pending=pending)
            entered.append(nxt)
            continue
        if s.state is SessionState.TRANSFERRING:
            if s.required_pairs <= (s.delivered | s.failed):
                outcome = (
                    SessionState.COMPLETE if not s.failed else SessionState.PARTIAL_FAILURE
                )
                s = replace(s, state=outcome, pending=frozenset(), finished_at=now)
                entered.append(outcome)
        return s, entered


def session_step(
    s: CaptureSession, event: Event, now: float
) -> tuple[CaptureSession, list[SessionState]]:
    """Apply one event. Returns the new session and the states entered.

    Terminal states absorb everything. IllegalEvent means the event is
    impossible in the current state (not merely late or duplicated; those are
    absorbed silently so retries stay harmless).
    """
    if s.terminal:
        return s, []

    if isinstance(event, StartSession):
        if s.state is not SessionState.IDLE:
            raise IllegalEvent(f"{s.session_id}: start in state {s.state.name}")
        s = replace(
            s,
            state=SessionState.LIGHTS_SET,
            pending=s.live,
            started_at=now,
        )
        adv, entered = _advance(s, now)
        return adv, [SessionState.LIGHTS_SET] + entered

    if s.state is SessionState.IDLE:
        raise IllegalEvent(f"{s.session_id}: {type(event).__name__} before start")

    if isinstance(event, AckReceived):
        if event.node_id not in s.expected:
            raise IllegalEvent(f"{s.session_id}: ack from foreign node {event.node_id}")
        barrier = ACK_BARRIER.get(event.step)
        if barrier is None:
            raise IllegalEvent(f"{s.session_id}: unknown ack step {event.step!r}")
        if barrier > s.state:
            raise IllegalEvent(
                f"{s.session_id}: {event.step} ack in state {s.state.name} "
                "(command not yet issued)"
            )
        if barrier < s.state or event.node_id in s.lost:
            return s, []  # late or duplicate, absorb
        if event.node_id not in s.pending:
            return s, []
        s = replace(s, pending=s.pending - {event.node_id})
        if not event.ok and barrier in (
            SessionState.TEXTURE_CAPTURE,
            SessionState.PATTERN_CAPTURE,
        ):
            phase = (
                Phase.TEXTURE.value
                if barrier is SessionState.TEXTURE_CAPTURE
                else Phase.PATTERN.value
            )
            pair = (event.node_id, phase)
            # a frame that already landed outranks a contradictory nack
            if pair not in s.delivered:
                s = replace(s, failed=s.failed | {pair})
        return _advance(s, now)

    if isinstance(event, FrameReceived):
        if event.node_id not in s.expected:
            raise IllegalEvent(f"{s.session_id}: frame from foreign node {event.node_id}")
        earliest = FRAME_EARLIEST.get(event.phase)
        if earliest is None:
            raise IllegalEvent(f"{s.session_id}: unknown phase {event.phase!r}")
        if s.state < earliest:
            raise IllegalEvent(
                f"{s.session_id}: {event.phase} frame in state {s.state.name}"
            )
        pair = (event.node_id, event.phase)
        s = replace(s, delivered=s.delivered | {pair}, failed=s.failed - {pair})
        return _advance(s, now)

    if isinstance(event, NodeLost):
        if event.node_id not in s.expected:
            raise IllegalEvent(f"{s.session_id}: lost unknown node {event.node_id}")
        if event.node_id in s.lost:
            return s, []
        s = replace(
            s,
            lost=s.lost | {event.node_id},
            pending=s.pending - {event.node_id},
            failed=s.failed | _undelivered_pairs(s, event.node_id),
        )
        return _advance(s, now)

    if isinstance(event, Timeout):
        if event.stage is not s.state:
            return s, []  # deadline for a stage already left behind
        s = replace(
            s,
            state=SessionState.PARTIAL_FAILURE,
            pending=frozenset(),
            failed=s.failed | (s.required_pairs - s.delivered),
            finished_at=now,
        )
        return s, [SessionState.PARTIAL_FAILURE]

    raise IllegalEvent(f"{s.session_id}: unsupported event {type(event).__name__}")


@dataclass(frozen=True)
class SessionReport:
    session_id: str
    outcome: str
    expected_nodes: int
    delivered: int
    total: int
    missing: list[tuple[str, str]]
    started_at: float
    finished_at: float

    @property
    def duration(self) -> float:
        return self.finished_at - self.started_at


def session_report(s: CaptureSession) -> SessionReport:
    if not s.terminal:
        raise ValueError(f"session {s.session_id} still in state {s.state.name}")
    delivered, total = s.progress
    return SessionReport(
        session_id=s.session_id,
        outcome="complete" if s.state is SessionState.COMPLETE else "partial_failure",
        expected_nodes=len(s.expected),
        delivered=delivered,
        total=total,
        missing=s.missing,
        started_at=s.started_at,
        finished_at=s.finished_at if s.finished_at is not None else s.started_at,
    )
