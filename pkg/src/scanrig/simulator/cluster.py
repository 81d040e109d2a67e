"""Deterministic whole-rig simulation.

One EventQueue drives the unmodified agent and coordinator cores through
simulated links. Everything (rng, event ordering, fair-share timing) is a
pure function of the constructor arguments, so two runs with the same seed
produce identical event logs and identical capture trees.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass

from ..agent.backends import MockCaptureBackend
from ..agent.config import AgentConfig, default_node
from ..agent.core import AgentCore
from ..coordinator.core import CoordinatorConfig, CoordinatorCore, SessionBusy
from ..coordinator.fleet import EmptySelection, FleetRejected
from ..coordinator.registry import UnknownNode
from ..coordinator.store import CaptureStore
from ..protocol.messages import Message, PatternRef
from ..rng import derive_seed
from .clock import EventQueue
from .network import SimNetwork
from .report import SimReport

FAULT_KINDS = ("crash", "disconnect", "restart")

# steady-state chatter that must not keep the simulation "active"
_NOISE_KINDS = frozenset({"connect_attempt", "connect_failed", "reconnect_wait"})


class _AgentEffects:
    def __init__(self, sim: ClusterSim, node_id: str):
        self.sim = sim
        self.node_id = node_id
        self.core: AgentCore | None = None
        self.dead = False

    def connect(self) -> None:
        if not self.dead:
            self.sim.network.dial(self.node_id)

    def send(self, msg: Message) -> None:
        if not self.dead:
            self.sim.network.agent_send(self.node_id, msg)

    def set_timer(self, key: tuple, delay: float) -> None:
        if self.dead:
            return
        core = self.core

        def fire(now: float):
            if not self.dead and self.sim.agents.get(self.node_id) is core:
                core.on_timer(now, key)

        self.sim.queue.push_after(delay, fire)

    def emit(self, kind: str, **fields) -> None:
        if not self.dead:
            fields.setdefault("node", self.node_id)
            self.sim.record(kind, fields)


class _CoordinatorEffects:
    def __init__(self, sim: ClusterSim):
        self.sim = sim
        self.core: CoordinatorCore | None = None

    def send(self, conn_id: int, msg: Message) -> None:
        self.sim.network.coord_send(conn_id, msg)

    def close(self, conn_id: int) -> None:
        self.sim.network.close_conn(conn_id)

    def set_timer(self, key: tuple, delay: float) -> None:
        core = self.core
        self.sim.queue.push_after(delay, lambda now: core.on_timer(now, key))

    def emit(self, kind: str, **fields) -> None:
        self.sim.record(kind, fields)


@dataclass
class _Pending:
    t: float
    label: str
    done: bool = False


class ClusterSim:
    def __init__(
        self,
        nodes: int = 96,
        seed: int = 42,
        capture_root=None,
        latency: float = 1e-3,
        link_bandwidth: float = 125e6,
        server_nic: float = 125e6,
        frame_width: int = 1920,
        frame_height: int = 1080,
        agent_overrides: dict | None = None,
        coord_overrides: dict | None = None,
        settle: float = 1.5,
        max_virtual: float = 300.0,
    ):
        self.seed = seed
        self.queue = EventQueue()
        self.network = SimNetwork(
            self.queue,
            latency=latency,
            link_bandwidth=link_bandwidth,
            server_nic=server_nic,
        )
        self.network.cluster = self
        self._tmp = None
        if capture_root is None:
            self._tmp = tempfile.TemporaryDirectory(prefix="scanrig-sim-")
            capture_root = self._tmp.name
        self.capture_root = str(capture_root)
        coord_cfg = CoordinatorConfig(
            capture_root=self.capture_root, **(coord_overrides or {})
        )
        self._coord_effects = _CoordinatorEffects(self)
        self.coordinator = CoordinatorCore(
            coord_cfg, self._coord_effects, store=CaptureStore(self.capture_root)
        )
        self._coord_effects.core = self.coordinator
        self.agents: dict[str, AgentCore] = {}
        self._agent_cfg_base = dict(
            frame_width=frame_width, frame_height=frame_height, **(agent_overrides or {})
        )
        self._boot_counts: dict[str, int] = {}
        self.crashed: set[str] = set()
        self.log: list[dict] = []
        self.settle = settle
        self.max_virtual = max_virtual
        self._pending: list[_Pending] = []
        self._last_activity = 0.0
        self._booted = False
        for i in range(nodes):
            node_id, beam, slot = default_node(i)
            self.network.add_node(node_id)
            self._spawn_agent(node_id, beam, slot)

    # -- construction ------------------------------------------------------

    def _spawn_agent(self, node_id: str, beam: int, slot: int) -> AgentCore:
        boot = self._boot_counts.get(node_id, 0)
        self._boot_counts[node_id] = boot + 1
        cfg = AgentConfig(
            node_id=node_id,
            beam=beam,
            slot=slot,
            rng_seed=derive_seed("agent", node_id, str(self.seed), f"boot{boot}"),
            **self._agent_cfg_base,
        )
        effects = _AgentEffects(self, node_id)
        core = AgentCore(cfg, effects)
        effects.core = core
        self.agents[node_id] = core
        return core

    # -- event log ---------------------------------------------------------

    def record(self, kind: str, fields: dict) -> None:
        entry = {"t": self.queue.now, "kind": kind}
        entry.update(fields)
        self.log.append(entry)
        if kind not in _NOISE_KINDS:
            self._last_activity = self.queue.now

    def events(self, kind: str | None = None) -> list[dict]:
        if kind is None:
            return list(self.log)
        return [e for e in self.log if e["kind"] == kind]

    # -- scheduling --------------------------------------------------------

    def _track(self, t: float, label: str, fn) -> None:
        pending = _Pending(t, label)
        self._pending.append(pending)

        def run(now: float):
            pending.done = True
            fn(now)

        self.queue.push(t, run)

    def schedule_capture(
        self,
        t: float,
        light_level: int = 100,
        pattern: PatternRef | None = None,
    ) -> None:
        def run(now: float):
            try:
                self.coordinator.start_session(now, light_level, pattern)
            except SessionBusy as exc:
                self.record("scenario_error", {"action": "capture", "reason": str(exc)})

        self._track(t, "capture", run)

    def schedule_lights(self, t: float, level: int) -> None:
        self._track(t, "lights", lambda now: self.coordinator.set_lights(now, level))

    def schedule_pattern(self, t: float, pattern: PatternRef) -> None:
        self._track(
            t, "pattern", lambda now: self.coordinator.project_pattern(now, pattern)
        )

    def schedule_fleet(
        self,
        t: float,
        command: str,
        selector: str = "all",
        limit: int | None = None,
        timeout: float | None = None,
    ) -> None:
        def run(now: float):
            try:
                self.coordinator.run_fleet(now, command, selector, limit, timeout)
            except (FleetRejected, EmptySelection, UnknownNode, ValueError) as exc:
                self.record("scenario_error", {"action": "fleet", "reason": str(exc)})

        self._track(t, "fleet", run)

    def inject_fault(self, t: float, node_id: str, kind: str) -> None:
        if node_id not in self.network.links:
            raise UnknownNode(node_id)
        if kind not in FAULT_KINDS:
            raise ValueError(f"fault kind must be one of {FAULT_KINDS}, got {kind!r}")
        self._track(t, f"fault:{kind}", lambda now: self._apply_fault(now, node_id, kind))

    # -- faults ------------------------------------------------------------

    def _apply_fault(self, now: float, node_id: str, kind: str) -> None:
        if kind == "crash":
            agent = self.agents.pop(node_id, None)
            if agent is None:
                self.record(
                    "fault_warning", {"node": node_id, "kind": kind, "reason": "already down"}
                )
                return
            agent.effects.dead = True  # staged frames die with the process
            self.crashed.add(node_id)
            self.record("fault_applied", {"node": node_id, "kind": kind})
            self.network.set_link_up(node_id, False, reason="crash")
        elif kind == "disconnect":
            link = self.network.links[node_id]
            if not link.up:
                self.record(
                    "fault_warning", {"node": node_id, "kind": kind, "reason": "already down"}
                )
                return
            self.record("fault_applied", {"node": node_id, "kind": kind})
            self.network.set_link_up(node_id, False, reason="disconnect")
        elif kind == "restart":
            if node_id in self.crashed:
                self.crashed.discard(node_id)
                self.record("fault_applied", {"node": node_id, "kind": kind})
                idx = int(node_id[1:])
                _, beam, slot = default_node(idx)
                core = self._spawn_agent(node_id, beam, slot)
                self.network.set_link_up(node_id, True, reason="restart")
                core.start(now, immediate=False)
            elif not self.network.links[node_id].up:
                self.record("fault_applied", {"node": node_id, "kind": kind})
                self.network.set_link_up(node_id, True, reason="restart")
            else:
                self.record(
                    "fault_warning",
                    {"node": node_id, "kind": kind, "reason": "node is healthy, nothing to restart"},
                )

    # -- execution ---------------------------------------------------------

    def boot(self) -> None:
        if self._booted:
            return
        self._booted = True
        self.coordinator.start(0.0)
        for node_id, core in self.agents.items():
            self.queue.push(0.0, lambda now, c=core: c.start(now))

    def _quiesced(self) -> bool:
        if any(not p.done for p in self._pending):
            return False
        for s in self.coordinator.sessions.values():
            if not s.terminal:
                return False
        for job in self.coordinator.fleet_jobs.values():
            if job.finished_at is None:
                return False
        return (self.queue.now - self._last_activity) >= self.settle

    def run(self, until: float | None = None) -> SimReport:
        self.boot()
        truncated = False
        while True:
            t = self.queue.peek_time()
            if t is None:
                break
            if until is not None and t > until:
                self.queue.now = until
                break
            if until is None and t > self.max_virtual:
                truncated = True
                break
            self.queue.pop_run()
            if until is None and self._quiesced():
                break
        return self._report(truncated)

    def _report(self, truncated: bool) -> SimReport:
        sessions = [
            self.coordinator.session_snapshot(sid)
            for sid in sorted(self.coordinator.sessions)
        ]
        fleet = [
            self.coordinator.fleet_jobs[jid].report()
            for jid in sorted(self.coordinator.fleet_jobs)
        ]
        return SimReport(
            duration=self.queue.now,
            truncated=truncated,
            seed=self.seed,
            sessions=sessions,
            fleet=fleet,
            events=list(self.log),
            bytes_delivered=self.network.bytes_delivered,
            messages_delivered=self.network.messages_delivered,
            peak_active_uplinks=self.network.peak_active_uplinks,
            capture_root=self.capture_root,
        )
