"""Connected-node bookkeeping: registration, heartbeats, loss detection."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ..protocol.messages import Hello


class NodeState(enum.Enum):
    CONNECTED = "connected"
    LOST = "lost"


class SlotConflict(Exception):
    """A different node already holds this (beam, slot) position."""


class UnknownNode(KeyError):
    pass


@dataclass
class NodeRecord:
    node_id: str
    beam: int
    slot: int
    state: NodeState
    conn_id: int
    connected_at: float
    last_heartbeat: float
    last_seq: int = -1
    disconnects: int = 0


class Registry:
    def __init__(self):
        self.nodes: dict[str, NodeRecord] = {}
        self.by_conn: dict[int, str] = {}

    def register(self, hello: Hello, conn_id: int, now: float) -> NodeRecord:
        """Admit a node, reusing its record on reconnect.

        A different node_id claiming an occupied (beam, slot) while its owner
        is still connected is a wiring error and is rejected.
        """
        for other in self.nodes.values():
            if (
                other.node_id != hello.node_id
                and (other.beam, other.slot) == (hello.beam, hello.slot)
                and other.state is NodeState.CONNECTED
            ):
                raise SlotConflict(
                    f"beam {hello.beam} slot {hello.slot} already held by {other.node_id}"
                )
        record = self.nodes.get(hello.node_id)
        if record is None:
            record = NodeRecord(
                node_id=hello.node_id,
                beam=hello.beam,
                slot=hello.slot,
                state=NodeState.CONNECTED,
                conn_id=conn_id,
                connected_at=now,
                last_heartbeat=now,
            )
            self.nodes[hello.node_id] = record
        else:
            self.by_conn.pop(record.conn_id, None)
            record.beam = hello.beam
            record.slot = hello.slot
            record.state = NodeState.CONNECTED
            record.conn_id = conn_id
            record.connected_at = now
            record.last_heartbeat = now
            record.last_seq = -1
        self.by_conn[conn_id] = hello.node_id
        return record

    def heartbeat(self, node_id: str, seq: int, now: float) -> None:
        record = self.nodes.get(node_id)
        if record is None:
            raise UnknownNode(node_id)
        record.last_heartbeat = now
        record.last_seq = seq

    def node_for_conn(self, conn_id: int) -> str | None:
        return self.by_conn.get(conn_id)

    def on_disconnect(self, conn_id: int, now: float) -> str | None:
        """Connection dropped; the node is Lost until it re-registers."""
        node_id = self.by_conn.pop(conn_id, None)
        if node_id is None:
            return None
        record = self.nodes[node_id]
        record.state = NodeState.LOST
        record.disconnects += 1
        return node_id

    def stale_nodes(self, now: float, threshold: float) -> list[str]:
        """Nodes whose heartbeat silence exceeds the threshold."""
        return sorted(
            node_id
            for node_id, r in self.nodes.items()
            if now - r.last_heartbeat > threshold
        )

    def mark_lost(self, node_id: str) -> None:
        record = self.nodes.get(node_id)
        if record is None:
            raise UnknownNode(node_id)
        if record.state is not NodeState.LOST:
            record.state = NodeState.LOST
            self.by_conn.pop(record.conn_id, None)

    def is_connected(self, node_id: str) -> bool:
        record = self.nodes.get(node_id)
        return record is not None and record.state is NodeState.CONNECTED

    def connected_ids(self) -> list[str]:
        return sorted(
            node_id
            for node_id, r in self.nodes.items()
            if r.state is NodeState.CONNECTED
        )

    def known_ids(self) -> list[str]:
        return sorted(self.nodes)

    def snapshot(self) -> list[dict]:
        return [
            {
                "node_id": r.node_id,
                "beam": r.beam,
                "slot": r.slot,
                "state": r.state.value,
                "last_heartbeat": r.last_heartbeat,
                "disconnects": r.disconnects,
            }
            for _, r in sorted(self.nodes.items())
        ]
