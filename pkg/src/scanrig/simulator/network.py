"""Simulated rig network: per-node duplex links into a shared server NIC.

Bandwidth is charged for the binary payload of FrameChunk messages only;
control traffic is hundreds of bytes against multi-megabyte frames and rides
on latency alone. Each link transmits serially (FIFO, so a frame's header,
chunks, and completion keep their order) and every chunk samples its rate at
transmission start: the link's own bandwidth capped by an equal share of the
server NIC across all links transmitting at that instant.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from ..protocol.messages import FrameChunk, Message
from .clock import EventQueue

if TYPE_CHECKING:  # pragma: no cover
    from .cluster import ClusterSim


def wire_size(msg: Message) -> int:
    """Bytes charged against link bandwidth."""
    return len(msg.data) if isinstance(msg, FrameChunk) else 0


def transfer_delay(
    size: int,
    latency: float,
    link_bandwidth: float,
    server_nic: float,
    active_uplinks: int = 1,
) -> float:
    """Send-to-arrival delay for one message on an otherwise quiet link."""
    if size == 0:
        return latency
    rate = min(link_bandwidth, server_nic / max(1, active_uplinks))
    return size / rate + latency


@dataclass
class Link:
    node_id: str
    up: bool = True
    conn_id: int | None = None
    generation: int = 0  # bumped whenever the connection drops
    uplink: deque = field(default_factory=deque)
    transmitting: bool = False


class SimNetwork:
    def __init__(
        self,
        queue: EventQueue,
        latency: float = 1e-3,
        link_bandwidth: float = 125e6,
        server_nic: float = 125e6,
    ):
        self.queue = queue
        self.latency = latency
        self.link_bandwidth = link_bandwidth
        self.server_nic = server_nic
        self.links: dict[str, Link] = {}
        self.by_conn: dict[int, str] = {}
        self._conn_seq = 0
        self.cluster: ClusterSim | None = None
        self.bytes_delivered = 0
        self.messages_delivered = 0
        self.peak_active_uplinks = 0

    def add_node(self, node_id: str) -> Link:
        link = Link(node_id)
        self.links[node_id] = link
        return link

    # -- connection lifecycle ---------------------------------------------

    def dial(self, node_id: str) -> None:
        link = self.links[node_id]

        def complete(now: float, gen=link.generation):
            agent = self.cluster.agents.get(node_id)
            if agent is None:
                return
            if not link.up or link.generation != gen:
                agent.on_connect_result(now, False, "link down")
                return
            if link.conn_id is not None:
                self.by_conn.pop(link.conn_id, None)
            self._conn_seq += 1
            link.conn_id = self._conn_seq
            self.by_conn[link.conn_id] = node_id
            agent.on_connect_result(now, True)

        self.queue.push_after(self.latency, complete)

    def drop_connection(self, node_id: str, reason: str) -> None:
        """Tear down the node's connection (link itself may stay up)."""
        link = self.links[node_id]
        link.generation += 1
        link.uplink.clear()
        link.transmitting = False
        conn = link.conn_id
        link.conn_id = None
        if conn is not None:
            self.by_conn.pop(conn, None)
            now = self.queue.now
            self.cluster.coordinator.on_disconnect(conn, now)
            agent = self.cluster.agents.get(node_id)
            if agent is not None:
                agent.on_disconnect(now, reason)

    def set_link_up(self, node_id: str, up: bool, reason: str = "fault") -> None:
        link = self.links[node_id]
        if link.up == up:
            return
        link.up = up
        if not up and link.conn_id is not None:
            self.drop_connection(node_id, reason)

    def close_conn(self, conn_id: int) -> None:
        """Coordinator-initiated close (registration rejected).

        Deferred past one delivery latency so a just-sent Error reaches the
        agent before the connection vanishes under it.
        """

        def drop(now: float):
            node_id = self.by_conn.get(conn_id)
            if node_id is not None:
                self.drop_connection(node_id, "closed by coordinator")

        self.queue.push_after(2 * self.latency, drop)

    # -- agent -> coordinator ---------------------------------------------

    def agent_send(self, node_id: str, msg: Message) -> None:
        link = self.links[node_id]
        if not link.up or link.conn_id is None:
            return  # lost on the floor, like a send on a dead socket
        link.uplink.append((msg, link.generation))
        self._transmit_next(link)

    def _active_uplinks(self) -> int:
        return sum(1 for l in self.links.values() if l.transmitting)

    def _transmit_next(self, link: Link) -> None:
        if link.transmitting or not link.uplink:
            return
        msg, gen = link.uplink.popleft()
        if gen != link.generation:
            self._transmit_next(link)
            return
        link.transmitting = True
        active = self._active_uplinks()
        self.peak_active_uplinks = max(self.peak_active_uplinks, active)
        size = wire_size(msg)
        duration = 0.0
        if size:
            rate = min(self.link_bandwidth, self.server_nic / max(1, active))
            duration = size / rate

        def finish(now: float):
            if gen != link.generation:
                return  # connection dropped mid-flight; drop already reset the link
            link.transmitting = False
            if link.up and link.conn_id is not None:
                conn = link.conn_id
                self.queue.push_after(
                    self.latency, lambda t: self._deliver_up(conn, gen, link, msg, size)
                )
            self._transmit_next(link)

        self.queue.push_after(duration, finish)

    def _deliver_up(self, conn: int, gen: int, link: Link, msg: Message, size: int) -> None:
        if gen != link.generation or not link.up or link.conn_id != conn:
            return
        self.bytes_delivered += size
        self.messages_delivered += 1
        self.cluster.coordinator.on_message(conn, self.queue.now, msg)

    # -- coordinator -> agent ---------------------------------------------

    def coord_send(self, conn_id: int, msg: Message) -> None:
        node_id = self.by_conn.get(conn_id)
        if node_id is None:
            return
        link = self.links[node_id]
        if not link.up:
            return
        gen = link.generation

        def deliver(now: float):
            if gen != link.generation or not link.up or link.conn_id != conn_id:
                return
            agent = self.cluster.agents.get(node_id)
            if agent is not None:
                self.messages_delivered += 1
                agent.on_message(now, msg)

        self.queue.push_after(self.latency, deliver)
