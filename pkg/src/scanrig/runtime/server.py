"""Coordinator host: TCP rig port, HTTP operator port, one shared core."""

from __future__ import annotations

import argparse
import asyncio
import itertools
import logging
import time
from pathlib import Path

from ..agent.backends import MockCaptureBackend, MockCommandBackend
from ..agent.config import AgentConfig, default_node
from ..coordinator.core import CoordinatorConfig, CoordinatorCore
from ..coordinator.store import CaptureStore
from ..protocol import FrameDecoder, ProtocolError, encode_message
from .agent_client import AgentRuntime
from .events import EventBus

log = logging.getLogger("scanrig.server")

DEFAULT_TCP_PORT = 7461
DEFAULT_HTTP_PORT = 7462


class _CoordEffects:
    """Bridges the sans-io coordinator onto the running event loop."""

    def __init__(self, host: "RigHost"):
        self.host = host

    def send(self, conn_id: int, msg) -> None:
        conn = self.host.conns.get(conn_id)
        if conn is not None:
            conn.send(encode_message(msg))

    def close(self, conn_id: int) -> None:
        conn = self.host.conns.get(conn_id)
        if conn is not None:
            conn.close()

    def set_timer(self, key: tuple, delay: float) -> None:
        def fire() -> None:
            self.host.core.on_timer(self.host.now(), key)

        self.host.loop.call_later(delay, fire)

    def emit(self, kind: str, **fields) -> None:
        entry = {"t": round(self.host.now(), 6), "kind": kind, **fields}
        log.debug("%s %s", kind, fields)
        self.host.bus.emit(entry)


class _Conn:
    """One accepted rig connection with a drained writer task."""

    def __init__(self, conn_id: int, writer: asyncio.StreamWriter):
        self.conn_id = conn_id
        self.writer = writer
        self.outbox: asyncio.Queue[bytes | None] = asyncio.Queue()
        self.task: asyncio.Task | None = None

    def send(self, data: bytes) -> None:
        self.outbox.put_nowait(data)

    def close(self) -> None:
        self.outbox.put_nowait(None)

    async def pump(self) -> None:
        try:
            while True:
                data = await self.outbox.get()
                if data is None:
                    break
                self.writer.write(data)
                await self.writer.drain()
        except (ConnectionError, asyncio.CancelledError):
            pass
        finally:
            self.writer.close()


class RigHost:
    def __init__(
        self,
        capture_root: str | Path,
        config: CoordinatorConfig | None = None,
        tcp_port: int = 0,
        http_port: int = 0,
    ):
        self.bus = EventBus()
        self.store = CaptureStore(capture_root)
        self.core = CoordinatorCore(config or CoordinatorConfig(), _CoordEffects(self), self.store)
        self.core.on_fleet_complete = self._fleet_done
        self.tcp_port = tcp_port
        self.http_port = http_port
        self.conns: dict[int, _Conn] = {}
        self.local_agents: list[AgentRuntime] = []
        self._conn_seq = itertools.count(1)
        self._fleet_waiters: dict[str, asyncio.Future] = {}
        self._tcp_server: asyncio.Server | None = None
        self._http: asyncio.Task | None = None
        self._epoch = time.time()

    @property
    def loop(self) -> asyncio.AbstractEventLoop:
        return asyncio.get_running_loop()

    def now(self) -> float:
        return time.time() - self._epoch

    async def start(self) -> None:
        self._tcp_server = await asyncio.start_server(self._handle, "127.0.0.1", self.tcp_port)
        self.tcp_port = self._tcp_server.sockets[0].getsockname()[1]
        self.core.start(self.now())
        log.info("rig port listening on %d", self.tcp_port)

    async def start_http(self) -> None:
        import uvicorn

        from .api import build_app

        config = uvicorn.Config(
            build_app(self),
            host="127.0.0.1",
            port=self.http_port,
            log_level="warning",
            lifespan="off",
        )
        server = uvicorn.Server(config)
        self._http = asyncio.create_task(server.serve())
        while not server.started and not self._http.done():
            await asyncio.sleep(0.02)
        if server.servers:
            self.http_port = server.servers[0].sockets[0].getsockname()[1]
        self._uvicorn = server

    async def stop(self) -> None:
        for agent in self.local_agents:
            await agent.stop()
        if self._tcp_server is not None:
            self._tcp_server.close()
            await self._tcp_server.wait_closed()
        for conn in list(self.conns.values()):
            conn.close()
        if self._http is not None:
            self._uvicorn.should_exit = True
            await self._http

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        conn_id = next(self._conn_seq)
        conn = _Conn(conn_id, writer)
        conn.task = asyncio.create_task(conn.pump())
        self.conns[conn_id] = conn
        decoder = FrameDecoder()
        try:
            while True:
                data = await reader.read(65536)
                if not data:
                    break
                try:
                    messages = decoder.feed(data)
                except ProtocolError as exc:
                    log.warning("conn %d: %s", conn_id, exc)
                    break
                for msg in messages:
                    self.core.on_message(conn_id, self.now(), msg)
        except ConnectionError:
            pass
        finally:
            self.core.on_disconnect(conn_id, self.now())
            conn.close()
            self.conns.pop(conn_id, None)

    # ---- operator entry points -------------------------------------------

    def spawn_local_agents(self, count: int, seed: int = 42, **overrides) -> None:
        """In-process mock fleet, one runtime per node."""
        for i in range(count):
            node_id, beam, slot = default_node(i)
            cfg = AgentConfig(node_id=node_id, beam=beam, slot=slot, rng_seed=seed + i,
                              **overrides)
            agent = AgentRuntime(
                cfg,
                "127.0.0.1",
                self.tcp_port,
                capture_backend=MockCaptureBackend(),
                command_backend=MockCommandBackend(cfg.node_id),
            )
            agent.start()
            self.local_agents.append(agent)

    def _fleet_done(self, job) -> None:
        fut = self._fleet_waiters.pop(job.job_id, None)
        if fut is not None and not fut.done():
            fut.set_result(job)

    async def run_fleet(self, command: str, targets: str = "all", limit: int | None = None,
                        timeout: float | None = None) -> dict:
        job = self.core.run_fleet(self.now(), command, targets, limit=limit, timeout=timeout)
        if not job.done:
            fut: asyncio.Future = self.loop.create_future()
            self._fleet_waiters[job.job_id] = fut
            await asyncio.wait_for(fut, (timeout or self.core.cfg.fleet_timeout) + 10.0)
        return job.report()

    async def wait_session(self, session_id: str, timeout: float = 120.0) -> dict:
        deadline = self.loop.time() + timeout
        while self.loop.time() < deadline:
            snap = self.core.session_snapshot(session_id)
            if snap is not None and snap["terminal"]:
                return snap
            await asyncio.sleep(0.05)
        raise TimeoutError(f"session {session_id} still running after {timeout}s")


async def _serve(args: argparse.Namespace) -> None:
    host = RigHost(args.capture_root, tcp_port=args.port, http_port=args.http_port)
    await host.start()
    await host.start_http()
    if args.agents:
        host.spawn_local_agents(args.agents, seed=args.seed)
    log.info("operator api on http://127.0.0.1:%d", host.http_port)
    print(f"rig tcp 127.0.0.1:{host.tcp_port}  api http://127.0.0.1:{host.http_port}", flush=True)
    try:
        await asyncio.Event().wait()
    finally:
        await host.stop()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="scanrig-server", description="Capture rig coordinator")
    parser.add_argument("--port", type=int, default=DEFAULT_TCP_PORT, help="rig TCP port")
    parser.add_argument("--http-port", type=int, default=DEFAULT_HTTP_PORT, help="operator HTTP port")
    parser.add_argument("--capture-root", default="captures", help="frame store directory")
    parser.add_argument("--agents", type=int, default=0, help="spawn N in-process mock agents")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        asyncio.run(_serve(args))
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
