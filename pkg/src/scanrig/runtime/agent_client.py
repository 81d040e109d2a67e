"""Asyncio shell around the sans-io agent core."""

from __future__ import annotations

import argparse
import asyncio
import logging
import time

from ..agent.backends import MockCaptureBackend, MockCommandBackend, ShellCommandBackend
from ..agent.config import AgentConfig
from ..agent.core import AgentCore
from ..protocol import FrameDecoder, ProtocolError, encode_message

log = logging.getLogger("scanrig.agent")


class AgentRuntime:
    """Owns the socket and timers; all decisions stay in AgentCore."""

    def __init__(self, config: AgentConfig, host: str, port: int,
                 capture_backend=None, command_backend=None):
        self.config = config
        self.host = host
        self.port = port
        self.core = AgentCore(
            config,
            self,
            capture_backend=capture_backend or MockCaptureBackend(),
            command_backend=command_backend or MockCommandBackend(config.node_id),
        )
        self._epoch = time.time()
        self._writer: asyncio.StreamWriter | None = None
        self._outbox: asyncio.Queue[bytes | None] = asyncio.Queue()
        self._tasks: set[asyncio.Task] = set()
        self._stopping = False

    def now(self) -> float:
        return time.time() - self._epoch

    def _spawn(self, coro) -> None:
        task = asyncio.get_running_loop().create_task(coro)
        self._tasks.add(task)
        task.add_done_callback(self._tasks.discard)

    # ---- AgentEffects ----------------------------------------------------

    def connect(self) -> None:
        self._spawn(self._dial())

    def send(self, msg) -> None:
        self._outbox.put_nowait(encode_message(msg))

    def set_timer(self, key: tuple, delay: float) -> None:
        loop = asyncio.get_running_loop()
        loop.call_later(delay, lambda: self.core.on_timer(self.now(), key))

    def emit(self, kind: str, **fields) -> None:
        log.debug("%s %s %s", self.config.node_id, kind, fields)

    # ---- socket plumbing -------------------------------------------------

    async def _dial(self) -> None:
        try:
            reader, writer = await asyncio.open_connection(self.host, self.port)
        except OSError as exc:
            log.info("%s: connect failed: %s", self.config.node_id, exc)
            self.core.on_connect_result(self.now(), False)
            return
        self._writer = writer
        self._outbox = asyncio.Queue()
        self._spawn(self._pump(writer))
        self.core.on_connect_result(self.now(), True)
        await self._read_loop(reader)

    async def _pump(self, writer: asyncio.StreamWriter) -> None:
        try:
            while True:
                data = await self._outbox.get()
                if data is None:
                    break
                writer.write(data)
                await writer.drain()
        except (ConnectionError, asyncio.CancelledError):
            pass

    async def _read_loop(self, reader: asyncio.StreamReader) -> None:
        decoder = FrameDecoder()
        try:
            while True:
                data = await reader.read(65536)
                if not data:
                    break
                try:
                    messages = decoder.feed(data)
                except ProtocolError as exc:
                    log.warning("%s: bad frame from coordinator: %s", self.config.node_id, exc)
                    break
                for msg in messages:
                    self.core.on_message(self.now(), msg)
        except ConnectionError:
            pass
        finally:
            self._close_writer()
            if not self._stopping:
                self.core.on_disconnect(self.now())

    def _close_writer(self) -> None:
        if self._writer is not None:
            self._outbox.put_nowait(None)
            self._writer.close()
            self._writer = None

    # ---- lifecycle -------------------------------------------------------

    def start(self) -> None:
        self.core.start(self.now())

    async def stop(self) -> None:
        self._stopping = True
        self._close_writer()
        for task in list(self._tasks):
            task.cancel()
        await asyncio.gather(*self._tasks, return_exceptions=True)


async def _run(args: argparse.Namespace) -> None:
    cfg = AgentConfig(node_id=args.node_id, beam=args.beam, slot=args.slot, rng_seed=args.seed)
    command_backend = ShellCommandBackend(cfg.node_id) if args.shell else None
    agent = AgentRuntime(cfg, args.host, args.port, command_backend=command_backend)
    agent.start()
    try:
        await asyncio.Event().wait()
    finally:
        await agent.stop()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="scanrig-agent", description="Capture node agent")
    parser.add_argument("--node-id", required=True)
    parser.add_argument("--beam", type=int, required=True)
    parser.add_argument("--slot", type=int, required=True)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=7461)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--shell", action="store_true", help="run fleet commands in a real shell")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        asyncio.run(_run(args))
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
