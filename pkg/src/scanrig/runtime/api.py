"""HTTP operator surface over a running RigHost."""

from __future__ import annotations

import asyncio
import json

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse

from ..coordinator.core import SessionBusy
from ..coordinator.fleet import EmptySelection, FleetRejected
from ..coordinator.registry import UnknownNode
from ..lighting import parse_light_level
from ..protocol import PatternRef


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _pattern_from(body: dict) -> PatternRef:
    allowed = {"kind", "seed", "density", "width", "height"}
    extra = set(body) - allowed
    if extra:
        raise ValueError(f"unknown pattern fields: {sorted(extra)}")
    return PatternRef(**body)


def build_app(host) -> FastAPI:
    app = FastAPI(title="scanrig", docs_url=None, redoc_url=None)
    # the web console is served separately, so the API must allow cross-origin calls
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/nodes")
    async def nodes() -> dict:
        return {"nodes": host.core.nodes_snapshot()}

    @app.post("/sessions")
    async def start_session(request: Request):
        body = await request.json() if await request.body() else {}
        try:
            level = parse_light_level(body.get("light_level", 100))
            pattern = _pattern_from(body["pattern"]) if body.get("pattern") else None
            session = host.core.start_session(host.now(), light_level=int(level), pattern=pattern)
        except SessionBusy as exc:
            return _error(409, str(exc))
        except (ValueError, TypeError) as exc:
            return _error(400, str(exc))
        return {"session_id": session.session_id}

    @app.get("/sessions/{sid}")
    async def session(sid: str):
        snap = host.core.session_snapshot(sid)
        if snap is None:
            return _error(404, f"no session {sid}")
        return snap

    @app.post("/lights")
    async def lights(request: Request):
        body = await request.json()
        try:
            level = parse_light_level(body["level"])
        except (KeyError, ValueError, TypeError) as exc:
            return _error(400, f"level must be one of 0, 50, 100: {exc}")
        return host.core.set_lights(host.now(), int(level))

    @app.post("/pattern")
    async def pattern(request: Request):
        body = await request.json()
        try:
            ref = _pattern_from(body)
        except (ValueError, TypeError) as exc:
            return _error(400, str(exc))
        return host.core.project_pattern(host.now(), ref)

    @app.post("/fleet")
    async def fleet(request: Request):
        body = await request.json()
        command = body.get("command")
        if not command or not isinstance(command, str):
            return _error(400, "command is required")
        try:
            report = await host.run_fleet(
                command,
                targets=body.get("targets", "all"),
                limit=body.get("limit"),
                timeout=body.get("timeout"),
            )
        except FleetRejected as exc:
            return _error(409, str(exc))
        except (EmptySelection, UnknownNode, ValueError) as exc:
            return _error(400, str(exc))
        return report

    @app.get("/events")
    async def events():
        queue = host.bus.subscribe()

        async def stream():
            snapshot = {
                "t": round(host.now(), 6),
                "kind": "snapshot",
                "nodes": host.core.nodes_snapshot(),
                "session": (
                    host.core.session_snapshot(host.core.current_session_id)
                    if host.core.current_session_id
                    else None
                ),
            }
            try:
                yield json.dumps(snapshot, sort_keys=True) + "\n"
                while True:
                    try:
                        entry = await asyncio.wait_for(queue.get(), timeout=15.0)
                    except asyncio.TimeoutError:
                        yield json.dumps({"kind": "keepalive"}) + "\n"
                        continue
                    yield json.dumps(entry, sort_keys=True) + "\n"
            finally:
                host.bus.unsubscribe(queue)

        return StreamingResponse(stream(), media_type="application/x-ndjson")

    return app
