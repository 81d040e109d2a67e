"""Operator command line.

Talks to a running coordinator over its HTTP port; `plan` and `sim` work
offline.  Exit codes: 0 success, 2 usage error, 3 coordinator unreachable,
4 partial failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import httpx

from .planner import (
    DegenerateGeometry,
    InfeasibleBudget,
    PowerBudget,
    RigPlan,
    TransferModel,
    WireSpec,
    beam_positions,
    end_voltage,
    max_wire_length,
    min_adjacent_angle,
    transfer_time_window,
)

DEFAULT_URL = "http://127.0.0.1:7462"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_UNREACHABLE = 3
EXIT_PARTIAL = 4


def _client(args: argparse.Namespace) -> httpx.Client:
    return httpx.Client(base_url=args.coordinator, timeout=args.timeout)


def _fail_unreachable(args: argparse.Namespace, exc: Exception) -> int:
    print(f"coordinator unreachable at {args.coordinator}: {exc}", file=sys.stderr)
    return EXIT_UNREACHABLE


def _http_error(resp: httpx.Response) -> int:
    try:
        detail = resp.json().get("error", resp.text)
    except ValueError:
        detail = resp.text
    print(f"error {resp.status_code}: {detail}", file=sys.stderr)
    return EXIT_USAGE


# ---- status ----------------------------------------------------------------

_STATE_GLYPH = {"connected": "C", "lost": "L", "registered": "r"}


def cmd_status(args: argparse.Namespace) -> int:
    try:
        with _client(args) as client:
            if args.follow:
                return _follow(args, client)
            resp = client.get("/nodes")
    except httpx.TransportError as exc:
        return _fail_unreachable(args, exc)
    if resp.status_code != 200:
        return _http_error(resp)
    nodes = resp.json()["nodes"]
    if args.json:
        print(json.dumps(nodes, indent=2, sort_keys=True))
        return EXIT_OK
    if not nodes:
        print("no nodes registered")
        return EXIT_OK
    beams: dict[int, list[dict]] = {}
    for node in nodes:
        beams.setdefault(node["beam"], []).append(node)
    for beam in sorted(beams):
        row = sorted(beams[beam], key=lambda n: n["slot"])
        cells = " ".join(
            f"{n['node_id']}:{_STATE_GLYPH.get(n['state'], '?')}" for n in row
        )
        print(f"beam {beam:02d}  {cells}")
    total = len(nodes)
    up = sum(1 for n in nodes if n["state"] == "connected")
    print(f"{up}/{total} connected")
    return EXIT_OK


def _follow(args: argparse.Namespace, client: httpx.Client) -> int:
    with client.stream("GET", "/events", timeout=None) as resp:
        for line in resp.iter_lines():
            if not line:
                continue
            entry = json.loads(line)
            if entry.get("kind") == "keepalive":
                continue
            if args.json:
                print(json.dumps(entry, sort_keys=True), flush=True)
            else:
                t = entry.pop("t", None)
                kind = entry.pop("kind", "?")
                rest = " ".join(f"{k}={v}" for k, v in sorted(entry.items()))
                stamp = f"{t:10.3f}" if isinstance(t, (int, float)) else " " * 10
                print(f"{stamp}  {kind:<20} {rest}", flush=True)
    return EXIT_OK


# ---- capture ---------------------------------------------------------------

def cmd_capture(args: argparse.Namespace) -> int:
    body: dict = {"light_level": args.light}
    if args.pattern_kind:
        body["pattern"] = {
            "kind": args.pattern_kind,
            "seed": args.seed,
            "density": args.density,
        }
    try:
        with _client(args) as client:
            resp = client.post("/sessions", json=body)
            if resp.status_code != 200:
                return _http_error(resp)
            sid = resp.json()["session_id"]
            if args.no_wait:
                print(sid)
                return EXIT_OK
            deadline = time.monotonic() + args.wait
            while time.monotonic() < deadline:
                snap = client.get(f"/sessions/{sid}").json()
                if snap.get("terminal"):
                    return _print_session(args, snap)
                time.sleep(0.2)
    except httpx.TransportError as exc:
        return _fail_unreachable(args, exc)
    print(f"timed out waiting for session {sid}", file=sys.stderr)
    return EXIT_PARTIAL


def _print_session(args: argparse.Namespace, snap: dict) -> int:
    if args.json:
        print(json.dumps(snap, indent=2, sort_keys=True))
    else:
        print(f"session {snap['session_id']}: {snap['outcome']}")
        print(f"  frames {snap['delivered']}/{snap['total']}"
              f"  duration {snap.get('duration', 0.0):.2f}s")
        for node, phase in snap.get("missing", []):
            print(f"  missing {node} {phase}")
    return EXIT_OK if snap.get("outcome") == "complete" else EXIT_PARTIAL


# ---- light / pattern -------------------------------------------------------

def cmd_light(args: argparse.Namespace) -> int:
    try:
        with _client(args) as client:
            resp = client.post("/lights", json={"level": args.level})
    except httpx.TransportError as exc:
        return _fail_unreachable(args, exc)
    if resp.status_code != 200:
        return _http_error(resp)
    out = resp.json()
    if args.json:
        print(json.dumps(out, indent=2, sort_keys=True))
    else:
        print(f"{out['op_id']}: level {out['level']} sent to {len(out['nodes'])} nodes")
    return EXIT_OK


def cmd_pattern(args: argparse.Namespace) -> int:
    body = {"kind": args.kind, "seed": args.seed, "density": args.density}
    try:
        with _client(args) as client:
            resp = client.post("/pattern", json=body)
    except httpx.TransportError as exc:
        return _fail_unreachable(args, exc)
    if resp.status_code != 200:
        return _http_error(resp)
    out = resp.json()
    if args.json:
        print(json.dumps(out, indent=2, sort_keys=True))
    else:
        print(f"{out['op_id']}: {out['pattern']} pattern sent to {len(out['nodes'])} nodes")
    return EXIT_OK


# ---- fleet -----------------------------------------------------------------

def cmd_fleet(args: argparse.Namespace) -> int:
    body: dict = {"command": args.command, "targets": args.targets}
    if args.limit is not None:
        body["limit"] = args.limit
    if args.fleet_timeout is not None:
        body["timeout"] = args.fleet_timeout
    try:
        with _client(args) as client:
            resp = client.post("/fleet", json=body, timeout=None)
    except httpx.TransportError as exc:
        return _fail_unreachable(args, exc)
    if resp.status_code != 200:
        return _http_error(resp)
    report = resp.json()
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        for row in report["rows"]:
            line = f"{row['node_id']:<6} {row['status']:<12}"
            if row["status"] == "ok":
                line += (row.get("output") or "").strip().splitlines()[0] if row.get("output") else ""
            elif row.get("error"):
                line += row["error"]
            print(line)
        bad = sum(1 for r in report["rows"] if r["status"] != "ok")
        print(f"{len(report['rows']) - bad}/{len(report['rows'])} ok"
              f"  peak concurrency {report['peak_concurrency']}")
    if any(r["status"] != "ok" for r in report["rows"]):
        return EXIT_PARTIAL
    return EXIT_OK


# ---- plan ------------------------------------------------------------------

def cmd_plan(args: argparse.Namespace) -> int:
    out: dict
    if args.plan_cmd == "voltage":
        wire = WireSpec(length=args.length, cross_section_mm2=args.area,
                        current=args.current, supply_voltage=args.supply)
        volts = end_voltage(wire)
        out = {"end_voltage": volts}
        text = f"end voltage: {volts:.4f} V"
    elif args.plan_cmd == "wire-length":
        wire = WireSpec(cross_section_mm2=args.area, current=args.current,
                        supply_voltage=args.supply)
        try:
            length = max_wire_length(wire, PowerBudget(args.min_voltage))
        except InfeasibleBudget as exc:
            print(f"infeasible: {exc}", file=sys.stderr)
            return EXIT_USAGE
        out = {"max_length_m": length}
        text = f"max wire length: {length:.4f} m"
    elif args.plan_cmd == "beams":
        try:
            plan = RigPlan(width=args.width, depth=args.depth, beams=args.beams,
                           entrance_gap_slots=args.gap)
            points = beam_positions(plan)
            angle = min_adjacent_angle(points, exclude_largest_gap=args.gap > 0)
        except (DegenerateGeometry, ValueError) as exc:
            print(f"invalid rig: {exc}", file=sys.stderr)
            return EXIT_USAGE
        out = {
            "positions": [[round(x, 6), round(y, 6)] for x, y in points],
            "min_adjacent_angle_deg": angle,
            "cameras": plan.camera_count,
        }
        text = "\n".join(
            [f"beam {i:02d}: ({x:8.3f}, {y:8.3f})" for i, (x, y) in enumerate(points)]
            + [f"min adjacent angle: {angle:.3f} deg", f"cameras: {plan.camera_count}"]
        )
    else:  # transfer
        model = TransferModel(
            node_count=args.nodes,
            bytes_per_image=int(args.bytes_per_image),
            images_per_node=args.images,
            nic_bandwidth=args.nic,
            sd_read_rate=args.sd_read,
            fixed_overhead=args.overhead,
        )
        lo, hi = transfer_time_window(model)
        out = {"window_s": [lo, hi]}
        text = f"expected transfer window: {lo:.3f} .. {hi:.3f} s"
    if args.json:
        print(json.dumps(out, indent=2, sort_keys=True))
    else:
        print(text)
    return EXIT_OK


# ---- sim -------------------------------------------------------------------

def cmd_sim(args: argparse.Namespace) -> int:
    from .simulator.scenario import ScenarioError, build_sim, load_scenario

    try:
        doc = load_scenario(args.scenario)
        sim, until = build_sim(doc, capture_root=args.capture_root)
        report = sim.run(until)
    except ScenarioError as exc:
        print(f"bad scenario: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        report.write_json(args.out, include_events=args.events)
        print(f"report written to {args.out}")
    if args.json:
        print(json.dumps(report.to_dict(include_events=False), indent=2, sort_keys=True))
    else:
        print(report.summary())
    failed = any(s.get("outcome") != "complete" for s in report.to_dict()["sessions"])
    return EXIT_PARTIAL if failed else EXIT_OK


# ---- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scanrig", description="Capture rig operator console"
    )
    parser.add_argument(
        "--coordinator",
        default=os.environ.get("SCANRIG_COORDINATOR", DEFAULT_URL),
        help="coordinator base URL (env SCANRIG_COORDINATOR)",
    )
    parser.add_argument("--timeout", type=float, default=10.0, help="HTTP timeout")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("status", help="show the node grid")
    p.add_argument("--json", action="store_true")
    p.add_argument("--follow", action="store_true", help="stream live events")
    p.set_defaults(func=cmd_status)

    p = sub.add_parser("capture", help="run a full capture session")
    p.add_argument("--light", type=int, choices=[0, 50, 100], default=100)
    p.add_argument("--pattern-kind", choices=["dots", "black"], default="dots")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--no-wait", action="store_true")
    p.add_argument("--wait", type=float, default=120.0, help="seconds to wait for the report")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_capture)

    p = sub.add_parser("light", help="set working lights")
    p.add_argument("level", type=int, choices=[0, 50, 100])
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_light)

    p = sub.add_parser("pattern", help="project a pattern outside a session")
    p.add_argument("--kind", choices=["dots", "black"], default="dots")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_pattern)

    p = sub.add_parser("fleet", help="run a command across nodes")
    p.add_argument("command")
    p.add_argument("--targets", default="all", help="all | nodes:a,b | beams:lo-hi")
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--fleet-timeout", type=float, default=None, dest="fleet_timeout")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_fleet)

    p = sub.add_parser("plan", help="offline rig calculators")
    plan_sub = p.add_subparsers(dest="plan_cmd", required=True)

    q = plan_sub.add_parser("voltage", help="far-end voltage for a supply run")
    q.add_argument("--length", type=float, required=True, help="wire length, m")
    q.add_argument("--area", type=float, default=0.27, help="cross section, mm^2")
    q.add_argument("--current", type=float, default=1.25, help="amps")
    q.add_argument("--supply", type=float, default=5.0, help="source volts")
    q.add_argument("--json", action="store_true")
    q.set_defaults(func=cmd_plan)

    q = plan_sub.add_parser("wire-length", help="longest run that stays in budget")
    q.add_argument("--area", type=float, default=0.27)
    q.add_argument("--current", type=float, default=1.25)
    q.add_argument("--supply", type=float, default=5.0)
    q.add_argument("--min-voltage", type=float, default=4.75, dest="min_voltage")
    q.add_argument("--json", action="store_true")
    q.set_defaults(func=cmd_plan)

    q = plan_sub.add_parser("beams", help="beam placement for a room")
    q.add_argument("--width", type=float, required=True)
    q.add_argument("--depth", type=float, required=True)
    q.add_argument("--beams", type=int, default=24)
    q.add_argument("--gap", type=int, default=0, help="entrance gap, in beam slots")
    q.add_argument("--json", action="store_true")
    q.set_defaults(func=cmd_plan)

    q = plan_sub.add_parser("transfer", help="expected fleet transfer window")
    q.add_argument("--nodes", type=int, default=96)
    q.add_argument("--bytes-per-image", type=float, default=2e6, dest="bytes_per_image")
    q.add_argument("--images", type=int, default=2)
    q.add_argument("--nic", type=float, default=125e6)
    q.add_argument("--sd-read", type=float, default=15e6, dest="sd_read")
    q.add_argument("--overhead", type=float, default=0.5)
    q.add_argument("--json", action="store_true")
    q.set_defaults(func=cmd_plan)

    p = sub.add_parser("sim", help="run a simulated rig scenario")
    sim_sub = p.add_subparsers(dest="sim_cmd", required=True)
    q = sim_sub.add_parser("run", help="execute a scenario file")
    q.add_argument("--scenario", required=True)
    q.add_argument("--out", default=None, help="write the JSON report here")
    q.add_argument("--events", action="store_true", help="include the event log in --out")
    q.add_argument("--capture-root", default=None)
    q.add_argument("--json", action="store_true")
    q.set_defaults(func=cmd_sim)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if code is not None else 0
    return args.func(args)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
