"""Scenario files: declarative cluster runs for the sim CLI and tests.

A scenario is JSON:

    {
      "nodes": 8, "seed": 42,
      "latency": 0.001, "link_bandwidth": 125e6, "server_nic": 125e6,
      "frame_width": 320, "frame_height": 240,
      "agent": {"exposure_time": 0.05},
      "coordinator": {"ack_deadline": 5.0},
      "until": null,
      "actions": [
        {"t": 0.5, "op": "capture", "light_level": 100,
         "pattern": {"kind": "dots", "seed": 7, "density": 0.5,
                     "width": 64, "height": 64}},
        {"t": 9.0, "op": "fleet", "command": "uptime", "selector": "all",
         "limit": 8}
      ],
      "faults": [
        {"t": 1.0, "node": "n03", "kind": "crash"},
        {"t": 4.0, "node": "n03", "kind": "restart"}
      ]
    }
"""

from __future__ import annotations

import json
from pathlib import Path

from ..protocol.messages import PatternRef
from .cluster import FAULT_KINDS, ClusterSim


class ScenarioError(ValueError):
    pass


def _pattern_from(doc: dict | None) -> PatternRef | None:
    if doc is None:
        return None
    try:
        return PatternRef(**doc)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad pattern: {exc}") from None


def load_scenario(path: Path | str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    return doc


def build_sim(doc: dict, capture_root=None) -> tuple[ClusterSim, float | None]:
    """Construct a ClusterSim with the scenario's actions scheduled."""
    kwargs = {}
    for key in (
        "nodes",
        "seed",
        "latency",
        "link_bandwidth",
        "server_nic",
        "frame_width",
        "frame_height",
        "settle",
        "max_virtual",
    ):
        if key in doc:
            kwargs[key] = doc[key]
    sim = ClusterSim(
        capture_root=capture_root,
        agent_overrides=doc.get("agent"),
        coord_overrides=doc.get("coordinator"),
        **kwargs,
    )
    for i, action in enumerate(doc.get("actions", [])):
        if not isinstance(action, dict) or "t" not in action or "op" not in action:
            raise ScenarioError(f"action {i}: needs t and op")
        t, op = action["t"], action["op"]
        if op == "capture":
            sim.schedule_capture(
                t,
                light_level=action.get("light_level", 100),
                pattern=_pattern_from(action.get("pattern")),
            )
        elif op == "lights":
            if "level" not in action:
                raise ScenarioError(f"action {i}: lights needs level")
            sim.schedule_lights(t, action["level"])
        elif op == "pattern":
            pattern = _pattern_from(action.get("pattern"))
            if pattern is None:
                raise ScenarioError(f"action {i}: pattern op needs a pattern")
            sim.schedule_pattern(t, pattern)
        elif op == "fleet":
            if "command" not in action:
                raise ScenarioError(f"action {i}: fleet needs command")
            sim.schedule_fleet(
                t,
                action["command"],
                selector=action.get("selector", "all"),
                limit=action.get("limit"),
                timeout=action.get("timeout"),
            )
        else:
            raise ScenarioError(f"action {i}: unknown op {op!r}")
    for i, fault in enumerate(doc.get("faults", [])):
        if not isinstance(fault, dict) or not {"t", "node", "kind"} <= set(fault):
            raise ScenarioError(f"fault {i}: needs t, node, kind")
        if fault["kind"] not in FAULT_KINDS:
            raise ScenarioError(f"fault {i}: kind must be one of {FAULT_KINDS}")
        sim.inject_fault(fault["t"], fault["node"], fault["kind"])
    return sim, doc.get("until")
