"""Simulation run summary."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class SimReport:
    duration: float
    truncated: bool
    seed: int
    sessions: list[dict] = field(default_factory=list)
    fleet: list[dict] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    bytes_delivered: int = 0
    messages_delivered: int = 0
    peak_active_uplinks: int = 0
    capture_root: str = ""

    def to_dict(self, include_events: bool = True) -> dict:
        doc = {
            "duration": self.duration,
            "truncated": self.truncated,
            "seed": self.seed,
            "sessions": self.sessions,
            "fleet": self.fleet,
            "bytes_delivered": self.bytes_delivered,
            "messages_delivered": self.messages_delivered,
            "peak_active_uplinks": self.peak_active_uplinks,
            "capture_root": self.capture_root,
            "event_count": len(self.events),
        }
        if include_events:
            doc["events"] = self.events
        return doc

    def write_json(self, path: Path | str, include_events: bool = True) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(include_events), sort_keys=True, indent=2) + "\n"
        )

    def summary(self) -> str:
        lines = [
            f"virtual duration: {self.duration:.3f} s"
            + (" (truncated)" if self.truncated else ""),
            f"messages delivered: {self.messages_delivered}"
            f" ({self.bytes_delivered} payload bytes)",
            f"peak concurrent uplinks: {self.peak_active_uplinks}",
        ]
        for s in self.sessions:
            outcome = s.get("outcome", s["state"])
            lines.append(
                f"session {s['session_id']}: {outcome}"
                f" {s['delivered']}/{s['total']} frames"
                + (f", missing {len(s['missing'])}" if s["missing"] else "")
            )
        for j in self.fleet:
            statuses: dict[str, int] = {}
            for row in j["rows"]:
                statuses[row["status"]] = statuses.get(row["status"], 0) + 1
            rendered = ", ".join(f"{k}={v}" for k, v in sorted(statuses.items()))
            lines.append(
                f"fleet {j['job_id']}: {rendered}"
                f" (peak concurrency {j['peak_concurrency']})"
            )
        return "\n".join(lines)
