"""Fleet maintenance jobs: target selection and result bookkeeping.

Scheduling (dispatch windows, timeouts) lives in the coordinator core, which
owns timers; this module keeps the job value types and the selector grammar:

    all                  every node ever registered
    nodes:n01,n05        explicit list
    beams:3-7            every node on those beams (inclusive range)
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .registry import Registry, UnknownNode


class EmptySelection(ValueError):
    """Selector matched no nodes."""


class FleetRejected(RuntimeError):
    """A capture session is active; maintenance must wait."""


def parse_targets(selector: str, registry: Registry) -> list[str]:
    selector = selector.strip()
    if selector == "all":
        nodes = registry.known_ids()
    elif selector.startswith("nodes:"):
        nodes = []
        for raw in selector[len("nodes:") :].split(","):
            node_id = raw.strip()
            if not node_id:
                continue
            if node_id not in registry.nodes:
                raise UnknownNode(node_id)
            nodes.append(node_id)
    elif selector.startswith("beams:"):
        spec = selector[len("beams:") :]
        lo, _, hi = spec.partition("-")
        try:
            lo_i = int(lo)
            hi_i = int(hi) if hi else lo_i
        except ValueError:
            raise ValueError(f"bad beam range {spec!r}") from None
        if hi_i < lo_i:
            raise ValueError(f"bad beam range {spec!r}")
        nodes = sorted(
            r.node_id for r in registry.nodes.values() if lo_i <= r.beam <= hi_i
        )
    else:
        raise ValueError(f"unknown selector {selector!r}")
    if not nodes:
        raise EmptySelection(f"selector {selector!r} matched no nodes")
    return nodes


@dataclass
class FleetRow:
    node_id: str
    status: str  # ok, failed, unreachable, timeout
    exit_code: int | None = None
    output: str = ""
    error: str = ""


@dataclass
class FleetJob:
    job_id: str
    command: str
    targets: list[str]
    limit: int
    timeout: float
    started_at: float
    queue: list[str] = field(default_factory=list)
    pending: set[str] = field(default_factory=set)
    rows: dict[str, FleetRow] = field(default_factory=dict)
    peak_concurrency: int = 0
    finished_at: float | None = None

    @property
    def done(self) -> bool:
        return not self.queue and not self.pending

    def report(self) -> dict:
        return {
            "job_id": self.job_id,
            "command": self.command,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "peak_concurrency": self.peak_concurrency,
            "rows": [
                {
                    "node_id": r.node_id,
                    "status": r.status,
                    "exit_code": r.exit_code,
                    "output": r.output,
                    "error": r.error,
                }
                for _, r in sorted(self.rows.items())
            ],
        }
