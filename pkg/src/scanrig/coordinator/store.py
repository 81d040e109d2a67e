"""Capture store: frames and manifests on disk.

Layout under the root:

    sessions/<session_id>/texture/<node_id>.ppm
    sessions/<session_id>/pattern/<node_id>.ppm
    sessions/<session_id>/manifest.json

Writes are atomic (temp file, fsync-free rename) and duplicate frames are
detected by (session, node, phase) so retransmits never clobber or double
up. Manifests serialize with sorted keys so equal captures are byte-equal.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class StoredFrame:
    node_id: str
    phase: str
    path: str  # relative to the store root
    byte_size: int
    checksum: str
    captured_at: float


class CaptureStore:
    def __init__(self, root: Path | str):
        self.root = Path(root)
        self._frames: dict[str, dict[tuple[str, str], StoredFrame]] = {}

    def session_dir(self, session_id: str) -> Path:
        return self.root / "sessions" / session_id

    def has_frame(self, session_id: str, node_id: str, phase: str) -> bool:
        return (node_id, phase) in self._frames.get(session_id, {})

    def frame_count(self, session_id: str) -> int:
        return len(self._frames.get(session_id, {}))

    def store_frame(
        self,
        session_id: str,
        node_id: str,
        phase: str,
        data: bytes,
        captured_at: float,
    ) -> StoredFrame:
        """Write one frame; raises FileExistsError on a duplicate key."""
        key = (node_id, phase)
        frames = self._frames.setdefault(session_id, {})
        if key in frames:
            raise FileExistsError(f"{session_id}/{phase}/{node_id} already stored")
        rel = Path("sessions") / session_id / phase / f"{node_id}.ppm"
        target = self.root / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_suffix(".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, target)
        frame = StoredFrame(
            node_id=node_id,
            phase=phase,
            path=str(rel),
            byte_size=len(data),
            checksum=hashlib.sha256(data).hexdigest(),
            captured_at=captured_at,
        )
        frames[key] = frame
        return frame

    def write_manifest(
        self,
        session_id: str,
        outcome: str,
        started_at: float,
        finished_at: float,
        light_level: int,
        pattern: dict,
        missing: list[tuple[str, str]],
    ) -> Path:
        frames = self._frames.get(session_id, {})
        doc = {
            "session_id": session_id,
            "outcome": outcome,
            "started_at": started_at,
            "finished_at": finished_at,
            "light_level": light_level,
            "pattern": pattern,
            "frames": [
                {
                    "node_id": f.node_id,
                    "phase": f.phase,
                    "path": f.path,
                    "bytes": f.byte_size,
                    "sha256": f.checksum,
                    "captured_at": f.captured_at,
                }
                for _, f in sorted(frames.items())
            ],
            "missing": [[node, phase] for node, phase in sorted(missing)],
        }
        path = self.session_dir(session_id) / "manifest.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
        os.replace(tmp, path)
        return path

    def load_manifest(self, session_id: str) -> dict:
        return json.loads((self.session_dir(session_id) / "manifest.json").read_text())

    def verify_manifest(self, session_id: str) -> list[tuple[str, bool]]:
        """Re-hash every frame on disk against its manifest row."""
        doc = self.load_manifest(session_id)
        results = []
        for row in doc["frames"]:
            path = self.root / row["path"]
            ok = False
            if path.exists():
                data = path.read_bytes()
                ok = (
                    len(data) == row["bytes"]
                    and hashlib.sha256(data).hexdigest() == row["sha256"]
                )
            results.append((row["path"], ok))
        return results
