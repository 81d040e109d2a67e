"""On-node frame staging, modeling the SD card between capture and transfer."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class FrameMetadata:
    session_id: str
    node_id: str
    phase: str
    width: int
    height: int
    byte_size: int
    checksum: str  # sha256 hex
    captured_at: float


@dataclass(frozen=True)
class StagedFrame:
    meta: FrameMetadata
    data: bytes


@dataclass
class StagingArea:
    """Frames captured but not yet confirmed delivered, keyed by
    (session_id, phase). A node captures each phase at most once per session,
    so the key is unique; delivery confirmation removes the entry."""

    frames: dict[tuple[str, str], StagedFrame] = field(default_factory=dict)

    def put(self, frame: StagedFrame) -> None:
        self.frames[(frame.meta.session_id, frame.meta.phase)] = frame

    def get(self, key: tuple[str, str]) -> StagedFrame | None:
        return self.frames.get(key)

    def remove(self, key: tuple[str, str]) -> None:
        self.frames.pop(key, None)

    def keys_in_capture_order(self) -> list[tuple[str, str]]:
        return sorted(self.frames, key=lambda k: (self.frames[k].meta.captured_at, k))

    def __contains__(self, key: tuple[str, str]) -> bool:
        return key in self.frames

    def __len__(self) -> int:
        return len(self.frames)
