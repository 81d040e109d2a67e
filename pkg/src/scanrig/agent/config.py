"""Per-node agent configuration."""

from __future__ import annotations

from dataclasses import dataclass

CAMERAS_PER_BEAM = 4


@dataclass(frozen=True)
class AgentConfig:
    node_id: str
    beam: int
    slot: int
    reconnect_base: float = 2.0  # seconds between connection attempts
    reconnect_jitter: float = 0.1  # fraction of base, spread uniformly
    heartbeat_period: float = 1.0
    exposure_time: float = 0.05  # shutter plus sensor readout
    staging_write_rate: float = 10e6  # bytes/s onto the SD card
    staging_read_rate: float = 20e6  # bytes/s back off the card
    chunk_size: int = 65536
    frame_width: int = 1920
    frame_height: int = 1080
    fleet_exec_time: float = 0.05  # modeled duration of a maintenance command
    rng_seed: int = 0

    def __post_init__(self):
        if not self.node_id:
            raise ValueError("node_id must be non-empty")
        if self.beam < 0 or self.slot < 0:
            raise ValueError("beam and slot must be non-negative")
        if self.reconnect_base <= 0:
            raise ValueError("reconnect_base must be positive")
        if not 0.0 <= self.reconnect_jitter < 1.0:
            raise ValueError("reconnect_jitter must be within [0, 1)")
        if self.heartbeat_period <= 0:
            raise ValueError("heartbeat_period must be positive")
        if self.staging_write_rate <= 0 or self.staging_read_rate <= 0:
            raise ValueError("staging rates must be positive")
        if self.chunk_size < 1 or self.chunk_size > 65536:
            raise ValueError("chunk_size must be within [1, 65536]")
        if self.frame_width < 1 or self.frame_height < 1:
            raise ValueError("frame dimensions must be positive")


def default_node(index: int) -> tuple[str, int, int]:
    """Standard addressing: camera index -> (node_id, beam, slot)."""
    if index < 0:
        raise ValueError("node index must be non-negative")
    return (f"n{index:02d}", index // CAMERAS_PER_BEAM, index % CAMERAS_PER_BEAM)
