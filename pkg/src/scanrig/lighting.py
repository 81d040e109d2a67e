"""LED strip control and projector pattern synthesis.

The physical rig drives its LED strips through six PWM controllers, four
stripes each. Software models that fan-out so partial failures name the
controller that missed the command. Patterns are deterministic grayscale
images so every projector (and every test) regenerates identical pixels from
a seed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .protocol.messages import LIGHT_LEVELS, PatternRef
from .rng import u64_stream

STRIPES_PER_CONTROLLER = 4
DEFAULT_STRIPE_COUNT = 24


class LightLevel(enum.IntEnum):
    """Supported brightness steps, percent of full drive."""

    OFF = 0
    HALF = 50
    FULL = 100


def parse_light_level(value: int) -> LightLevel:
    try:
        return LightLevel(value)
    except ValueError:
        raise ValueError(f"light level must be one of {LIGHT_LEVELS}, got {value!r}") from None


def controller_for_stripe(stripe: int, stripe_count: int = DEFAULT_STRIPE_COUNT) -> tuple[int, int]:
    """Map a stripe index onto (controller, channel).

    Stripes are numbered around the frame; each controller drives four
    consecutive stripes.
    """
    if not 0 <= stripe < stripe_count:
        raise IndexError(f"stripe {stripe} outside [0, {stripe_count})")
    return divmod(stripe, STRIPES_PER_CONTROLLER)


def controller_count(stripe_count: int = DEFAULT_STRIPE_COUNT) -> int:
    if stripe_count < 1 or stripe_count % STRIPES_PER_CONTROLLER:
        raise ValueError(f"stripe count must be a positive multiple of {STRIPES_PER_CONTROLLER}")
    return stripe_count // STRIPES_PER_CONTROLLER


@dataclass
class ControllerAck:
    controller: int
    ok: bool
    level: int
    error: str = ""


class MockLightController:
    """Records levels it was asked to apply; can be marked unreachable."""

    def __init__(self, index: int):
        self.index = index
        self.reachable = True
        self.applied: list[int] = []

    def apply(self, level: LightLevel) -> None:
        if not self.reachable:
            raise ConnectionError(f"controller {self.index} unreachable")
        self.applied.append(int(level))


@dataclass
class ControllerBank:
    """All PWM controllers of one rig; set_level fans out and reports per
    controller instead of raising, because one dead controller must not keep
    the rest of the ring dark."""

    controllers: list[MockLightController] = field(
        default_factory=lambda: [MockLightController(i) for i in range(controller_count())]
    )

    def set_level(self, level: int) -> list[ControllerAck]:
        lv = parse_light_level(level)
        acks = []
        for ctl in self.controllers:
            try:
                ctl.apply(lv)
                acks.append(ControllerAck(ctl.index, True, int(lv)))
            except ConnectionError as exc:
                acks.append(ControllerAck(ctl.index, False, int(lv), error=f"ControllerUnreachable: {exc}"))
        return acks


def pattern_pixels(ref: PatternRef) -> np.ndarray:
    """Pixel matrix (height x width, uint8) for a pattern reference.

    Random-dot patterns draw one u64 per pixel in row-major order; a pixel is
    white when its draw falls below density * 2**64, so the expected white
    fraction equals the density exactly.
    """
    if ref.kind == "black":
        return np.zeros((ref.height, ref.width), dtype=np.uint8)
    threshold = int(ref.density * (1 << 64))
    draws = u64_stream(ref.seed, ref.width * ref.height)
    white = draws < np.uint64(min(threshold, (1 << 64) - 1))
    if threshold >= 1 << 64:
        white = np.ones_like(white)
    return np.where(white, 255, 0).astype(np.uint8).reshape(ref.height, ref.width)


def render_pgm(ref: PatternRef) -> bytes:
    """Binary PGM (P5, maxval 255) serialization of the pattern."""
    pixels = pattern_pixels(ref)
    header = f"P5\n{ref.width} {ref.height}\n255\n".encode("ascii")
    return header + pixels.tobytes()
