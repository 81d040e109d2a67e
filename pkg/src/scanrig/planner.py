"""Rig planning calculators: power delivery, camera geometry, transfer time.

These are the pencil-and-paper checks run before anyone bolts hardware to a
frame: does the supply voltage survive the cable run, are neighboring cameras
close enough in angle for feature overlap, and how long will a full capture
take to land on the server.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Effective resistivity (ohm meter) of the deployed 0.27 mm^2 feed lines,
# calibrated from the measured 4.8675 V at the far end of a 0.8 m run driving
# 1.25 A from a 5.0 V rail. Slightly above textbook copper: connectors and
# crimp losses are folded in.
CALIBRATED_RESISTIVITY = 1.78875e-8


class InfeasibleBudget(ValueError):
    """Raised when no positive wire length satisfies the voltage floor."""


class DegenerateGeometry(ValueError):
    """Raised when angle computations would divide by a zero radius."""


@dataclass(frozen=True)
class WireSpec:
    """One camera's power feed, out and back."""

    length: float = 0.8  # meters, one way
    cross_section_mm2: float = 0.27
    current: float = 1.25  # amps drawn by the node
    supply_voltage: float = 5.0
    resistivity: float = CALIBRATED_RESISTIVITY

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("wire length must be non-negative")
        if self.cross_section_mm2 <= 0 or self.current <= 0 or self.resistivity <= 0:
            raise ValueError("cross section, current and resistivity must be positive")


@dataclass(frozen=True)
class PowerBudget:
    min_operating_voltage: float = 4.75
    # Reserve headroom above the brownout floor. Stored in volts; the source
    # figure was quoted in amps, which does not type-check against a voltage
    # budget, so it is kept as documentation and excluded from the formulas.
    safety_margin: float = 0.1


@dataclass(frozen=True)
class RigPlan:
    """Outer frame dimensions and camera arrangement."""

    width: float = 2.90  # meters, back/front side
    depth: float = 2.51  # meters, left/right side
    height: float = 2.10
    beams: int = 24
    cameras_per_beam: int = 4
    min_angle_threshold: float = 13.0  # degrees, design target for overlap
    entrance_gap_slots: int = 0

    def __post_init__(self):
        if self.width <= 0 or self.depth <= 0 or self.height <= 0:
            raise ValueError("frame dimensions must be positive")
        if self.beams < 3:
            raise ValueError("a rig needs at least 3 beams")
        if self.cameras_per_beam < 1:
            raise ValueError("each beam carries at least one camera")
        if not 0 <= self.entrance_gap_slots < self.beams:
            raise ValueError("entrance gap cannot swallow every beam")

    @property
    def camera_count(self) -> int:
        return (self.beams - self.entrance_gap_slots) * self.cameras_per_beam

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.width + self.depth)


@dataclass(frozen=True)
class TransferModel:
    """Everything needed to bound a full-rig transfer to the server."""

    node_count: int = 96
    images_per_node: int = 2
    bytes_per_image: int = 2_000_000
    nic_bandwidth: float = 125e6  # bytes/s at the server
    sd_read_rate: float = 15e6  # bytes/s, conservative staging-card read
    fixed_overhead: float = 0.5  # seconds of setup/teardown

    def __post_init__(self):
        if self.node_count < 1 or self.images_per_node < 1 or self.bytes_per_image < 1:
            raise ValueError("transfer model counts must be positive")
        if self.nic_bandwidth <= 0 or self.sd_read_rate <= 0 or self.fixed_overhead < 0:
            raise ValueError("rates must be positive and overhead non-negative")


def end_voltage(wire: WireSpec) -> float:
    """Voltage at the camera end of the feed.

    Round-trip resistance R = rho * 2L / A with A converted from mm^2; the
    node sees supply minus I*R.
    """
    area_m2 = wire.cross_section_mm2 * 1e-6
    resistance = wire.resistivity * (2.0 * wire.length) / area_m2
    return wire.supply_voltage - wire.current * resistance


def max_wire_length(wire: WireSpec, budget: PowerBudget) -> float:
    """Longest one-way run keeping the node at or above the voltage floor."""
    headroom = wire.supply_voltage - budget.min_operating_voltage
    if headroom <= 0:
        raise InfeasibleBudget(
            f"floor {budget.min_operating_voltage} V is not below supply {wire.supply_voltage} V"
        )
    area_m2 = wire.cross_section_mm2 * 1e-6
    return headroom * area_m2 / (2.0 * wire.current * wire.resistivity)


def _boundary_point(plan: RigPlan, bearing: float) -> tuple[float, float]:
    """Intersection of a ray from the frame center with the frame boundary."""
    c, s = math.cos(bearing), math.sin(bearing)
    tx = (plan.width / 2.0) / abs(c) if abs(c) > 1e-15 else math.inf
    ty = (plan.depth / 2.0) / abs(s) if abs(s) > 1e-15 else math.inf
    t = min(tx, ty)
    return (t * c, t * s)


def beam_positions(plan: RigPlan) -> list[tuple[float, float]]:
    """Beam anchor points on the frame boundary, centered coordinates.

    Beams sit at equal central-angle steps as seen from the frame center,
    slot 0 at the midpoint of the back side (bearing -90 degrees, the side
    the subject faces away from) and subsequent slots walking
    counterclockwise. Equal angular spacing, not equal arc spacing: corners
    are farther from the center, so equal arc steps would crowd the corner
    views below the overlap threshold. An entrance gap omits slots around
    slot 0.
    """
    step = 2.0 * math.pi / plan.beams
    start = -math.pi / 2.0
    gap = plan.entrance_gap_slots
    omitted = {o % plan.beams for o in range(-(gap // 2), (gap + 1) // 2)}
    points = []
    for k in range(plan.beams):
        if k in omitted:
            continue
        points.append(_boundary_point(plan, start + k * step))
    return points


def adjacent_angles(
    points: list[tuple[float, float]], center: tuple[float, float] = (0.0, 0.0)
) -> list[float]:
    """Central angles (degrees) between bearing-adjacent points, wrapping.

    len(result) == len(points) and the angles sum to 360.
    """
    if len(points) < 2:
        raise DegenerateGeometry("need at least two points")
    cx, cy = center
    bearings = []
    for x, y in points:
        if math.hypot(x - cx, y - cy) < 1e-12:
            raise DegenerateGeometry(f"point ({x}, {y}) coincides with the center")
        bearings.append(math.atan2(y - cy, x - cx))
    bearings.sort()
    diffs = [bearings[i + 1] - bearings[i] for i in range(len(bearings) - 1)]
    diffs.append(2.0 * math.pi - (bearings[-1] - bearings[0]))
    return [math.degrees(d) for d in diffs]


def min_adjacent_angle(
    points: list[tuple[float, float]],
    center: tuple[float, float] = (0.0, 0.0),
    exclude_largest_gap: bool = False,
) -> float:
    """Smallest central angle between neighboring beams.

    With exclude_largest_gap the single widest spacing (the entrance) is left
    out of the minimum, matching how the rig is evaluated when a gap exists.
    """
    angles = adjacent_angles(points, center)
    if exclude_largest_gap and len(angles) > 2:
        angles.remove(max(angles))
    return min(angles)


def transfer_time_window(model: TransferModel) -> tuple[float, float]:
    """(lower, upper) bound in seconds for landing a full capture.

    Lower: every node streams in parallel and the server NIC is the only
    bottleneck, plus fixed overhead. Upper: adds one node's staging-card read
    time, since the slowest node finishes reading its card after the shared
    pipe would otherwise have drained.
    """
    total_bytes = model.node_count * model.images_per_node * model.bytes_per_image
    lower = total_bytes / model.nic_bandwidth + model.fixed_overhead
    per_node = model.images_per_node * model.bytes_per_image
    upper = lower + per_node / model.sd_read_rate
    return (lower, upper)
