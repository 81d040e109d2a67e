import hashlib
import math

import numpy as np
import pytest

from scanrig.lighting import (
    ControllerBank,
    LightLevel,
    controller_count,
    controller_for_stripe,
    parse_light_level,
    pattern_pixels,
    render_pgm,
)
from scanrig.protocol import PatternRef

# Frozen goldens for RandomDot(seed=7, density=0.5, 8x8), row-major.
GOLDEN_8x8_HEX = (
    "ffff0000ffffffffffffff000000000000ff000000ffffff0000ffff00ff00ff"
    "ffff0000ff00ffff0000ffffffff0000000000ffffff00ffffff0000ffff00ff"
)
GOLDEN_8x8_PGM_SHA256 = "d2e13e9e49efb2cd0f5328ab19c1e7bd6a44850c3d4b3285cc3baf401503e794"


def test_golden_dot_pattern():
    px = pattern_pixels(PatternRef("dots", 7, 0.5, 8, 8))
    assert px.shape == (8, 8)
    assert px.tobytes().hex() == GOLDEN_8x8_HEX
    assert int((px == 255).sum()) == 35


def test_golden_pgm_bytes():
    pgm = render_pgm(PatternRef("dots", 7, 0.5, 8, 8))
    assert pgm.startswith(b"P5\n8 8\n255\n")
    assert hashlib.sha256(pgm).hexdigest() == GOLDEN_8x8_PGM_SHA256


def test_pattern_is_deterministic():
    ref = PatternRef("dots", 1234, 0.3, 64, 64)
    assert np.array_equal(pattern_pixels(ref), pattern_pixels(ref))
    other = PatternRef("dots", 1235, 0.3, 64, 64)
    assert not np.array_equal(pattern_pixels(ref), pattern_pixels(other))


@pytest.mark.parametrize("seed", range(10))
def test_white_fraction_within_4_sigma(seed):
    density = 0.5
    ref = PatternRef("dots", seed, density, 256, 256)
    px = pattern_pixels(ref)
    n = px.size
    frac = float((px == 255).sum()) / n
    sigma = math.sqrt(density * (1.0 - density) / n)
    assert abs(frac - density) <= 4.0 * sigma, f"seed {seed}: {frac} vs {density}"


@pytest.mark.parametrize("density", [0.1, 0.25, 0.75, 0.9])
def test_other_densities_within_4_sigma(density):
    ref = PatternRef("dots", 7, density, 256, 256)
    frac = float((pattern_pixels(ref) == 255).sum()) / (256 * 256)
    sigma = math.sqrt(density * (1.0 - density) / (256 * 256))
    assert abs(frac - density) <= 4.0 * sigma


def test_density_edges():
    assert not pattern_pixels(PatternRef("dots", 3, 0.0, 16, 16)).any()
    assert (pattern_pixels(PatternRef("dots", 3, 1.0, 16, 16)) == 255).all()


def test_black_pattern_ignores_seed():
    a = pattern_pixels(PatternRef("black", 1, 0.5, 16, 16))
    b = pattern_pixels(PatternRef("black", 2, 0.9, 16, 16))
    assert not a.any()
    assert np.array_equal(a, b)


def test_pattern_values_are_binary():
    px = pattern_pixels(PatternRef("dots", 7, 0.5, 32, 32))
    assert set(np.unique(px)) <= {0, 255}


# ---- light levels and stripe fan-out ---------------------------------------

def test_parse_light_level():
    assert parse_light_level(0) is LightLevel.OFF
    assert parse_light_level(50) is LightLevel.HALF
    assert parse_light_level(100) is LightLevel.FULL
    for bad in (75, -1, 101, 99):
        with pytest.raises(ValueError):
            parse_light_level(bad)


def test_stripe_to_controller_mapping():
    # four stripes per controller, fixed wiring order
    assert controller_for_stripe(0) == (0, 0)
    assert controller_for_stripe(3) == (0, 3)
    assert controller_for_stripe(4) == (1, 0)
    assert controller_for_stripe(11) == (2, 3)
    with pytest.raises(IndexError):
        controller_for_stripe(-1)
    with pytest.raises(IndexError):
        controller_for_stripe(controller_count() * 4)


def test_controller_count_requires_multiple_of_four():
    assert controller_count(12) == 3
    with pytest.raises(ValueError):
        controller_count(10)


def test_bank_applies_to_all_controllers():
    bank = ControllerBank()
    acks = bank.set_level(100)
    assert len(acks) == controller_count()
    assert all(a.ok and a.level == 100 for a in acks)
    assert all(c.applied == [100] for c in bank.controllers)


def test_bank_reports_unreachable_without_raising():
    bank = ControllerBank()
    bank.controllers[1].reachable = False
    acks = bank.set_level(50)
    assert [a.ok for a in acks].count(False) == 1
    bad = next(a for a in acks if not a.ok)
    assert bad.controller == 1
    assert bad.error.startswith("ControllerUnreachable")
    # the others still got the level
    assert bank.controllers[0].applied == [50]


def test_bank_rejects_bad_level():
    bank = ControllerBank()
    with pytest.raises(ValueError):
        bank.set_level(75)
