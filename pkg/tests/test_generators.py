import math

import numpy as np
import pytest

from polypack.generators import (CLIP_LOSS_CONSTANT, FCC_DENSITY, HEX_DENSITY, by_name,
                                 clip_density_bound, clip_pattern, clip_to_cube, cube_density,
                                 fcc_spheres, hex_disks, max_body_diameter, square_tiling)
from polypack.packing import PeriodicPacking, complement_grid, density, validate


@pytest.mark.parametrize("make,value", [(hex_disks, 0.9068996821), (fcc_spheres, 0.7404804897),
                                        (lambda s: square_tiling(s), 1.0)])
@pytest.mark.parametrize("size", [1.0, 0.5, 3.0])
def test_reference_valid_and_exact(make, value, size):
    ref = make(size)
    assert not validate(ref.packing)
    assert density(ref.packing).lower == pytest.approx(ref.analytic_density, abs=1e-9)
    assert ref.analytic_density == pytest.approx(value, abs=1e-10)


def test_analytic_constants():
    assert HEX_DENSITY == pytest.approx(math.pi / (2 * math.sqrt(3)))
    assert FCC_DENSITY == pytest.approx(0.7404804897, abs=1e-10)


def test_hex_tangencies():
    pk = hex_disks(1.0).packing
    d = pk.translations[1] - pk.translations[0]
    assert np.hypot(*d) == pytest.approx(2.0)
    assert pk.period[0] == 2.0


def test_fcc_motif():
    pk = fcc_spheres(0.5).packing
    assert pk.period == (math.sqrt(2),) * 3
    assert len(pk) == 4


def test_square_complement_empty():
    pk = square_tiling(1.0).packing
    for m in range(5):
        assert len(complement_grid(pk, m)) == 0


def test_by_name_unknown():
    with pytest.raises(ValueError):
        by_name("bcc")


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_nonpositive_size(bad):
    for make in (hex_disks, fcc_spheres, square_tiling):
        with pytest.raises(ValueError):
            make(bad)


def test_square_clip_exact():
    blk = clip_to_cube(square_tiling(1.0), (0.0, 0.0), 1.0, 0.25)
    assert len(blk) == 16
    assert cube_density(blk, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_clip_too_large_is_empty():
    for name in ("hex", "fcc", "square"):
        ref = by_name(name)
        blk = clip_to_cube(ref, np.zeros(ref.packing.n), 1.0, 10.0)
        assert len(blk) == 0
        assert cube_density(blk, 1.0) == 0.0


def hex_oracle_count(side, r):
    """Count disks of the corner-anchored hexagonal lattice lying in [0, side]^2 by direct enumeration."""
    h = math.sqrt(3) * r
    count = 0
    j = 0
    while r + h * j <= side - r + 1e-12:
        x = r + r * (j % 2)
        while x <= side - r + 1e-12:
            count += 1
            x += 2 * r
        j += 1
    return count


def test_hex_clip_radius_1_64():
    r = 1 / 64
    blk = clip_to_cube(hex_disks(1.0), (0.0, 0.0), 1.0, r)
    assert len(blk) == hex_oracle_count(1.0, r) == 1134
    rho = cube_density(blk, 1.0)
    assert rho == pytest.approx(1134 * math.pi * r * r, abs=1e-12)
    assert rho >= 0.85


def test_clip_contained_and_valid():
    for name, side in (("hex", (1.0, 0.8)), ("fcc", 1.0)):
        ref = by_name(name)
        n = ref.packing.n
        sides = np.broadcast_to(np.asarray(side, float), (n,))
        corner = np.full(n, 0.3)
        blk = clip_to_cube(ref, corner, sides, 0.07)
        r = 0.07
        c = blk.translations
        assert np.all(c - r >= corner - 1e-12) and np.all(c + r <= corner + sides + 1e-12)
        pk = PeriodicPacking(tuple(sides * 3), blk.bodies, blk.body_ref, c)
        assert not validate(pk)


@pytest.mark.parametrize("name", ["hex", "fcc", "square"])
def test_monotone_recovery(name):
    ref = by_name(name)
    dens = [cube_density(clip_pattern(ref, 1.0, 2.0 ** -k), 1.0) for k in range(2, 9)]
    assert all(b >= a - 0.01 for a, b in zip(dens, dens[1:]))


@pytest.mark.parametrize("name", ["hex", "fcc", "square"])
def test_clip_loss_bound(name):
    ref = by_name(name)
    d = max_body_diameter(ref)
    for side in (1.0, 0.77):
        for k in range(12):
            s = side / d / 1.4 ** k
            got = cube_density(clip_pattern(ref, side, s), side)
            assert got >= clip_density_bound(ref, side, s) - 1e-12
    assert CLIP_LOSS_CONSTANT == 3.0
