"""Reference lattice packings and their clipping into grid cubes."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Body, diameter
from .packing import BOX_TOL, PeriodicPacking, PlacementBlock

HEX_DENSITY = math.pi / math.sqrt(12)
FCC_DENSITY = math.pi / (3 * math.sqrt(2))

# Boundary-layer constant for clipping. A lattice copy anchored at the cube
# corner is lost only within one period plus one body of the upper face on
# some axis, and (period + diam) / diam is at most 1 + sqrt(3) for the
# shipped references. Measured worst case over scale sweeps is below 1.
CLIP_LOSS_CONSTANT = 3.0


@dataclass(frozen=True, eq=False)
class ReferencePacking:
    name: str
    packing: PeriodicPacking
    analytic_density: float

    @property
    def body(self) -> Body:
        return self.packing.bodies[0]


def hex_disks(radius: float = 1.0) -> ReferencePacking:
    """Hexagonal disk packing: two tangent-lattice disks per ``2r x 2*sqrt(3)*r`` cell."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    r = float(radius)
    s3 = math.sqrt(3)
    pk = PeriodicPacking((2 * r, 2 * s3 * r), (Body.ball((0.0, 0.0), r),),
                         np.zeros(2, dtype=np.intp), [[0.0, 0.0], [r, s3 * r]])
    return ReferencePacking("hex", pk, HEX_DENSITY)


def fcc_spheres(radius: float = 1.0) -> ReferencePacking:
    """Face-centred cubic packing: four spheres in a cube of side ``2*sqrt(2)*r``."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    r = float(radius)
    a = 2 * math.sqrt(2) * r
    motif = np.array([[0, 0, 0], [0.5, 0.5, 0], [0.5, 0, 0.5], [0, 0.5, 0.5]]) * a
    pk = PeriodicPacking((a, a, a), (Body.ball((0.0, 0.0, 0.0), r),),
                         np.zeros(4, dtype=np.intp), motif)
    return ReferencePacking("fcc", pk, FCC_DENSITY)


def square_tiling(side: float = 1.0, n: int = 2) -> ReferencePacking:
    """One axis-aligned cube of the given side filling its own cell."""
    if not side > 0:
        raise ValueError("side must be positive")
    s = float(side)
    pk = PeriodicPacking((s,) * n, (Body.box((0.0,) * n, (s,) * n),),
                         np.zeros(1, dtype=np.intp), np.zeros((1, n)))
    return ReferencePacking("square", pk, 1.0)


GENERATORS = {"hex": hex_disks, "fcc": fcc_spheres, "square": square_tiling}


def by_name(name: str, size: float = 1.0) -> ReferencePacking:
    try:
        make = GENERATORS[name]
    except KeyError:
        raise ValueError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}") from None
    return make(size)


def scaled_reference(ref: ReferencePacking, scale: float) -> PeriodicPacking:
    pk = ref.packing
    return PeriodicPacking(tuple(p * scale for p in pk.period),
                           tuple(b.scaled(scale) for b in pk.bodies),
                           pk.body_ref, pk.translations * scale)


def max_body_diameter(ref: ReferencePacking) -> float:
    return max(diameter(b) for b in ref.packing.bodies)


def clip_pattern(ref: ReferencePacking, side, scale: float) -> PlacementBlock:
    """Placements of the scaled reference inside the box ``[0, side]``.

    The lattice is anchored so that the lowest bounding-box corner over
    the reference's placements sits on the box corner; every lattice copy
    whose bounding box lies inside the closed box is kept.
    """
    side = np.broadcast_to(np.asarray(side, dtype=float), (ref.packing.n,)).copy()
    pk = scaled_reference(ref, scale)
    bodies = pk.bodies
    n = pk.n
    if scale * max_body_diameter(ref) > side.min() * (1 + 1e-12) or not len(pk):
        return PlacementBlock(bodies, np.zeros(0, dtype=np.intp), np.zeros((0, n)))
    p = np.array(pk.period)
    lo = np.array([bodies[b].bounding_box[0] for b in pk.body_ref])
    hi = np.array([bodies[b].bounding_box[1] for b in pk.body_ref])
    anchor = -(pk.translations + lo).min(axis=0)
    base_t = pk.translations + anchor
    refs, trans = [], []
    for j in range(len(pk)):
        kmin = np.floor((-base_t[j] - lo[j]) / p).astype(int)
        kmax = np.ceil((side - base_t[j] - hi[j]) / p).astype(int)
        axes = [np.arange(a, b + 1) for a, b in zip(kmin, kmax)]
        ks = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        t = base_t[j] + ks * p
        inside = np.all((t + lo[j] >= -BOX_TOL) & (t + hi[j] <= side + BOX_TOL), axis=1)
        t = t[inside]
        refs.append(np.full(len(t), pk.body_ref[j], dtype=np.intp))
        trans.append(t)
    ref_arr = np.concatenate(refs)
    tr = np.concatenate(trans)
    order = np.lexsort(tr.T[::-1])
    return PlacementBlock(bodies, ref_arr[order], tr[order])


def clip_to_cube(ref: ReferencePacking, corner, side, scale: float) -> PlacementBlock:
    """Copies of ``scale * ref`` lying entirely in the closed cube ``corner + [0, side]``.

    Returns an empty block when the scaled bodies are larger than the cube.
    """
    pat = clip_pattern(ref, side, scale)
    corner = np.asarray(corner, dtype=float)
    return PlacementBlock(pat.bodies, pat.body_ref, pat.translations + corner)


def clip_density_bound(ref: ReferencePacking, side, scale: float) -> float:
    """``analytic_density * (1 - c * scale * diam / side)**n``, floored at 0."""
    n = ref.packing.n
    side = float(np.min(np.broadcast_to(np.asarray(side, dtype=float), (n,))))
    x = max(1.0 - CLIP_LOSS_CONSTANT * scale * max_body_diameter(ref) / side, 0.0)
    return ref.analytic_density * x ** n


def cube_density(block: PlacementBlock, side) -> float:
    n = block.bodies[0].n if block.bodies else len(np.atleast_1d(side))
    side = np.broadcast_to(np.asarray(side, dtype=float), (n,))
    if not len(block):
        return 0.0
    vols = np.array([b.analytic_volume for b in block.bodies])
    return float(vols[block.body_ref].sum() / np.prod(side))
