"""Box-periodic packings: placements in a fundamental cell, overlap checks, density.

A :class:`PeriodicPacking` is a body table plus arrays of placements
(body index and translation) in the half-open cell ``[0, p_1) x ... x [0, p_n)``;
space is tiled by translating the cell by integer multiples of each
period. All proximity work goes through :mod:`polypack.kernels`.
"""
from __future__ import annotations

import itertools
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence, Union

import numpy as np

from . import kernels
from .geometry import (BALL, BOX, GENERIC, PREDICATE_TOL, Body, CubeSet,
                       DensityInterval, diameter, jordan_volume)

log = logging.getLogger(__name__)

# Linear slack for box-box and box-cube interval comparisons.
BOX_TOL = 1e-12
ROTATION_TOL = 1e-12
WITNESS_SAMPLES = 4096
DEFAULT_JORDAN_LEVEL = 8
_MC_CHUNK = 1 << 18
_PAIR_CHUNK = 1 << 21


class InvalidPackingError(ValueError):
    pass


@dataclass(frozen=True)
class Placement:
    """A copy ``R @ body + translation`` of ``bodies[body_ref]``; ``rotation=None`` is identity."""

    body_ref: int
    translation: tuple
    rotation: Optional[tuple] = None


@dataclass(frozen=True, eq=False)
class PlacementBlock:
    """Array-backed list of placements together with the bodies they refer to."""

    bodies: tuple
    body_ref: np.ndarray
    translations: np.ndarray

    def __post_init__(self):
        ref = np.asarray(self.body_ref, dtype=np.intp).reshape(-1)
        n = self.bodies[0].n if self.bodies else 0
        tr = np.asarray(self.translations, dtype=float).reshape(len(ref), -1 if len(ref) else n)
        object.__setattr__(self, "body_ref", ref)
        object.__setattr__(self, "translations", tr)
        object.__setattr__(self, "bodies", tuple(self.bodies))

    def __len__(self) -> int:
        return len(self.body_ref)

    def __getitem__(self, i: int) -> Placement:
        return Placement(int(self.body_ref[i]), tuple(float(v) for v in self.translations[i]))

    def __iter__(self) -> Iterator[Placement]:
        for i in range(len(self)):
            yield self[i]


class Violation(NamedTuple):
    """Overlap evidence between placement ``i`` and the image of ``j`` shifted by ``offset`` periods.

    ``measure`` and ``threshold`` are the compared quantities: centre
    distance and radius sum for two balls, largest per-axis gap (negative
    when overlapping) and 0 for boxes, and point count for sampled
    witnesses. ``witness`` holds a point in both bodies when one was found.
    """

    i: int
    j: int
    offset: tuple
    measure: float
    threshold: float
    witness: Optional[tuple] = None


class Violations(list):
    """List of :class:`Violation`; ``certain`` is False when a generic body was only sampled."""

    def __init__(self, items=(), certain: bool = True):
        super().__init__(items)
        self.certain = certain


@dataclass(frozen=True, eq=False)
class PeriodicPacking:
    period: tuple
    bodies: tuple
    body_ref: np.ndarray
    translations: np.ndarray
    rotations: Optional[np.ndarray] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        period = tuple(float(v) for v in np.atleast_1d(self.period))
        if not all(p > 0 for p in period):
            raise ValueError(f"periods must be positive, got {period}")
        n = len(period)
        bodies = tuple(self.bodies)
        for b in bodies:
            if b.n != n:
                raise ValueError(f"body of dimension {b.n} in a {n}-dimensional packing")
        ref = np.asarray(self.body_ref, dtype=np.intp).reshape(-1)
        if len(ref) and (ref.min() < 0 or ref.max() >= len(bodies)):
            raise ValueError("placement refers to a body missing from the table")
        p = np.array(period)
        tr = np.asarray(self.translations, dtype=float).reshape(len(ref), n)
        tr = tr - p * np.floor(tr / p)
        tr = np.where(tr >= p, tr - p, tr)
        rot = self.rotations
        if rot is not None:
            rot = np.asarray(rot, dtype=float).reshape(len(ref), n, n)
            eye = np.eye(n)
            err = np.abs(np.einsum("kij,kil->kjl", rot, rot) - eye).max(initial=0.0)
            if err > ROTATION_TOL:
                raise ValueError(f"rotation not orthogonal (error {err:.3g})")
            if np.abs(rot - eye).max(initial=0.0) == 0.0:
                rot = None
        for name, val in (("period", period), ("bodies", bodies), ("body_ref", ref),
                          ("translations", tr), ("rotations", rot)):
            object.__setattr__(self, name, val)
        ref.setflags(write=False)
        tr.setflags(write=False)

    @classmethod
    def empty(cls, period) -> "PeriodicPacking":
        n = len(np.atleast_1d(period))
        return cls(period, (), np.zeros(0, dtype=np.intp), np.zeros((0, n)))

    @classmethod
    def from_placements(cls, period, bodies: Sequence[Body],
                        placements: Iterable[Placement]) -> "PeriodicPacking":
        placements = list(placements)
        n = len(np.atleast_1d(period))
        ref = [pl.body_ref for pl in placements]
        tr = np.array([pl.translation for pl in placements], dtype=float).reshape(-1, n)
        rot = None
        if any(pl.rotation is not None for pl in placements):
            rot = np.array([np.eye(n) if pl.rotation is None else np.asarray(pl.rotation)
                            for pl in placements])
        return cls(period, tuple(bodies), np.array(ref, dtype=np.intp), tr, rot)

    @property
    def n(self) -> int:
        return len(self.period)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.period))

    def __len__(self) -> int:
        return len(self.body_ref)

    @property
    def placements(self) -> list[Placement]:
        out = []
        for i in range(len(self)):
            rot = None if self.rotations is None else tuple(map(tuple, self.rotations[i]))
            out.append(Placement(int(self.body_ref[i]), tuple(float(v) for v in self.translations[i]),
                                 rot))
        return out

    def centers(self) -> np.ndarray:
        """Bounding-box centre of every placed copy (rotated ball centres included)."""
        local = np.array([b.bbox_center for b in self.bodies]).reshape(-1, self.n)
        c = local[self.body_ref] if len(self) else np.zeros((0, self.n))
        if self.rotations is not None:
            c = np.einsum("kij,kj->ki", self.rotations, c)
        return c + self.translations

    def groups(self) -> list[tuple[int, np.ndarray]]:
        """``(body index, placement indices)`` for every body that is placed at least once."""
        out = []
        for b in range(len(self.bodies)):
            idx = np.nonzero(self.body_ref == b)[0]
            if len(idx):
                out.append((b, idx))
        return out

    def shifted(self, v) -> "PeriodicPacking":
        return PeriodicPacking(self.period, self.bodies, self.body_ref,
                               self.translations + np.asarray(v, dtype=float), self.rotations)


def _image_offset(delta_raw: np.ndarray, period: np.ndarray) -> np.ndarray:
    return -np.floor(delta_raw / period + 0.5)


def _check_rotations(packing: PeriodicPacking) -> None:
    if packing.rotations is None:
        return
    eye = np.eye(packing.n)
    moved = np.abs(packing.rotations - eye).max(axis=(1, 2)) > ROTATION_TOL
    for i in np.nonzero(moved)[0]:
        if packing.bodies[packing.body_ref[i]].kind != BALL:
            raise ValueError(f"placement {i}: only balls may carry a non-identity rotation")


def _self_violations(packing, b: int, idx: np.ndarray) -> list[Violation]:
    body = packing.bodies[b]
    p = np.array(packing.period)
    axis = int(np.argmin(p))
    off = tuple(int(a == axis) for a in range(packing.n))
    if body.kind == BALL:
        bad = p[axis] ** 2 < (2 * body.radius) ** 2 - PREDICATE_TOL
        measure, threshold = float(p[axis]), 2 * body.radius
    elif body.kind == BOX:
        ext = 2 * body.half_extent
        over = ext - p
        axis = int(np.argmax(over))
        off = tuple(int(a == axis) for a in range(packing.n))
        bad = over[axis] > BOX_TOL
        measure, threshold = float(-over[axis]), 0.0
    else:
        return []
    if not bad:
        return []
    return [Violation(int(i), int(i), off, measure, threshold) for i in idx]


def _pair_violations(packing, b1, idx1, b2, idx2, centers) -> list[Violation]:
    body1, body2 = packing.bodies[b1], packing.bodies[b2]
    p = np.array(packing.period)
    reach = body1.half_extent + body2.half_extent
    c2 = centers[idx2]
    out = []
    for s in range(0, len(idx1), _PAIR_CHUNK):
        blk = idx1[s:s + _PAIR_CHUNK]
        ia, ib = kernels.pairs_within(centers[blk], c2, p, reach, sort=False)
        if b1 == b2:
            keep = ib > ia + s
            ia, ib = ia[keep], ib[keep]
        if len(ia):
            out.extend(_classify_pairs(body1, body2, blk[ia], idx2[ib], centers, p, reach))
    return out


def _classify_pairs(body1, body2, gi, gj, centers, p, reach) -> list[Violation]:
    raw = centers[gj] - centers[gi]
    k = _image_offset(raw, p)
    delta = raw + k * p
    if body1.kind == BALL and body2.kind == BALL:
        d2 = np.einsum("ij,ij->i", delta, delta)
        rs = body1.radius + body2.radius
        bad = d2 < rs * rs - PREDICATE_TOL
        measure = np.sqrt(d2)
        threshold = np.full(len(d2), rs)
    elif body1.kind == BOX and body2.kind == BOX:
        gap = (np.abs(delta) - reach).max(axis=1)
        bad = np.all(np.abs(delta) < reach - BOX_TOL, axis=1)
        measure, threshold = gap, np.zeros(len(gap))
    else:
        ball, box = (body1, body2) if body1.kind == BALL else (body2, body1)
        hb = box.half_extent
        ex = np.maximum(np.abs(delta) - hb, 0.0)
        d2 = np.einsum("ij,ij->i", ex, ex)
        bad = d2 < ball.radius ** 2 - PREDICATE_TOL
        measure, threshold = np.sqrt(d2), np.full(len(d2), ball.radius)
    out = []
    for s in np.nonzero(bad)[0]:
        i, j, off = int(gi[s]), int(gj[s]), tuple(int(v) for v in k[s])
        if i > j:
            i, j, off = j, i, tuple(-v for v in off)
        out.append(Violation(i, j, off, float(measure[s]), float(threshold[s])))
    return out


def _generic_violations(packing, gen_idx: np.ndarray, seed: int = 0) -> list[Violation]:
    """Witness sampling: points of a generic body that fall in another body or image."""
    p = np.array(packing.period)
    rng = np.random.default_rng(seed)
    offsets = np.array(list(itertools.product((-1, 0, 1), repeat=packing.n)))
    centers = packing.centers()
    out = []
    for i in gen_idx:
        body = packing.bodies[packing.body_ref[i]]
        lo, hi = body.bounding_box
        pts = rng.uniform(lo, hi, size=(WITNESS_SAMPLES, packing.n))
        pts = pts[body.contains(pts)] + packing.translations[i]
        if not len(pts):
            continue
        reach = body.half_extent + np.array([packing.bodies[b].half_extent for b in range(len(packing.bodies))]).max(axis=0)
        for j in range(len(packing)):
            if packing.bodies[packing.body_ref[j]].kind == GENERIC and j < i:
                continue
            other = packing.bodies[packing.body_ref[j]]
            for off in offsets:
                if j == i and not off.any():
                    continue
                shift = packing.translations[j] + off * p
                if np.any(np.abs(centers[j] + off * p - centers[i]) > reach):
                    continue
                inside = other.contains(pts - shift)
                if inside.any():
                    w = tuple(float(v) for v in pts[np.argmax(inside)])
                    a, b_, o = (int(i), int(j), tuple(int(v) for v in off))
                    if a > b_:
                        a, b_, o = b_, a, tuple(-v for v in o)
                    out.append(Violation(a, b_, o, float(inside.sum()), 0.0, w))
                    break
    return out


def validate(packing: PeriodicPacking) -> Violations:
    """Return every overlapping pair (including a placement against its own images).

    Exact for balls and axis-aligned boxes. Generic bodies are checked by
    witness sampling and the result is marked ``certain=False``; they also
    require diameter <= smallest period so that the 3**n neighbouring images
    cover every contact.
    """
    cached = packing._cache.get("violations")
    if cached is not None:
        return cached
    _check_rotations(packing)
    centers = packing.centers()
    groups = packing.groups()
    found: list[Violation] = []
    gen_idx = []
    for b, idx in groups:
        body = packing.bodies[b]
        if body.kind == GENERIC:
            if diameter(body) > min(packing.period):
                raise ValueError("generic body diameter exceeds the period; image search insufficient")
            gen_idx.extend(idx.tolist())
            continue
        found.extend(_self_violations(packing, b, idx))
    exact_groups = [(b, idx) for b, idx in groups if packing.bodies[b].kind != GENERIC]
    for a, (b1, idx1) in enumerate(exact_groups):
        for b2, idx2 in exact_groups[a:]:
            found.extend(_pair_violations(packing, b1, idx1, b2, idx2, centers))
    if gen_idx:
        found.extend(_generic_violations(packing, np.array(gen_idx)))
    found.sort(key=lambda v: (v.i, v.j, v.offset))
    result = Violations(found, certain=not gen_idx)
    packing._cache["violations"] = result
    return result


def is_valid(packing: PeriodicPacking) -> bool:
    return not validate(packing)


def density(packing: PeriodicPacking, k: int = DEFAULT_JORDAN_LEVEL) -> DensityInterval:
    """Covered fraction of the cell.

    Exact (a degenerate interval) when every placed body has an analytic
    volume; otherwise the sum of level-``k`` Jordan sandwiches.
    """
    if validate(packing):
        raise InvalidPackingError("density of an overlapping packing is not defined")
    total = DensityInterval(0.0, 0.0)
    for b, idx in packing.groups():
        body = packing.bodies[b]
        if body.analytic_volume is not None:
            vol = DensityInterval.exact(body.analytic_volume)
        else:
            vol = jordan_volume(body, k)
        total = total + vol.scale(len(idx))
    dens = total.scale(1.0 / packing.cell_volume)
    if dens.lower > 1 + 1e-9:
        raise InvalidPackingError(f"density {dens.lower} exceeds 1")
    return DensityInterval(dens.lower, min(dens.upper, 1.0))


class MonteCarloEstimate(NamedTuple):
    estimate: float
    stderr: float
    samples: int


def _workers() -> int:
    env = os.environ.get("POLYPACK_WORKERS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def covered(packing: PeriodicPacking, points) -> np.ndarray:
    """Whether each point lies in the carrier (any placement or periodic image)."""
    pts = np.asarray(points, dtype=float).reshape(-1, packing.n)
    p = np.array(packing.period)
    hit = np.zeros(len(pts), dtype=bool)
    centers = packing.centers()
    for b, idx in packing.groups():
        body = packing.bodies[b]
        rest = ~hit
        if not rest.any():
            break
        q = pts[rest]
        if body.kind == BALL:
            h = kernels.any_hit(q, 0.0, centers[idx], 0.0, body.radius, p, kernels.MODE_POINT_BALL)
        elif body.kind == BOX:
            h = kernels.any_hit(q, 0.0, centers[idx], body.half_extent, 0.0, p, kernels.MODE_POINT_BOX)
        else:
            h = np.zeros(len(q), dtype=bool)
            offsets = np.array(list(itertools.product((-1, 0, 1), repeat=packing.n)))
            for i in idx:
                for off in offsets:
                    h |= body.contains(q - packing.translations[i] - off * p)
        hit[np.nonzero(rest)[0][h]] = True
    return hit


def density_monte_carlo(packing: PeriodicPacking, samples: int, seed: int,
                        workers: Optional[int] = None) -> MonteCarloEstimate:
    """Fraction of uniform points in the cell that are covered, with its standard error.

    Sample chunks draw from child streams of ``seed`` so the estimate does
    not depend on ``workers``.
    """
    if samples <= 0:
        raise ValueError("samples must be positive")
    p = np.array(packing.period)
    sizes = [min(_MC_CHUNK, samples - s) for s in range(0, samples, _MC_CHUNK)]
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(arg):
        size, ss = arg
        pts = np.random.default_rng(ss).random((size, packing.n)) * p
        return int(covered(packing, pts).sum())

    workers = workers or _workers()
    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(workers) as ex:
            hits = sum(ex.map(run, zip(sizes, seeds)))
    else:
        hits = sum(map(run, zip(sizes, seeds)))
    f = hits / samples
    return MonteCarloEstimate(f, float(np.sqrt(f * (1 - f) / samples)), samples)


def grid_shape(packing: PeriodicPacking, m: int) -> tuple[np.ndarray, int]:
    return np.array(packing.period) / 2 ** m, 2 ** m


def complement_grid(packing: PeriodicPacking, m: int) -> CubeSet:
    """Cell-anchored level-``m`` cubes (side ``p_i / 2**m``) free of the carrier.

    A cube is dropped when its closed cube meets a closed ball (tangency
    counts as meeting) or when its interior overlaps a box body's interior,
    so face-sharing neighbours of grid-aligned boxes stay available. Generic
    bodies are sampled and their hits dilated by one cube.
    """
    if m < 0:
        raise ValueError("grid level must be nonnegative")
    side, per_axis = grid_shape(packing, m)
    n = packing.n
    axes = [np.arange(per_axis, dtype=np.int64)] * n
    coords = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    mids = (coords + 0.5) * side
    half = side / 2
    p = np.array(packing.period)
    blocked = np.zeros(len(coords), dtype=bool)
    centers = packing.centers()
    exact = True
    for b, idx in packing.groups():
        body = packing.bodies[b]
        if body.kind == BALL:
            blocked |= kernels.any_hit(mids, half, centers[idx], 0.0, body.radius, p,
                                       kernels.MODE_BOX_BALL, PREDICATE_TOL)
        elif body.kind == BOX:
            blocked |= kernels.any_hit(mids, half, centers[idx], body.half_extent, 0.0, p,
                                       kernels.MODE_BOX_BOX, BOX_TOL)
        else:
            exact = False
            offs = np.array(list(itertools.product((0.0, 0.5, 1.0), repeat=n)))
            lower = coords * side
            hit = np.zeros(len(coords), dtype=bool)
            sub = PeriodicPacking(packing.period, packing.bodies, packing.body_ref[idx],
                                  packing.translations[idx])
            for o in offs:
                hit |= covered(sub, lower + o * side)
            grid = hit.reshape((per_axis,) * n)
            dil = grid.copy()
            for shift in itertools.product((-1, 0, 1), repeat=n):
                dil |= np.roll(grid, shift, axis=tuple(range(n)))
            blocked |= dil.reshape(-1)
    return CubeSet(m, coords[~blocked], side=tuple(float(s) for s in side), exact=exact)


PlacementsLike = Union[PlacementBlock, Sequence[Placement]]


def _body_table(base_bodies: tuple, extra: Sequence[Body]) -> tuple[tuple, np.ndarray]:
    table = list(base_bodies)
    remap = np.empty(len(extra), dtype=np.intp)
    for k, b in enumerate(extra):
        try:
            remap[k] = table.index(b)
        except ValueError:
            table.append(b)
            remap[k] = len(table) - 1
    return tuple(table), remap


def merge(base: PeriodicPacking, addition: PlacementsLike,
          bodies: Optional[Sequence[Body]] = None, period=None) -> PeriodicPacking:
    """Append placements to ``base``; the caller re-validates.

    ``addition`` is a :class:`PlacementBlock` (which carries its own bodies)
    or a list of :class:`Placement` whose ``body_ref`` indexes ``bodies``
    (default: the base table). ``period``, when given, must equal the
    base period.
    """
    if period is not None and not np.allclose(np.atleast_1d(period), base.period, rtol=0, atol=0):
        raise ValueError(f"period mismatch: {tuple(np.atleast_1d(period))} vs {base.period}")
    if isinstance(addition, PeriodicPacking):
        if addition.period != base.period:
            raise ValueError(f"period mismatch: {addition.period} vs {base.period}")
        addition = PlacementBlock(addition.bodies, addition.body_ref, addition.translations)
    if isinstance(addition, PlacementBlock):
        extra_bodies, ref, tr = addition.bodies, addition.body_ref, addition.translations
        rot_add = None
    else:
        addition = list(addition)
        extra_bodies = tuple(base.bodies if bodies is None else bodies)
        ref = np.array([pl.body_ref for pl in addition], dtype=np.intp)
        tr = np.array([pl.translation for pl in addition], dtype=float).reshape(-1, base.n)
        rot_add = None
        if any(pl.rotation is not None for pl in addition):
            rot_add = np.array([np.eye(base.n) if pl.rotation is None else np.asarray(pl.rotation)
                                for pl in addition])
    if not len(ref):
        return base
    if len(ref) and ref.max() >= len(extra_bodies):
        raise ValueError("placement refers to a body missing from the table")
    table, remap = _body_table(base.bodies, extra_bodies)
    rot = None
    if base.rotations is not None or rot_add is not None:
        eye = np.broadcast_to(np.eye(base.n), (len(base), base.n, base.n))
        r0 = base.rotations if base.rotations is not None else eye
        r1 = rot_add if rot_add is not None else np.broadcast_to(np.eye(base.n), (len(ref), base.n, base.n))
        rot = np.concatenate([r0, r1])
    return PeriodicPacking(base.period, table,
                           np.concatenate([base.body_ref, remap[ref]]),
                           np.concatenate([base.translations, tr]), rot)


def brute_force_violations(packing: PeriodicPacking) -> list[tuple[int, int, tuple]]:
    """Reference overlap check for ball packings using exact rational arithmetic.

    Tests every unordered pair (and each placement against its own images)
    over all 3**n image offsets. Intended as an oracle for small instances.
    """
    if any(b.kind != BALL for b in packing.bodies):
        raise ValueError("the brute-force oracle handles balls only")
    tol = Fraction(PREDICATE_TOL)
    period = [Fraction(v) for v in packing.period]
    centers = [[Fraction(float(v)) for v in c] for c in packing.centers()]
    radii = [Fraction(packing.bodies[b].radius) for b in packing.body_ref]
    offsets = list(itertools.product((-1, 0, 1), repeat=packing.n))
    bad = []
    for i in range(len(packing)):
        for j in range(i, len(packing)):
            rs = radii[i] + radii[j]
            for off in offsets:
                if i == j and not any(off):
                    continue
                d2 = sum((centers[j][a] + off[a] * period[a] - centers[i][a]) ** 2
                         for a in range(packing.n))
                if d2 < rs * rs - tol:
                    bad.append((i, j, off))
    return bad
