"""Bodies, dyadic grid cubes and inner/outer grid approximations.

Bodies and cubes are closed sets. Ball and axis-box bodies get exact
membership and cube classification; generic bodies, given only by a
vectorised indicator and a bounding box, get sampled classification that
is flagged as inexact on the returned :class:`CubeSet`.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple, Optional, Sequence

import numpy as np

# Squared-distance slack for ball predicates; ties go to the conservative side.
PREDICATE_TOL = 1e-12

BALL = "ball"
BOX = "box"
GENERIC = "generic"

_ROW_CHUNK = 1 << 20


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def _vec(x) -> tuple:
    return tuple(float(v) for v in np.atleast_1d(np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class Body:
    """A closed bounded body: a ball, an axis-aligned box or a generic set.

    Build with :meth:`ball`, :meth:`box` or :meth:`generic`. A generic
    ``predicate`` takes an ``(m, n)`` array of points and returns an
    ``(m,)`` boolean array.
    """

    kind: str
    n: int
    center: tuple = ()
    radius: float = 0.0
    lo: tuple = ()
    hi: tuple = ()
    predicate: Optional[Callable] = field(default=None, compare=False, repr=False)
    analytic_volume: Optional[float] = None

    @classmethod
    def ball(cls, center: Sequence[float], radius: float) -> "Body":
        center = _vec(center)
        if not radius > 0:
            raise ValueError(f"ball radius must be positive, got {radius}")
        n = len(center)
        return cls(BALL, n, center=center, radius=float(radius),
                   analytic_volume=unit_ball_volume(n) * float(radius) ** n)

    @classmethod
    def box(cls, lo: Sequence[float], hi: Sequence[float]) -> "Body":
        lo, hi = _vec(lo), _vec(hi)
        if len(lo) != len(hi):
            raise ValueError("box corners differ in dimension")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError(f"box needs lo < hi componentwise, got {lo}, {hi}")
        return cls(BOX, len(lo), lo=lo, hi=hi,
                   analytic_volume=float(np.prod(np.subtract(hi, lo))))

    @classmethod
    def generic(cls, predicate: Callable, lo: Sequence[float], hi: Sequence[float],
                volume: Optional[float] = None) -> "Body":
        lo, hi = _vec(lo), _vec(hi)
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError("bounding box needs lo < hi componentwise")
        if volume is not None and volume < 0:
            raise ValueError("volume must be nonnegative")
        return cls(GENERIC, len(lo), lo=lo, hi=hi, predicate=predicate,
                   analytic_volume=None if volume is None else float(volume))

    @property
    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == BALL:
            c = np.array(self.center)
            return c - self.radius, c + self.radius
        return np.array(self.lo), np.array(self.hi)

    @property
    def half_extent(self) -> np.ndarray:
        lo, hi = self.bounding_box
        return (hi - lo) / 2

    @property
    def bbox_center(self) -> np.ndarray:
        lo, hi = self.bounding_box
        return (lo + hi) / 2

    def contains(self, points) -> np.ndarray:
        """Vectorised membership for an ``(m, n)`` array of points."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.n:
            raise ValueError(f"expected points of shape (m, {self.n}), got {pts.shape}")
        if self.kind == BALL:
            d = pts - np.array(self.center)
            return np.einsum("ij,ij->i", d, d) <= self.radius ** 2
        lo, hi = self.bounding_box
        inside = np.all((pts >= lo) & (pts <= hi), axis=1)
        if self.kind == BOX:
            return inside
        out = np.zeros(len(pts), dtype=bool)
        if inside.any():
            out[inside] = np.asarray(self.predicate(pts[inside]), dtype=bool)
        return out

    def scaled(self, s: float) -> "Body":
        """The image of the body under ``x -> s*x``."""
        if not s > 0:
            raise ValueError("scale must be positive")
        if self.kind == BALL:
            return Body.ball(np.multiply(self.center, s), self.radius * s)
        if self.kind == BOX:
            return Body.box(np.multiply(self.lo, s), np.multiply(self.hi, s))
        pred = self.predicate
        vol = None if self.analytic_volume is None else self.analytic_volume * s ** self.n
        return Body.generic(lambda x: pred(np.asarray(x) / s), np.multiply(self.lo, s),
                            np.multiply(self.hi, s), vol)

    def translated(self, t) -> "Body":
        t = np.asarray(t, dtype=float)
        if self.kind == BALL:
            return Body.ball(np.add(self.center, t), self.radius)
        if self.kind == BOX:
            return Body.box(np.add(self.lo, t), np.add(self.hi, t))
        pred = self.predicate
        return Body.generic(lambda x: pred(np.asarray(x) - t), np.add(self.lo, t),
                            np.add(self.hi, t), self.analytic_volume)

    def to_record(self) -> dict:
        if self.kind == BALL:
            return {"kind": BALL, "n": self.n, "center": list(self.center), "radius": self.radius}
        if self.kind == BOX:
            return {"kind": BOX, "n": self.n, "lo": list(self.lo), "hi": list(self.hi)}
        raise ValueError("generic bodies carry a Python predicate and cannot be serialised")

    @classmethod
    def from_record(cls, rec: dict) -> "Body":
        kind = rec.get("kind")
        if kind == BALL:
            body = cls.ball(rec["center"], rec["radius"])
        elif kind == BOX:
            body = cls.box(rec["lo"], rec["hi"])
        else:
            raise ValueError(f"unknown body kind {kind!r}")
        if "n" in rec and int(rec["n"]) != body.n:
            raise ValueError(f"record dimension {rec['n']} does not match body dimension {body.n}")
        return body


def indicator(body: Body, x) -> bool:
    x = np.asarray(x, dtype=float)
    if x.shape != (body.n,):
        raise ValueError(f"point has shape {x.shape}, body dimension is {body.n}")
    return bool(body.contains(x[None, :])[0])


def diameter(body: Body) -> float:
    """Euclidean diameter; for generic bodies the bounding-box diagonal (an upper bound)."""
    if body.kind == BALL:
        return 2 * body.radius
    lo, hi = body.bounding_box
    return float(np.linalg.norm(hi - lo))


def diameter_is_exact(body: Body) -> bool:
    return body.kind != GENERIC


class CubeIndex(NamedTuple):
    """The closed cube ``prod_i [t_i, t_i + 1] * 2**-level``."""

    level: int
    t: tuple

    @property
    def side(self) -> float:
        return 2.0 ** -self.level

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.t, dtype=float) * self.side


@dataclass(frozen=True, eq=False)
class CubeSet:
    """Cubes of one grid level, stored as a lexicographically sorted coordinate array.

    ``side`` defaults to ``2**-level`` on every axis; cell-anchored grids
    (see :func:`polypack.packing.complement_grid`) carry per-axis sides.
    ``exact`` is False when membership came from sampling a generic body.
    """

    level: int
    coords: np.ndarray
    side: Optional[tuple] = None
    exact: bool = True

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.int64)
        if c.ndim != 2:
            raise ValueError("coords must be a 2-d integer array")
        if len(c):
            c = np.unique(c, axis=0)
        object.__setattr__(self, "coords", c)
        c.setflags(write=False)

    @property
    def n(self) -> int:
        return self.coords.shape[1]

    @property
    def sides(self) -> np.ndarray:
        if self.side is None:
            return np.full(self.n, 2.0 ** -self.level)
        return np.asarray(self.side, dtype=float)

    @property
    def cube_volume(self) -> float:
        return float(np.prod(self.sides))

    @property
    def volume(self) -> float:
        return len(self) * self.cube_volume

    def lower_corners(self) -> np.ndarray:
        return self.coords * self.sides

    def __len__(self) -> int:
        return len(self.coords)

    def __iter__(self) -> Iterator[CubeIndex]:
        for row in self.coords:
            yield CubeIndex(self.level, tuple(int(v) for v in row))

    def __contains__(self, cube) -> bool:
        t = np.asarray(cube.t if isinstance(cube, CubeIndex) else cube)
        return bool(np.any(np.all(self.coords == t, axis=1)))

    def _keys(self) -> np.ndarray:
        c = np.ascontiguousarray(self.coords)
        return c.view(np.dtype((np.void, c.dtype.itemsize * c.shape[1]))).ravel()

    def issubset(self, other: "CubeSet") -> bool:
        if self.level != other.level:
            raise ValueError("cube sets live on different levels")
        if not len(self):
            return True
        return bool(np.isin(self._keys(), other._keys()).all())

    def refine(self) -> "CubeSet":
        """Split every cube into its 2**n children one level down."""
        kids = np.array(list(itertools.product((0, 1), repeat=self.n)), dtype=np.int64)
        coords = (2 * self.coords[:, None, :] + kids[None]).reshape(-1, self.n)
        side = None if self.side is None else tuple(s / 2 for s in self.side)
        return CubeSet(self.level + 1, coords, side, self.exact)

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k"] + [f"t_{i + 1}" for i in range(self.n)])
        for row in self.coords:
            w.writerow([self.level] + [int(v) for v in row])


@dataclass(frozen=True)
class DensityInterval:
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValueError(f"lower {self.lower} exceeds upper {self.upper}")

    @classmethod
    def exact(cls, value: float) -> "DensityInterval":
        return cls(value, value)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def mid(self) -> float:
        return (self.lower + self.upper) / 2

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= x <= self.upper + tol

    def __add__(self, other: "DensityInterval") -> "DensityInterval":
        return DensityInterval(self.lower + other.lower, self.upper + other.upper)

    def scale(self, s: float) -> "DensityInterval":
        return DensityInterval(self.lower * s, self.upper * s)


def _candidate_ranges(body: Body, k: int) -> list[np.ndarray]:
    lo, hi = body.bounding_box
    scale = 2.0 ** k
    return [np.arange(math.floor(a * scale) - 1, math.ceil(b * scale) + 1, dtype=np.int64)
            for a, b in zip(lo, hi)]


def _sample_offsets(n: int) -> np.ndarray:
    return np.array(list(itertools.product((0.0, 0.5, 1.0), repeat=n)))


def _classify_chunk(body: Body, t: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    side = 2.0 ** -k
    a = t * side
    b = a + side
    if body.kind == BALL:
        c = np.array(body.center)
        far = np.maximum(np.abs(a - c), np.abs(b - c))
        near = np.maximum(np.maximum(a - c, c - b), 0.0)
        r2 = body.radius ** 2
        inner = np.einsum("ij,ij->i", far, far) <= r2 - PREDICATE_TOL
        outer = np.einsum("ij,ij->i", near, near) <= r2 + PREDICATE_TOL
        return inner, outer
    lo, hi = body.bounding_box
    if body.kind == BOX:
        inner = np.all((a >= lo) & (b <= hi), axis=1)
        outer = np.all((a <= hi) & (b >= lo), axis=1)
        return inner, outer
    offs = _sample_offsets(body.n) * side
    hits = np.stack([body.contains(a + o) for o in offs], axis=1)
    return hits.all(axis=1), hits.any(axis=1)


def _classify(body: Body, k: int):
    """Yield ``(coords, inner_mask, outer_mask)`` over all candidate cubes."""
    ranges = _candidate_ranges(body, k)
    n = body.n
    rest = ranges[1:]
    rest_grid = np.stack(np.meshgrid(*rest, indexing="ij"), axis=-1).reshape(-1, n - 1) \
        if n > 1 else np.zeros((1, 0), dtype=np.int64)
    per_row = max(1, _ROW_CHUNK // max(len(rest_grid), 1))
    first = ranges[0]
    for s in range(0, len(first), per_row):
        rows = first[s:s + per_row]
        t = np.concatenate([np.repeat(rows, len(rest_grid))[:, None],
                            np.tile(rest_grid, (len(rows), 1))], axis=1)
        inner, outer = _classify_chunk(body, t, k)
        yield t, inner, outer


def _dilate(coords: np.ndarray) -> np.ndarray:
    n = coords.shape[1]
    offs = np.array(list(itertools.product((-1, 0, 1), repeat=n)), dtype=np.int64)
    return (coords[:, None, :] + offs[None]).reshape(-1, n)


def grid_inner(region: Body, k: int) -> CubeSet:
    """Level-``k`` cubes contained in ``region``."""
    parts = [t[inner] for t, inner, _ in _classify(region, k)]
    coords = np.concatenate(parts) if parts else np.zeros((0, region.n), dtype=np.int64)
    return CubeSet(k, coords, exact=region.kind != GENERIC)


def grid_outer(region: Body, k: int) -> CubeSet:
    """Level-``k`` cubes whose closed cube meets ``region``.

    For generic regions the sampled hits are dilated by one cube so that
    thin features missed by the samples are still covered.
    """
    parts = [t[outer] for t, _, outer in _classify(region, k)]
    coords = np.concatenate(parts) if parts else np.zeros((0, region.n), dtype=np.int64)
    if region.kind == GENERIC and len(coords):
        coords = _dilate(coords)
    return CubeSet(k, coords, exact=region.kind != GENERIC)


def jordan_volume(body: Body, k: int) -> DensityInterval:
    """Inner and outer level-``k`` grid volumes sandwiching the body's volume."""
    if body.kind == GENERIC:
        return DensityInterval(grid_inner(body, k).volume, grid_outer(body, k).volume)
    n_in = n_out = 0
    for _, inner, outer in _classify(body, k):
        n_in += int(inner.sum())
        n_out += int(outer.sum())
    cube = 2.0 ** (-k * body.n)
    return DensityInterval(n_in * cube, n_out * cube)
