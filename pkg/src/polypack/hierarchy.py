"""Interstitial filling across scales and the limiting-density law.

``fill_interstices`` keeps a base packing, lists the cell-anchored grid
cubes that miss its carrier, and packs each such cube with a scaled copy
of a reference lattice clipped to the cube. Repeating this with ever
smaller bodies drives the density toward ``1 - prod(1 - delta_i)``.
"""
from __future__ import annotations

import csv
import io
import logging
import warnings
from dataclasses import dataclass
from functools import reduce
from typing import Optional, Sequence

import numpy as np

from . import generators
from .generators import ReferencePacking, clip_pattern, cube_density, max_body_diameter
from .packing import (PeriodicPacking, PlacementBlock, complement_grid, density, merge,
                      validate)

log = logging.getLogger(__name__)

# Largest permitted ratio achieved/limit overshoot for the shipped generators.
GAP_TOL = 1e-9
# Per-step slack on the gap sequence of a convergence run.
GAP_STEP_TOL = 0.005


class VacuousPlanWarning(UserWarning):
    """The plan's scaled bodies do not fit in its grid cubes, or nothing was free to fill."""


def _unit(x: float, name: str) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {x}")
    return x


def limit_density(delta_base: float, delta_small: float) -> float:
    """``delta_base + (1 - delta_base) * delta_small``: the large-ratio limit for two body scales."""
    a = _unit(delta_base, "delta_base")
    b = _unit(delta_small, "delta_small")
    return a + (1.0 - a) * b


def iterate_limit(deltas: Sequence[float]) -> float:
    """``1 - prod(1 - delta_i)``."""
    deltas = [_unit(d, "delta") for d in deltas]
    if not deltas:
        raise ValueError("need at least one density")
    return 1.0 - float(np.prod([1.0 - d for d in deltas]))


def fold_limit(deltas: Sequence[float]) -> float:
    """Left fold of :func:`limit_density`; equals :func:`iterate_limit`."""
    if not deltas:
        raise ValueError("need at least one density")
    return reduce(limit_density, deltas[1:], _unit(deltas[0], "delta"))


@dataclass(frozen=True)
class FillPlan:
    """One fill step: grid level ``m``, body scale ``scale`` and a reference label.

    ``scale`` multiplies the unit-size reference, so for ``hex`` it is the
    small-disk radius and for ``square`` the small-square side.
    """

    m: int
    scale: float
    reference: str = "hex"
    expected_floor: Optional[float] = None

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("grid level must be nonnegative")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def reference_packing(self, n: int = 2) -> ReferencePacking:
        if self.reference == "square":
            return generators.square_tiling(1.0, n)
        return generators.by_name(self.reference, 1.0)

    def cube_sides(self, base: PeriodicPacking) -> np.ndarray:
        return np.array(base.period) / 2 ** self.m

    def is_vacuous(self, base: PeriodicPacking) -> bool:
        ref = self.reference_packing(base.n)
        return self.scale * max_body_diameter(ref) > self.cube_sides(base).min() * (1 + 1e-12)


@dataclass(frozen=True)
class FillReport:
    """Measured parts of one fill: the quantities in the lower-bound bookkeeping."""

    base_density: float
    density: float
    complement_fraction: float
    cube_density: float
    cubes: int
    added: int
    vacuous: bool

    @property
    def lower_bound(self) -> float:
        return self.base_density + self.complement_fraction * self.cube_density


def fill_with_report(base: PeriodicPacking, plan: FillPlan) -> tuple[PeriodicPacking, FillReport]:
    if validate(base):
        raise ValueError("base packing is not valid")
    base_rho = density(base).lower
    ref = plan.reference_packing(base.n)
    if ref.packing.n != base.n:
        raise ValueError(f"reference {ref.name!r} is {ref.packing.n}-dimensional, base is {base.n}")
    cubes = complement_grid(base, plan.m)
    sides = cubes.sides
    frac = cubes.volume / base.cell_volume
    pattern = PlacementBlock((), np.zeros(0, dtype=np.intp), np.zeros((0, base.n)))
    if not plan.is_vacuous(base):
        pattern = clip_pattern(ref, sides, plan.scale)
    if not len(pattern) or not len(cubes):
        why = "nothing fits in a cube" if not len(pattern) else "no free cubes"
        warnings.warn(f"vacuous fill at m={plan.m}, scale={plan.scale}: {why}",
                      VacuousPlanWarning, stacklevel=2)
        return base, FillReport(base_rho, base_rho, frac, 0.0, len(cubes), 0, True)
    corners = cubes.lower_corners()
    k = len(pattern)
    trans = (corners[:, None, :] + pattern.translations[None, :, :]).reshape(-1, base.n)
    refs = np.tile(pattern.body_ref, len(corners))
    out = merge(base, PlacementBlock(pattern.bodies, refs, trans))
    bad = validate(out)
    if bad:
        raise RuntimeError(f"fill produced {len(bad)} overlaps; first: {bad[0]}")
    rho = density(out).lower
    in_cube = cube_density(pattern, sides)
    report = FillReport(base_rho, rho, frac, in_cube, len(cubes), k * len(corners), False)
    if rho < report.lower_bound - 1e-9 or rho < base_rho:
        raise RuntimeError(f"fill density {rho} below measured bound {report.lower_bound}")
    if plan.expected_floor is not None and rho < plan.expected_floor:
        log.warning("fill density %.6f below expected floor %.6f", rho, plan.expected_floor)
    return out, report


def fill_interstices(base: PeriodicPacking, plan: FillPlan) -> PeriodicPacking:
    """Merge ``base`` with reference copies packed into every free grid cube."""
    return fill_with_report(base, plan)[0]


def iterate_fill(base: PeriodicPacking, plans: Sequence[FillPlan]) -> list[tuple[PeriodicPacking, float]]:
    """Apply the plans in order; element 0 is ``(base, density(base))``."""
    out = [(base, density(base).lower)]
    cur = base
    for level, plan in enumerate(plans, 1):
        cur, rep = fill_with_report(cur, plan)
        log.info("level %d: density %.9f (%d placements added)", level, rep.density, rep.added)
        out.append((cur, rep.density))
    return out


@dataclass(frozen=True)
class ConvergenceRow:
    r: float
    m: int
    achieved: float
    limit: float
    mc: Optional[float] = None
    mc_stderr: Optional[float] = None

    @property
    def gap(self) -> float:
        return self.limit - self.achieved


def convergence_experiment(base: PeriodicPacking, reference: ReferencePacking,
                           scales: Sequence[float], m_schedule: Sequence[int],
                           mc_samples: int = 0, seed: int = 0) -> list[ConvergenceRow]:
    """Fill ``base`` once per (scale, level) pair and compare with the limiting density.

    Each row starts again from ``base``. With ``mc_samples`` the achieved
    density is also estimated by Monte Carlo.
    """
    from .packing import density_monte_carlo

    if len(scales) != len(m_schedule):
        raise ValueError(f"{len(scales)} scales but {len(m_schedule)} grid levels")
    if any(b >= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be strictly decreasing")
    base_rho = density(base).lower
    limit = limit_density(base_rho, reference.analytic_density)
    rows = []
    for r, m in zip(scales, m_schedule):
        plan = FillPlan(int(m), float(r), reference.name)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", VacuousPlanWarning)
            filled, rep = fill_with_report(base, plan)
        mc = se = None
        if mc_samples:
            est = density_monte_carlo(filled, mc_samples, seed)
            mc, se = est.estimate, est.stderr
        rows.append(ConvergenceRow(float(r), int(m), rep.density, limit, mc, se))
    return rows


def gaps_shrink(rows: Sequence[ConvergenceRow], tol: float = GAP_STEP_TOL) -> bool:
    """Gap sequence nonincreasing up to ``tol`` per step and smaller at the end than the start."""
    gaps = [r.gap for r in rows]
    steps_ok = all(b <= a + tol for a, b in zip(gaps, gaps[1:]))
    return steps_ok and (len(gaps) < 2 or gaps[-1] < gaps[0])


CSV_COLUMNS = ("r", "m", "achieved", "limit", "gap")


def rows_to_csv(rows: Sequence[ConvergenceRow]) -> str:
    buf = io.StringIO()
    with_mc = any(r.mc is not None for r in rows)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS + (("mc", "mc_stderr") if with_mc else ()))
    for r in rows:
        vals = [repr(r.r), r.m, repr(r.achieved), repr(r.limit), repr(r.gap)]
        if with_mc:
            vals += [repr(r.mc), repr(r.mc_stderr)]
        w.writerow(vals)
    return buf.getvalue()


@dataclass(frozen=True)
class LevelRow:
    """One level of an :func:`iterate_fill` run; level 0 is the base."""

    level: int
    m: Optional[int]
    scale: Optional[float]
    density: float
    limit: float

    @property
    def shortfall(self) -> float:
        return self.limit - self.density


def level_rows(history: Sequence[tuple[PeriodicPacking, float]],
               plans: Sequence[FillPlan]) -> list[LevelRow]:
    """Per-level density against ``limit_density(previous density, reference density)``."""
    if len(history) != len(plans) + 1:
        raise ValueError("history must hold the base followed by one entry per plan")
    rho0 = history[0][1]
    rows = [LevelRow(0, None, None, rho0, rho0)]
    for j, plan in enumerate(plans, 1):
        lim = limit_density(history[j - 1][1], plan.reference_packing(history[0][0].n).analytic_density)
        rows.append(LevelRow(j, plan.m, plan.scale, history[j][1], lim))
    return rows


def iterated_bound(delta: float, eps: float, levels: int) -> float:
    """``1 - (1 - (delta - eps))**levels``: the iterated limit with every level short by ``eps``."""
    return iterate_limit([max(delta - eps, 0.0)] * levels)


LEVEL_COLUMNS = ("level", "m", "scale", "density", "limit", "shortfall")


def levels_to_csv(rows: Sequence[LevelRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LEVEL_COLUMNS)
    for r in rows:
        w.writerow([r.level, "" if r.m is None else r.m, "" if r.scale is None else repr(r.scale),
                    repr(r.density), repr(r.limit), repr(r.shortfall)])
    return buf.getvalue()
