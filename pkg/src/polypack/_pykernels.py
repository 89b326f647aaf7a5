"""Pure numpy cell-list kernels for periodic proximity queries.

This is the reference backend. ``_ckernels`` implements the same two
functions in Cython and is preferred when it has been built.

Positions live in a periodic box with per-axis period ``period``; all
displacements are reduced to the minimum image axis by axis, which is the
Euclidean-nearest image for an axis-aligned box.

Query modes for :func:`any_hit`:

``MODE_POINT_BALL``
    point within closed ball of ``radius`` around a target.
``MODE_BOX_BALL``
    closed box (centre ``queries``, half-widths ``q_half``) meets a closed
    ball; squared distance compared with ``radius**2 + tol``.
``MODE_BOX_BOX``
    interiors of two boxes overlap by more than ``tol`` on every axis.
``MODE_POINT_BOX``
    point inside a closed target box of half-widths ``t_half``.
"""
from __future__ import annotations

import itertools

import numpy as np

MODE_POINT_BALL = 0
MODE_BOX_BALL = 1
MODE_BOX_BOX = 2
MODE_POINT_BOX = 3

MAX_DIM = 16
_CHUNK = 1 << 16


def wrap(d, period):
    return d - period * np.floor(d / period + 0.5)


def _bins_of(x, period, nb):
    u = x - period * np.floor(x / period)
    b = (u / period * nb).astype(np.intp)
    return np.clip(b, 0, nb - 1)


def grid_dims(period, reach, count):
    """Bins per axis, flat strides and neighbour offsets for a cell list.

    Cells are at least ``reach`` wide; the total is capped near ``4 * count``.
    Axes with fewer than three bins collapse to a single bin so no bin is
    visited twice.
    """
    period = np.asarray(period, dtype=float)
    reach = np.asarray(reach, dtype=float)
    n = period.size
    if n > MAX_DIM:
        raise ValueError(f"dimension {n} exceeds kernel limit {MAX_DIM}")
    cap = max(int(np.ceil((4 * max(count, 1)) ** (1.0 / n))), 1)
    with np.errstate(divide="ignore"):
        raw = np.floor(period / (reach * (1.0 + 1e-9) + 1e-300))
    nb = np.minimum(np.where(np.isfinite(raw), raw, cap), cap).astype(np.intp)
    nb[nb < 3] = 1
    strides = np.ones(n, dtype=np.intp)
    for ax in range(n - 2, -1, -1):
        strides[ax] = strides[ax + 1] * nb[ax + 1]
    axes = [(-1, 0, 1) if nb[ax] >= 3 else (0,) for ax in range(n)]
    offsets = np.array(list(itertools.product(*axes)), dtype=np.intp).reshape(-1, n)
    return nb, strides, offsets


def bin_layout(targets, period, reach):
    """Bucket ``targets`` into a periodic cell list (see :func:`grid_dims`).

    Returns ``(nb, strides, order, starts, offsets)``: target ids sorted by
    bin and CSR start offsets alongside the grid description.
    """
    targets = np.asarray(targets, dtype=float)
    period = np.asarray(period, dtype=float)
    nb, strides, offsets = grid_dims(period, reach, len(targets))
    if len(targets):
        flat = (_bins_of(targets, period, nb) * strides).sum(axis=1)
    else:
        flat = np.zeros(0, dtype=np.intp)
    order = np.argsort(flat, kind="stable").astype(np.intp)
    counts = np.bincount(flat, minlength=int(np.prod(nb)))
    starts = np.zeros(counts.size + 1, dtype=np.intp)
    np.cumsum(counts, out=starts[1:])
    return nb, strides, order, starts, offsets


def _candidates(q, nb, strides, order, starts, offsets, period):
    """Yield ``(query_idx, target_idx)`` candidate arrays, one block per bin slot."""
    qb = _bins_of(q, period, nb)
    for off in offsets:
        flat = (((qb + off) % nb) * strides).sum(axis=1)
        lo = starts[flat]
        cnt = starts[flat + 1] - lo
        if not len(cnt):
            continue
        for slot in range(int(cnt.max(initial=0))):
            sel = np.nonzero(cnt > slot)[0]
            yield sel, order[lo[sel] + slot]


def _test(mode, dq, q_half, t_half, r2, tol):
    if mode == MODE_POINT_BALL:
        return (dq * dq).sum(axis=1) <= r2
    a = np.abs(dq)
    if mode == MODE_BOX_BALL:
        ex = np.maximum(a - q_half, 0.0)
        return (ex * ex).sum(axis=1) <= r2 + tol
    if mode == MODE_BOX_BOX:
        return np.all(a < q_half + t_half - tol, axis=1)
    return np.all(a <= t_half, axis=1)


def any_hit(queries, q_half, targets, t_half, radius, period, mode, tol):
    queries = np.ascontiguousarray(queries, dtype=float)
    targets = np.ascontiguousarray(targets, dtype=float)
    q_half = np.asarray(q_half, dtype=float)
    t_half = np.asarray(t_half, dtype=float)
    period = np.asarray(period, dtype=float)
    out = np.zeros(len(queries), dtype=np.uint8)
    if not len(queries) or not len(targets):
        return out
    reach = {
        MODE_POINT_BALL: np.full(period.size, radius),
        MODE_BOX_BALL: radius + q_half,
        MODE_BOX_BOX: q_half + t_half,
        MODE_POINT_BOX: t_half,
    }[mode]
    layout = bin_layout(targets, period, reach)
    r2 = radius * radius
    for c0 in range(0, len(queries), _CHUNK):
        q = queries[c0:c0 + _CHUNK]
        hit = np.zeros(len(q), dtype=bool)
        for qi, tj in _candidates(q, *layout, period):
            keep = ~hit[qi]
            qi, tj = qi[keep], tj[keep]
            d = wrap(targets[tj] - q[qi], period)
            hit[qi[_test(mode, d, q_half, t_half, r2, tol)]] = True
        out[c0:c0 + _CHUNK] = hit
    return out


def pairs_within(a, b, period, reach, same):
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    period = np.asarray(period, dtype=float)
    reach = np.asarray(reach, dtype=float)
    empty = np.zeros(0, dtype=np.intp)
    if not len(a) or not len(b):
        return empty, empty
    layout = bin_layout(b, period, reach)
    out_a, out_b = [], []
    for c0 in range(0, len(a), _CHUNK):
        q = a[c0:c0 + _CHUNK]
        for qi, tj in _candidates(q, *layout, period):
            gi = qi + c0
            if same:
                keep = tj > gi
                qi, gi, tj = qi[keep], gi[keep], tj[keep]
            d = np.abs(wrap(b[tj] - q[qi], period))
            ok = np.all(d <= reach, axis=1)
            out_a.append(gi[ok])
            out_b.append(tj[ok])
    if not out_a:
        return empty, empty
    return np.concatenate(out_a).astype(np.intp), np.concatenate(out_b).astype(np.intp)
