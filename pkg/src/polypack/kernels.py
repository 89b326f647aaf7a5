"""Backend selection for the proximity kernels.

The Cython extension is used when it imports; otherwise, or when
``POLYPACK_PURE_PYTHON`` is set to a non-empty value other than ``0``, the
numpy implementation is used. ``BACKEND`` names the active one.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels
from ._pykernels import (  # noqa: F401
    MODE_BOX_BALL,
    MODE_BOX_BOX,
    MODE_POINT_BALL,
    MODE_POINT_BOX,
)

_ext = None
if os.environ.get("POLYPACK_PURE_PYTHON", "0") in ("", "0"):
    try:
        from . import _ckernels as _ext
    except ImportError:  # extension not built
        _ext = None

HAVE_CYTHON = _ext is not None
BACKEND = "cython" if HAVE_CYTHON else "python"


def _impl(backend):
    if backend is None:
        backend = BACKEND
    if backend == "cython":
        if _ext is None:
            raise RuntimeError("cython backend requested but the extension is not built")
        return _ext
    if backend == "python":
        return _pykernels
    raise ValueError(f"unknown backend {backend!r}")


def any_hit(queries, q_half, targets, t_half, radius, period, mode, tol=0.0, *, backend=None):
    """Flag each query that hits at least one target (see ``_pykernels`` for modes)."""
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    n = queries.shape[1] if queries.ndim == 2 else len(period)
    queries = queries.reshape(-1, n)
    targets = np.ascontiguousarray(targets, dtype=np.float64).reshape(-1, n)
    q_half = np.array(np.broadcast_to(q_half, (n,)), dtype=np.float64)
    t_half = np.array(np.broadcast_to(t_half, (n,)), dtype=np.float64)
    period = np.ascontiguousarray(period, dtype=np.float64)
    out = _impl(backend).any_hit(queries, q_half, targets, t_half, float(radius), period,
                                 int(mode), float(tol))
    return np.asarray(out).astype(bool)


def pairs_within(a, b, period, reach, same=False, *, sort=True, backend=None):
    """Index pairs whose minimum-image separation is within ``reach`` on every axis.

    With ``same=True`` ``a`` and ``b`` are the same array and only ``i < j``
    pairs are returned. Output is sorted lexicographically unless
    ``sort=False``, in which case the order is backend-specific.
    """
    period = np.ascontiguousarray(period, dtype=np.float64)
    n = period.size
    a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, n)
    b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, n)
    reach = np.array(np.broadcast_to(reach, (n,)), dtype=np.float64)
    ia, ib = _impl(backend).pairs_within(a, b, period, reach, bool(same))
    ia = np.asarray(ia, dtype=np.intp)
    ib = np.asarray(ib, dtype=np.intp)
    if not sort:
        return ia, ib
    order = np.lexsort((ib, ia))
    return ia[order], ib[order]
