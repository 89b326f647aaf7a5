# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled cell-list kernels for periodic proximity queries.

Same contract as :mod:`polypack._pykernels`; see that module for the
meaning of each mode. Both backends must return identical results.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, fabs

cnp.import_array()

DEF MODE_POINT_BALL = 0
DEF MODE_BOX_BALL = 1
DEF MODE_BOX_BOX = 2
DEF MODE_POINT_BOX = 3


cdef inline double _wrap(double d, double p) nogil:
    return d - p * floor(d / p + 0.5)


cdef inline Py_ssize_t _bin(double x, double p, Py_ssize_t nb) nogil:
    cdef double u = x - p * floor(x / p)
    cdef Py_ssize_t b = <Py_ssize_t>(u / p * nb)
    if b >= nb:
        b = nb - 1
    if b < 0:
        b = 0
    return b


def _layout(const double[:, ::1] targets, const double[::1] period, reach):
    """Counting-sort cell list; same output as ``_pykernels.bin_layout``."""
    from polypack._pykernels import grid_dims
    cdef Py_ssize_t m = targets.shape[0]
    cdef Py_ssize_t n = targets.shape[1]
    nb_arr, strides_arr, offsets_arr = grid_dims(np.asarray(period), reach, m)
    cdef Py_ssize_t[::1] nb = nb_arr
    cdef Py_ssize_t[::1] strides = strides_arr
    cdef Py_ssize_t total = 1
    cdef Py_ssize_t i, ax, f
    for ax in range(n):
        total *= nb[ax]
    flat_arr = np.empty(m, dtype=np.intp)
    starts_arr = np.zeros(total + 1, dtype=np.intp)
    order_arr = np.empty(m, dtype=np.intp)
    cdef Py_ssize_t[::1] flat = flat_arr
    cdef Py_ssize_t[::1] starts = starts_arr
    cdef Py_ssize_t[::1] order = order_arr
    with nogil:
        for i in range(m):
            f = 0
            for ax in range(n):
                f = f + _bin(targets[i, ax], period[ax], nb[ax]) * strides[ax]
            flat[i] = f
            starts[f + 1] += 1
        for f in range(total):
            starts[f + 1] += starts[f]
        for i in range(m):
            f = flat[i]
            order[starts[f]] = i
            starts[f] += 1
        for f in range(total, 0, -1):
            starts[f] = starts[f - 1]
        starts[0] = 0
    return nb_arr, strides_arr, order_arr, starts_arr, offsets_arr


def any_hit(const double[:, ::1] queries, const double[::1] q_half,
            const double[:, ::1] targets, const double[::1] t_half, double radius,
            const double[::1] period, int mode, double tol):
    cdef Py_ssize_t nq = queries.shape[0]
    cdef Py_ssize_t n = queries.shape[1]
    out = np.zeros(nq, dtype=np.uint8)
    cdef unsigned char[::1] hit = out
    if nq == 0 or targets.shape[0] == 0:
        return out

    reach = np.empty(n)
    for i in range(n):
        if mode == MODE_POINT_BALL:
            reach[i] = radius
        elif mode == MODE_BOX_BALL:
            reach[i] = radius + q_half[i]
        elif mode == MODE_BOX_BOX:
            reach[i] = q_half[i] + t_half[i]
        else:
            reach[i] = t_half[i]
    nb_arr, strides_arr, order_arr, starts_arr, offsets_arr = _layout(targets, period, reach)
    cdef Py_ssize_t[::1] nb = nb_arr
    cdef Py_ssize_t[::1] strides = strides_arr
    cdef Py_ssize_t[::1] order = order_arr
    cdef Py_ssize_t[::1] starts = starts_arr
    cdef Py_ssize_t[:, ::1] offsets = offsets_arr
    cdef Py_ssize_t noff = offsets.shape[0]
    cdef double r2 = radius * radius
    cdef Py_ssize_t qi, k, ax, flat, b, s, jj, j
    cdef double d, acc, excess
    cdef bint found, ok
    cdef Py_ssize_t[16] qbin

    with nogil:
        for qi in range(nq):
            for ax in range(n):
                qbin[ax] = _bin(queries[qi, ax], period[ax], nb[ax])
            found = False
            for k in range(noff):
                if found:
                    break
                flat = 0
                for ax in range(n):
                    b = qbin[ax] + offsets[k, ax]
                    if b < 0:
                        b = b + nb[ax]
                    elif b >= nb[ax]:
                        b = b - nb[ax]
                    flat = flat + b * strides[ax]
                for jj in range(starts[flat], starts[flat + 1]):
                    j = order[jj]
                    if mode == MODE_POINT_BALL:
                        acc = 0.0
                        for ax in range(n):
                            d = _wrap(targets[j, ax] - queries[qi, ax], period[ax])
                            acc = acc + d * d
                        ok = acc <= r2
                    elif mode == MODE_BOX_BALL:
                        acc = 0.0
                        for ax in range(n):
                            d = fabs(_wrap(targets[j, ax] - queries[qi, ax], period[ax]))
                            excess = d - q_half[ax]
                            if excess > 0.0:
                                acc = acc + excess * excess
                        ok = acc <= r2 + tol
                    elif mode == MODE_BOX_BOX:
                        ok = True
                        for ax in range(n):
                            d = fabs(_wrap(targets[j, ax] - queries[qi, ax], period[ax]))
                            if not (d < q_half[ax] + t_half[ax] - tol):
                                ok = False
                                break
                    else:
                        ok = True
                        for ax in range(n):
                            d = fabs(_wrap(targets[j, ax] - queries[qi, ax], period[ax]))
                            if d > t_half[ax]:
                                ok = False
                                break
                    if ok:
                        found = True
                        break
            if found:
                hit[qi] = 1
    return out


def pairs_within(const double[:, ::1] a, const double[:, ::1] b, const double[::1] period,
                 const double[::1] reach, bint same):
    cdef Py_ssize_t na = a.shape[0]
    cdef Py_ssize_t n = a.shape[1]
    if na == 0 or b.shape[0] == 0:
        return np.zeros(0, dtype=np.intp), np.zeros(0, dtype=np.intp)
    nb_arr, strides_arr, order_arr, starts_arr, offsets_arr = _layout(b, period, np.asarray(reach))
    cdef Py_ssize_t[::1] nb = nb_arr
    cdef Py_ssize_t[::1] strides = strides_arr
    cdef Py_ssize_t[::1] order = order_arr
    cdef Py_ssize_t[::1] starts = starts_arr
    cdef Py_ssize_t[:, ::1] offsets = offsets_arr
    cdef Py_ssize_t noff = offsets.shape[0]
    cdef Py_ssize_t ai, k, ax, flat, bb, jj, j, pass_, count
    cdef Py_ssize_t total = 0
    cdef double d
    cdef bint ok
    cdef Py_ssize_t[16] abin
    cdef Py_ssize_t[::1] out_a
    cdef Py_ssize_t[::1] out_b
    out_a_arr = np.zeros(0, dtype=np.intp)
    out_b_arr = np.zeros(0, dtype=np.intp)

    for pass_ in range(2):
        count = 0
        if pass_ == 1:
            out_a_arr = np.empty(total, dtype=np.intp)
            out_b_arr = np.empty(total, dtype=np.intp)
            out_a = out_a_arr
            out_b = out_b_arr
        with nogil:
            for ai in range(na):
                for ax in range(n):
                    abin[ax] = _bin(a[ai, ax], period[ax], nb[ax])
                for k in range(noff):
                    flat = 0
                    for ax in range(n):
                        bb = abin[ax] + offsets[k, ax]
                        if bb < 0:
                            bb = bb + nb[ax]
                        elif bb >= nb[ax]:
                            bb = bb - nb[ax]
                        flat = flat + bb * strides[ax]
                    for jj in range(starts[flat], starts[flat + 1]):
                        j = order[jj]
                        if same and j <= ai:
                            continue
                        ok = True
                        for ax in range(n):
                            d = fabs(_wrap(b[j, ax] - a[ai, ax], period[ax]))
                            if d > reach[ax]:
                                ok = False
                                break
                        if ok:
                            if pass_ == 1:
                                out_a[count] = ai
                                out_b[count] = j
                            count = count + 1
        total = count
    return out_a_arr, out_b_arr
