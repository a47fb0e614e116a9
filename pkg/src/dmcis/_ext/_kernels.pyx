# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; same contract and floating-point order as ``_kernels_py``."""

from cpython cimport array
import array
from libc.math cimport sqrt

BACKEND = "cython"

cdef array.array _DOUBLES = array.array("d", [])
cdef array.array _LONGS = array.array("q", [])


def field_intensities(const double[:] xs, const double[:] ys,
                      const double[:] ex, const double[:] ey,
                      const double[:] er, const double[:] ep):
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t m = ex.shape[0]
    cdef array.array values = array.clone(_DOUBLES, n, zero=True)
    cdef array.array dominant = array.clone(_LONGS, n, zero=False)
    cdef double[:] v = values
    cdef long long[:] dom = dominant
    cdef Py_ssize_t i, j, arg
    cdef double x, y, dx, dy, d, frac, c, total, best
    for i in range(n):
        x = xs[i]
        y = ys[i]
        total = 0.0
        best = 0.0
        arg = -1
        for j in range(m):
            dx = x - ex[j]
            dy = y - ey[j]
            d = sqrt(dx * dx + dy * dy)
            frac = 1.0 - d / er[j]
            if frac < 0.0:
                frac = 0.0
            c = ep[j] * frac
            total += c
            if c > best:
                best = c
                arg = j
        v[i] = total
        dom[i] = arg
    return values, dominant


def in_range_mask(const double[:] ax, const double[:] ay, const double[:] ar,
                  const double[:] bx, const double[:] by, const double[:] br):
    cdef Py_ssize_t na = ax.shape[0]
    cdef Py_ssize_t nb = bx.shape[0]
    cdef bytearray mask = bytearray(na * nb)
    cdef unsigned char[:] out = mask
    cdef Py_ssize_t i, j, row
    cdef double x, y, ra, r, dx, dy
    for i in range(na):
        x = ax[i]
        y = ay[i]
        ra = ar[i]
        row = i * nb
        for j in range(nb):
            dx = x - bx[j]
            dy = y - by[j]
            r = br[j]
            if ra < r:
                r = ra
            if sqrt(dx * dx + dy * dy) <= r:
                out[row + j] = 1
    return mask
