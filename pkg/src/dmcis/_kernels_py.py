"""Pure-Python kernels. Reference behavior for the compiled ``_kernels`` module."""

from array import array
from math import sqrt

BACKEND = "python"


def field_intensities(xs, ys, ex, ey, er, ep):
    """Cone-model intensity at each sensor, summed over the given events.

    Returns ``(values, dominant)`` where ``dominant[i]`` is the index of the
    event with the largest contribution at sensor ``i`` (first wins on ties),
    or -1 when nothing contributes.
    """
    n = len(xs)
    m = len(ex)
    values = array("d", bytes(8 * n))
    dominant = array("q", [-1]) * n
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
        values[i] = total
        dominant[i] = arg
    return values, dominant


def in_range_mask(ax, ay, ar, bx, by, br):
    """Row-major ``len(ax) x len(bx)`` mask, 1 where distance <= min range."""
    na = len(ax)
    nb = len(bx)
    mask = bytearray(na * nb)
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
                mask[row + j] = 1
    return mask
