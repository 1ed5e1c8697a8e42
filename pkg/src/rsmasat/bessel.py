"""Bessel functions of the first kind for the multibeam antenna pattern.

Only the orders used by the beam pattern (1 and 3) are supported.  Small
arguments use the ascending power series; larger arguments fall back to
Miller's backward recurrence normalised with ``J0 + 2 * sum(J2k) = 1``.
"""
import numpy as np

SUPPORTED_ORDERS = (1, 3)
SERIES_LIMIT = 12.0
_SERIES_TERMS = 40


def _check_order(order):
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported Bessel order {order!r}; expected one of {SUPPORTED_ORDERS}")


def _series_scaled(order, x):
    """Return ``J_order(x) / x**order`` from the ascending series.

    The scaled form is finite at ``x = 0`` which the beam pattern needs.
    """
    q = -(x / 2.0) ** 2
    term = np.full_like(x, 1.0 / (2.0 ** order * np.prod(np.arange(1, order + 1))))
    total = term.copy()
    for k in range(_SERIES_TERMS):
        term = term * q / ((k + 1) * (k + 1 + order))
        total = total + term
    return total


def _miller(order, x):
    """Backward recurrence for ``x > 0`` (used above ``SERIES_LIMIT``)."""
    start = 2 * int((np.max(x) + 60) // 2)
    j_next = np.zeros_like(x)
    j_cur = np.full_like(x, 1e-300)
    result = np.zeros_like(x)
    norm = np.zeros_like(x)
    for k in range(start, 0, -1):
        j_prev = (2.0 * k / x) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        # j_cur now holds the unnormalised J_{k-1}
        if k - 1 == order:
            result = j_cur.copy()
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm = norm + 2.0 * j_cur
        big = np.abs(j_cur) > 1e250
        if np.any(big):
            scale = np.where(big, 1e-250, 1.0)
            j_cur = j_cur * scale
            j_next = j_next * scale
            result = result * scale
            norm = norm * scale
    norm = norm + j_cur
    return result / norm


def bessel_j_scaled(order, x):
    """Return ``J_order(x) / x**order`` for nonnegative ``x`` (array or scalar)."""
    _check_order(order)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("Bessel argument must be nonnegative")
    flat = np.atleast_1d(x).ravel()
    out = np.empty_like(flat)
    small = flat <= SERIES_LIMIT
    if np.any(small):
        out[small] = _series_scaled(order, flat[small])
    if np.any(~small):
        xl = flat[~small]
        out[~small] = _miller(order, xl) / xl ** order
    out = out.reshape(x.shape)
    return out if out.ndim else float(out)


def bessel_j(order, x):
    """First-kind Bessel function ``J_order(x)`` for ``order in {1, 3}`` and ``x >= 0``.

    Absolute error is below 1e-10 over the range the beam pattern reaches.
    """
    _check_order(order)
    x = np.asarray(x, dtype=float)
    out = bessel_j_scaled(order, x) * x ** order
    return out if np.ndim(out) else float(out)
