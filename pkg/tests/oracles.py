"""Brute-force oracles kept independent of the package code paths they check."""
import itertools
import math
from fractions import Fraction

import numpy as np


def bessel_series_exact(order, x, terms=60):
    """Ascending series summed in exact rational arithmetic, then rounded once."""
    x = Fraction(x)
    total = Fraction(0)
    for m in range(terms):
        total += Fraction((-1) ** m, math.factorial(m) * math.factorial(m + order)) * (x / 2) ** (2 * m + order)
    return float(total)


def _rates_two_user(h, p):
    """Common/private rates for users 0, 1 served by beams 0, 1.

    ``h`` is ``(2, 2)`` with user columns; ``p`` is ``(..., 2, 3)`` with
    columns ``[common, beam0, beam1]``.
    """
    # y[..., k, j] = h_k^H p_j
    y = np.einsum("nk,...nj->...kj", h.conj(), p)
    pw = np.abs(y) ** 2
    desired = np.stack([pw[..., 0, 1], pw[..., 1, 2]], axis=-1)
    interf = np.stack([pw[..., 0, 2], pw[..., 1, 1]], axis=-1)
    common = pw[..., :, 0]
    rc = np.log2(1 + common / (desired + interf + 1.0))
    rp = np.log2(1 + desired / (interf + 1.0))
    return rc, rp


def best_two_beam_split(r_common, r1, r2):
    """Max over C >= 0, C1 + C2 <= r_common of min(C1 + r1, C2 + r2), in closed form."""
    lo = np.minimum(r1, r2)
    hi = np.maximum(r1, r2)
    return np.where(lo + r_common <= hi, lo + r_common, (r1 + r2 + r_common) / 2)


def mmf_rs_two_user(h, p):
    rc, rp = _rates_two_user(h, p)
    return best_two_beam_split(rc.min(axis=-1), rp[..., 0], rp[..., 1])


def _precoders(theta, budget):
    """Map parameters ``(..., 9)`` to precoders ``(..., 2, 3)`` meeting the feed budgets.

    Per feed: an amplitude fraction and two angles place the three stream
    amplitudes on a sphere of radius ``<= sqrt(budget)``; the three stream
    phases on feed 1 are relative to feed 0 (a common phase per stream is
    irrelevant to every rate).
    """
    theta = np.asarray(theta)
    p = np.zeros(theta.shape[:-1] + (2, 3), dtype=complex)
    for n, off in ((0, 0), (1, 3)):
        amp = np.sqrt(budget) * np.clip(theta[..., off], 0, 1)
        a, b = theta[..., off + 1], theta[..., off + 2]
        p[..., n, 0] = amp * np.cos(a)
        p[..., n, 1] = amp * np.sin(a) * np.cos(b)
        p[..., n, 2] = amp * np.sin(a) * np.sin(b)
    p[..., 1, :] = p[..., 1, :] * np.exp(1j * theta[..., 6:9])
    return p


def grid_search_rs_two_user(h, per_feed_power, chunk=200_000, rounds=24, keep=6):
    """Exhaustive coarse grid plus local grid refinement of the RS max-min rate.

    Coarse grid: feed amplitude fractions {0.4, 0.7, 1.0}, both sphere angles
    on 7 points of [0, pi/2], the three relative phases on 8 points of
    [0, 2 pi): 3^2 * 7^4 * 8^3 = 11,063,808 precoders.  Refinement: from the
    best ``keep`` coarse points, every one of the 3^9 neighbours at the
    current step is evaluated and the step is halved each round.
    Returns ``(value, parameters)``.
    """
    amps = np.array([0.4, 0.7, 1.0])
    angles = np.linspace(0, np.pi / 2, 7)
    phases = np.arange(8) * (2 * np.pi / 8)
    axes = [amps, angles, angles, amps, angles, angles, phases, phases, phases]
    grids = np.meshgrid(*axes, indexing="ij")
    params = np.stack([g.ravel() for g in grids], axis=-1)
    values = np.empty(len(params))
    for start in range(0, len(params), chunk):
        values[start:start + chunk] = mmf_rs_two_user(h, _precoders(params[start:start + chunk], per_feed_power))
    order = np.argsort(values)[::-1][:keep]
    steps = np.array([0.15, np.pi / 12, np.pi / 12] * 2 + [np.pi / 8] * 3)
    moves = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=9)))
    best_val, best_par = -np.inf, None
    for idx in order:
        par, val = params[idx].copy(), values[idx]
        step = steps.copy()
        for _ in range(rounds):
            cand = par + moves * step
            cand[:, [0, 3]] = np.clip(cand[:, [0, 3]], 0, 1)
            vals = mmf_rs_two_user(h, _precoders(cand, per_feed_power))
            j = int(np.argmax(vals))
            if vals[j] > val:
                par, val = cand[j], vals[j]
            else:
                step = step / 2
        if val > best_val:
            best_val, best_par = val, par
    return float(best_val), best_par


def grid_search_scalar_power(objective, budget, points=10_000):
    """Maximise ``objective(power)`` over ``points`` evenly spaced powers in ``[0, budget]``."""
    grid = np.linspace(0, budget, points)
    vals = np.array([objective(x) for x in grid])
    i = int(np.argmax(vals))
    return grid[i], vals[i]
