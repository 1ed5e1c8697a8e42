"""Rate-WMMSE machinery: MMSE equalizers, weights, augmented WMSEs and their sample averages.

The augmented WMSE is calibrated so that the closed-form weight ``u = 1/eps``
is its exact minimiser and its minimum equals ``1 - R``::

    xi(u, eps) = u * eps / ln 2 - log2(u) + 1 - 1 / ln 2

For fixed equalizers and weights, ``u * eps`` is a convex quadratic in the
precoder, which is what the precoder subproblem optimises.
"""
import csv
import math
from dataclasses import dataclass

import numpy as np

from .ratecore import PrecoderMatrix

LN2 = math.log(2.0)
WEIGHT_CAP = 1e12


class NumericalFault(ArithmeticError):
    """An upstream quantity left its mathematically guaranteed range."""


def augmented_wmse(eps, u):
    """Augmented weighted MSE for MSE ``eps`` and weight ``u > 0``."""
    eps = np.asarray(eps, dtype=float)
    u = np.asarray(u, dtype=float)
    return u * eps / LN2 - np.log2(u) + 1.0 - 1.0 / LN2


def _inner(channels, prec, beam_of_user):
    cols = prec.columns if isinstance(prec, PrecoderMatrix) else np.asarray(prec)
    beam_of_user = np.asarray(beam_of_user)
    inner = np.einsum("...nk,nj->...kj", np.conj(channels), cols)
    k = np.arange(len(beam_of_user))
    return inner, inner[..., 0], inner[..., k, beam_of_user + 1]


def _receive_powers(inner, a_c, a_p, sigma2):
    t_private = np.sum(np.abs(inner[..., 1:]) ** 2, axis=-1) + sigma2
    t_common = t_private + np.abs(a_c) ** 2
    return t_common, t_private


@dataclass(frozen=True)
class MseBreakdown:
    """Receive powers, interference portions, MSEs and augmented WMSEs of one user."""

    T_c: float
    T: float
    I_c: float
    I: float
    eps_c: float
    eps: float
    xi_c: float
    xi: float


def mmse_equalizers(h, prec, beam, sigma2):
    """Optimum scalar equalizers ``(g_c, g)`` of a user on ``beam`` with channel ``h``."""
    ch = np.asarray(h, dtype=complex).reshape(-1, 1)
    inner, a_c, a_p = _inner(ch, prec, [beam])
    t_c, t_p = _receive_powers(inner, a_c, a_p, sigma2)
    return complex(np.conj(a_c[0]) / t_c[0]), complex(np.conj(a_p[0]) / t_p[0])


def mse_values(h, prec, beam, g_c, g, sigma2, u_c=None, u=None):
    """MSEs for arbitrary equalizers; ``xi`` uses the given weights or ``1/eps``."""
    ch = np.asarray(h, dtype=complex).reshape(-1, 1)
    inner, a_c, a_p = _inner(ch, prec, [beam])
    t_c, t_p = (float(x[0]) for x in _receive_powers(inner, a_c, a_p, sigma2))
    a_c, a_p = complex(a_c[0]), complex(a_p[0])
    eps_c = abs(g_c) ** 2 * t_c - 2 * (g_c * a_c).real + 1.0
    eps = abs(g) ** 2 * t_p - 2 * (g * a_p).real + 1.0
    u_c = 1.0 / eps_c if u_c is None else u_c
    u = 1.0 / eps if u is None else u
    return MseBreakdown(
        T_c=t_c, T=t_p, I_c=t_p, I=t_p - abs(a_p) ** 2, eps_c=eps_c, eps=eps,
        xi_c=float(augmented_wmse(eps_c, u_c)), xi=float(augmented_wmse(eps, u)),
    )


def mmse_weights(mse):
    """Optimum weights ``(1/eps_c, 1/eps)``, capped at ``WEIGHT_CAP``."""
    eps_c, eps = np.asarray(mse.eps_c), np.asarray(mse.eps)
    if np.any(eps_c <= 0) or np.any(eps <= 0):
        raise NumericalFault("MMSE must be strictly positive")
    u_c = np.minimum(1.0 / eps_c, WEIGHT_CAP)
    u = np.minimum(1.0 / eps, WEIGHT_CAP)
    if u_c.ndim == 0:
        return float(u_c), float(u)
    return u_c, u


def rate_wmmse_check(h, prec, beam, sigma2):
    """Return ``(xi_c_mmse, xi_mmse, R_c, R)`` for checking ``xi_mmse = 1 - R``.

    The rates come from the SINR formulas, the WMSEs from the MSE path.
    """
    from .ratecore import sinr_common, sinr_private

    g_c, g = mmse_equalizers(h, prec, beam, sigma2)
    mse = mse_values(h, prec, beam, g_c, g, sigma2)
    u_c, u = mmse_weights(mse)
    xi_c = float(augmented_wmse(mse.eps_c, u_c))
    xi = float(augmented_wmse(mse.eps, u))
    r_c = math.log2(1 + sinr_common(h, prec, beam, sigma2))
    r = math.log2(1 + sinr_private(h, prec, beam, sigma2))
    return xi_c, xi, r_c, r


@dataclass(frozen=True)
class EqualizerWeightState:
    """Per-sample, per-user equalizers and weights, arrays of shape ``(S, K)``."""

    g_c: np.ndarray
    g: np.ndarray
    u_c: np.ndarray
    u: np.ndarray
    eps_c: np.ndarray
    eps: np.ndarray

    def wmmse(self):
        """Augmented WMSEs at these (optimal) equalizers and weights."""
        return augmented_wmse(self.eps_c, self.u_c), augmented_wmse(self.eps, self.u)


def equalizers_and_weights(channels, prec, beam_of_user, sigma2):
    """MMSE equalizers and weights for every realization in ``channels``."""
    inner, a_c, a_p = _inner(channels, prec, beam_of_user)
    t_c, t_p = _receive_powers(inner, a_c, a_p, sigma2)
    g_c = np.conj(a_c) / t_c
    g = np.conj(a_p) / t_p
    # closed forms I/T avoid cancellation in |g|^2 T - 2 Re(g a) + 1
    eps_c = t_p / t_c
    eps = (t_p - np.abs(a_p) ** 2) / t_p
    u_c, u = mmse_weights(MseBreakdown(None, None, None, None, eps_c, eps, None, None))
    return EqualizerWeightState(g_c, g, u_c, u, eps_c, eps)


@dataclass(frozen=True)
class SafCoefficients:
    """Sample averages of the WMSE coefficients; per-user arrays indexed by ``k``.

    ``psi_*`` have shape ``(K, N, N)``, ``f_*`` shape ``(K, N)``, the rest ``(K,)``.
    """

    t_c: np.ndarray
    t: np.ndarray
    psi_c: np.ndarray
    psi: np.ndarray
    f_c: np.ndarray
    f: np.ndarray
    v_c: np.ndarray
    v: np.ndarray
    u_c: np.ndarray
    u: np.ndarray
    sample_size: int

    @property
    def n_users(self):
        return self.t.shape[0]

    @property
    def n_feeds(self):
        return self.f.shape[1]

    def to_csv(self, path):
        """Debug dump: one row per user and stream, complex entries as ``re+imj``."""
        n = self.n_feeds
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["user", "stream", "t", "v", "u"]
                            + [f"f_{i}" for i in range(n)]
                            + [f"psi_{i}_{j}" for i in range(n) for j in range(n)])
            for k in range(self.n_users):
                for stream, (t, v, u, f, psi) in (
                    ("common", (self.t_c, self.v_c, self.u_c, self.f_c, self.psi_c)),
                    ("private", (self.t, self.v, self.u, self.f, self.psi)),
                ):
                    writer.writerow([k, stream, repr(float(t[k])), repr(float(v[k])), repr(float(u[k]))]
                                    + [repr(complex(x)) for x in f[k]]
                                    + [repr(complex(x)) for x in psi[k].ravel()])


def saf_coefficients(ensemble, prec, beam_of_user, sigma2, chunk=256):
    """Equalizers/weights under every realization and their sample-average coefficients.

    Samples are folded into the averages in fixed-size chunks, in order, so
    results are reproducible and memory stays bounded in ``S``.
    """
    realizations = getattr(ensemble, "realizations", ensemble)
    s_total, n, k = realizations.shape
    acc = {
        "t_c": np.zeros(k), "t": np.zeros(k), "v_c": np.zeros(k), "v": np.zeros(k),
        "u_c": np.zeros(k), "u": np.zeros(k),
        "psi_c": np.zeros((k, n, n), complex), "psi": np.zeros((k, n, n), complex),
        "f_c": np.zeros((k, n), complex), "f": np.zeros((k, n), complex),
    }
    states = []
    for start in range(0, s_total, chunk):
        h = realizations[start:start + chunk]
        st = equalizers_and_weights(h, prec, beam_of_user, sigma2)
        states.append(st)
        for suffix, g, u in (("_c", st.g_c, st.u_c), ("", st.g, st.u)):
            t = u * np.abs(g) ** 2
            acc["t" + suffix] += t.sum(axis=0)
            acc["psi" + suffix] += np.einsum("sk,snk,smk->knm", t, h, np.conj(h))
            acc["f" + suffix] += np.einsum("sk,snk->kn", u * np.conj(g), h)
            acc["v" + suffix] += np.log2(u).sum(axis=0)
            acc["u" + suffix] += u.sum(axis=0)
    state = EqualizerWeightState(*(np.concatenate([getattr(st, name) for st in states])
                                   for name in ("g_c", "g", "u_c", "u", "eps_c", "eps")))
    saf = SafCoefficients(**{key: val / s_total for key, val in acc.items()}, sample_size=s_total)
    return state, saf


def saf_wmse(saf, prec, beam_of_user, sigma2):
    """Average augmented WMSEs ``(xi_bar_c, xi_bar)`` as functions of the precoder.

    This is the quadratic form used by the precoder subproblem, evaluated
    directly for a given precoder.
    """
    cols = prec.columns if isinstance(prec, PrecoderMatrix) else np.asarray(prec)
    beam_of_user = np.asarray(beam_of_user)
    private = cols[:, 1:]
    p_c = cols[:, 0]
    quad_p = np.einsum("nj,knm,mj->k", np.conj(private), saf.psi, private).real
    quad_c = np.einsum("nj,knm,mj->k", np.conj(cols), saf.psi_c, cols).real
    lin_p = np.einsum("kn,nk->k", np.conj(saf.f), private[:, beam_of_user]).real
    lin_c = (np.conj(saf.f_c) @ p_c).real
    weighted_p = quad_p + sigma2 * saf.t - 2 * lin_p + saf.u
    weighted_c = quad_c + sigma2 * saf.t_c - 2 * lin_c + saf.u_c
    xi_p = weighted_p / LN2 - saf.v + 1.0 - 1.0 / LN2
    xi_c = weighted_c / LN2 - saf.v_c + 1.0 - 1.0 / LN2
    return xi_c, xi_p
