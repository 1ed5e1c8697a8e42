"""SINRs, rates and beam rates for rate-splitting (RS) and conventional (NoRS) precoding.

Channels are ``(n_feeds, n_users)`` matrices whose column ``k`` is ``h_k``;
a stack of ``S`` realizations has shape ``(S, n_feeds, n_users)``.  Rates are
in bits/s/Hz.
"""
import csv
import enum
from dataclasses import dataclass

import numpy as np

POWER_TOLERANCE = 1e-6


class Mode(str, enum.Enum):
    RS = "rs"
    NORS = "nors"


@dataclass(frozen=True)
class PrecoderMatrix:
    """Precoder ``P = [p_c, p_1, ..., p_M]`` stored as an ``(n_feeds, M + 1)`` array."""

    columns: np.ndarray
    mode: Mode = Mode.RS

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=complex)
        if cols.ndim != 2 or cols.shape[1] < 2:
            raise ValueError("precoder needs a common column and at least one private column")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.mode is Mode.NORS and np.any(cols[:, 0] != 0):
            raise ValueError("NoRS precoder must have an all-zero common column")

    @classmethod
    def from_parts(cls, common, private, mode=Mode.RS):
        private = np.asarray(private, dtype=complex)
        if private.ndim == 1:
            private = private[:, None]
        if common is None:
            common = np.zeros(private.shape[0], dtype=complex)
        return cls(np.column_stack([np.asarray(common, dtype=complex), private]), mode)

    @property
    def common(self):
        return self.columns[:, 0]

    @property
    def private(self):
        return self.columns[:, 1:]

    @property
    def n_feeds(self):
        return self.columns.shape[0]

    @property
    def n_beams(self):
        return self.columns.shape[1] - 1

    def feed_powers(self):
        """Diagonal of ``P P^H``."""
        return np.sum(np.abs(self.columns) ** 2, axis=1)


@dataclass(frozen=True)
class RateReport:
    common_rates: np.ndarray
    private_rates: np.ndarray
    beam_rates: np.ndarray
    mmf_value: float
    split: np.ndarray
    mode: Mode

    @property
    def common_rate(self):
        """Rate ``min_k R_c,k`` at which the common stream is decodable by all users."""
        return float(np.min(self.common_rates))

    def to_csv(self, path, beam_of_user):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kind", "index", "beam", "common_rate", "private_rate",
                             "common_portion", "beam_rate"])
            for k, (rc, rp) in enumerate(zip(self.common_rates, self.private_rates)):
                writer.writerow(["user", k, int(beam_of_user[k]), repr(float(rc)), repr(float(rp)), "", ""])
            for m, rb in enumerate(self.beam_rates):
                writer.writerow(["beam", m, m, "", "", repr(float(self.split[m])), repr(float(rb))])


def stream_gains(channels, prec):
    """``|h_k^H p_j|^2`` with shape ``(..., n_users, M + 1)``; column 0 is the common stream."""
    cols = prec.columns if isinstance(prec, PrecoderMatrix) else np.asarray(prec)
    inner = np.einsum("...nk,nj->...kj", np.conj(channels), cols)
    return np.abs(inner) ** 2


def _split_powers(gains, beam_of_user):
    beam_of_user = np.asarray(beam_of_user)
    k = np.arange(len(beam_of_user))
    common = gains[..., 0]
    private = gains[..., 1:]
    desired = private[..., k, beam_of_user]
    mask = np.ones(private.shape[-2:], dtype=bool)
    mask[k, beam_of_user] = False
    interference = np.sum(np.where(mask, private, 0.0), axis=-1)
    return common, desired, interference


def _ratio(num, den):
    # zero numerator defines zero SINR even when the denominator underflows
    return np.where(num == 0, 0.0, num / np.where(den == 0, 1.0, den))


def sinrs(channels, prec, beam_of_user, sigma2):
    """Common and private SINRs for every user (and every realization if stacked)."""
    common, desired, interference = _split_powers(stream_gains(channels, prec), beam_of_user)
    gamma_c = _ratio(common, desired + interference + sigma2)
    gamma_p = _ratio(desired, interference + sigma2)
    return gamma_c, gamma_p


def rates(channels, prec, beam_of_user, sigma2):
    """``(R_c,k, R_k)`` arrays in bits/s/Hz."""
    gamma_c, gamma_p = sinrs(channels, prec, beam_of_user, sigma2)
    return np.log2(1 + gamma_c), np.log2(1 + gamma_p)


def _single_user(h, prec, beam):
    h = np.asarray(h, dtype=complex).reshape(-1, 1)
    return h, np.array([beam])


def sinr_common(h, prec, beam, sigma2):
    """SINR of the common stream at a user with channel ``h`` served by ``beam``."""
    h, b = _single_user(h, prec, beam)
    return float(sinrs(h, prec, b, sigma2)[0][0])


def sinr_private(h, prec, beam, sigma2):
    """SINR of the beam stream after the common stream is removed by SIC."""
    h, b = _single_user(h, prec, beam)
    return float(sinrs(h, prec, b, sigma2)[1][0])


def group_minimum(values, beam_of_user, n_beams):
    beam_of_user = np.asarray(beam_of_user)
    out = np.empty(n_beams)
    for m in range(n_beams):
        members = values[beam_of_user == m]
        if members.size == 0:
            raise ValueError(f"beam {m} serves no users")
        out[m] = members.min()
    return out


def beam_rates(common_rates, private_rates, split, beam_of_user, mode, n_beams=None,
               tol=POWER_TOLERANCE):
    """Combine per-user rates into beam rates and the max-min value.

    RS beam rate is ``C_m + min_{i in G_m} R_i``; NoRS drops ``C_m``.  In RS
    mode the split must not exceed ``min_k R_c,k`` (beyond ``tol``).
    """
    mode = Mode(mode)
    common_rates = np.asarray(common_rates, dtype=float)
    private_rates = np.asarray(private_rates, dtype=float)
    n_beams = int(np.max(beam_of_user)) + 1 if n_beams is None else n_beams
    split = np.zeros(n_beams) if split is None else np.asarray(split, dtype=float)
    if split.shape != (n_beams,):
        raise ValueError(f"split must have length {n_beams}")
    if mode is Mode.NORS:
        if np.any(split != 0):
            raise ValueError("NoRS mode does not carry a common-rate split")
    else:
        if np.any(split < -tol):
            raise ValueError("common-rate portions must be nonnegative")
        if split.sum() > common_rates.min() + tol:
            raise ValueError(
                f"common-rate split {split.sum():.6g} exceeds decodable rate {common_rates.min():.6g}")
    per_beam = group_minimum(private_rates, beam_of_user, n_beams) + split
    return RateReport(common_rates, private_rates, per_beam, float(per_beam.min()), split, mode)


def average_rates(ensemble, prec, beam_of_user, sigma2, split=None):
    """Sample-average rates over an ensemble's realizations, as a :class:`RateReport`.

    ``ensemble`` may also be a bare ``(S, n_feeds, n_users)`` array.
    """
    realizations = getattr(ensemble, "realizations", ensemble)
    rc, rp = rates(realizations, prec, beam_of_user, sigma2)
    return beam_rates(rc.mean(axis=0), rp.mean(axis=0), split, beam_of_user, prec.mode,
                      n_beams=prec.n_beams)


@dataclass(frozen=True)
class PowerCheck:
    feasible: bool
    feed_power: np.ndarray
    slack: np.ndarray


def check_power(prec, cfg, tol=POWER_TOLERANCE):
    """Per-feed power ``(P P^H)_nn`` against the budget ``P / n_feeds``."""
    feed_power = prec.feed_powers()
    slack = cfg.per_feed_power - feed_power
    return PowerCheck(bool(np.all(slack >= -tol)), feed_power, slack)
