"""Multibeam GEO satellite channel model.

The downlink channel is ``H = B o Q`` where ``B`` collects the receive
antenna gain, free-space loss and the multibeam radiation pattern, and ``Q``
carries per-user rain attenuation and phase (identical across feeds).
Imperfect CSIT is modelled by an additive i.i.d. complex Gaussian error whose
per-entry variance decays as ``P ** -alpha``.
"""
import configparser
import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .bessel import bessel_j, bessel_j_scaled

__all__ = [
    "BOLTZMANN", "SPEED_OF_LIGHT", "SystemConfig", "Geometry", "ChannelEnsemble",
    "bessel_j", "beam_gain", "make_geometry", "build_gain_matrix",
    "sample_fading_matrix", "build_channel", "make_ensemble", "resample", "load_config",
    "dump_config", "geometry_from_positions", "hexagonal_centers",
]

BOLTZMANN = 1.380649e-23
SPEED_OF_LIGHT = 2.998e8
PATTERN_CONSTANT = 2.07123


def _db_to_linear(db):
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Physical and algorithmic parameters of one simulated system.

    Gains ``g_max`` and ``g_rx`` are linear; use :meth:`from_dbi` or
    :func:`load_config` to start from dBi values.  ``total_power`` is the
    satellite power ``P`` in Watts, shared as ``P / n_feeds`` per feed.
    """

    carrier_frequency: float = 20e9
    satellite_height: float = 35786e3
    user_bandwidth: float = 500e6
    theta_3db: float = math.radians(0.4)
    g_max: float = _db_to_linear(52.0)
    g_rx: float = _db_to_linear(41.7)
    t_sys: float = 517.0
    rain_mu: float = -3.125
    rain_sigma: float = 1.591
    n_feeds: int = 7
    users_per_beam: int = 2
    total_power: float = 7 * 80.0
    csit_alpha: float = 0.6
    sample_size: int = 100
    noise_variance: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_feeds < 1 or self.users_per_beam < 1:
            raise ValueError("n_feeds and users_per_beam must be >= 1")
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")
        if not 0.0 <= self.csit_alpha <= 1.0:
            raise ValueError(f"csit_alpha must lie in [0, 1], got {self.csit_alpha}")
        positive = ("carrier_frequency", "satellite_height", "user_bandwidth", "theta_3db",
                    "g_max", "g_rx", "t_sys", "total_power", "noise_variance")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.rain_sigma > 0:
            raise ValueError("rain_sigma must be strictly positive")

    @classmethod
    def from_dbi(cls, g_max_dbi=52.0, g_rx_dbi=41.7, **kwargs):
        return cls(g_max=_db_to_linear(g_max_dbi), g_rx=_db_to_linear(g_rx_dbi), **kwargs)

    @classmethod
    def with_per_feed_power(cls, per_feed_power, **kwargs):
        n_feeds = kwargs.get("n_feeds", cls.n_feeds)
        return cls(total_power=per_feed_power * n_feeds, **kwargs)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @property
    def n_beams(self):
        # single feed per beam
        return self.n_feeds

    @property
    def n_users(self):
        return self.users_per_beam * self.n_feeds

    @property
    def per_feed_power(self):
        return self.total_power / self.n_feeds

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def error_variance(self):
        """Per-entry CSIT error variance ``P ** -alpha``."""
        return self.total_power ** (-self.csit_alpha)


# -- configuration files ------------------------------------------------------

# key -> (field, converter from file value to field value)
_CONFIG_KEYS = {
    "carrier_frequency_hz": ("carrier_frequency", float),
    "satellite_height_m": ("satellite_height", float),
    "user_bandwidth_hz": ("user_bandwidth", float),
    "theta_3db_deg": ("theta_3db", lambda v: math.radians(float(v))),
    "g_max_dbi": ("g_max", lambda v: _db_to_linear(float(v))),
    "g_rx_dbi": ("g_rx", lambda v: _db_to_linear(float(v))),
    "t_sys_k": ("t_sys", float),
    "rain_mu": ("rain_mu", float),
    "rain_sigma": ("rain_sigma", float),
    "n_feeds": ("n_feeds", int),
    "users_per_beam": ("users_per_beam", int),
    "total_power_w": ("total_power", float),
    "csit_alpha": ("csit_alpha", float),
    "sample_size": ("sample_size", int),
    "noise_variance": ("noise_variance", float),
    "rng_seed": ("rng_seed", int),
}


def load_config(path, base=None):
    """Read a ``[system]`` key-value file on top of ``base`` (the default parameters).

    ``per_feed_power_w`` is accepted as an alternative to ``total_power_w``.
    Unknown keys raise ``ValueError``.
    """
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    if "system" not in parser:
        raise ValueError(f"{path}: missing [system] section")
    section = parser["system"]
    changes = {}
    per_feed = None
    for key, raw in section.items():
        if key == "per_feed_power_w":
            per_feed = float(raw)
            continue
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}: unknown configuration key {key!r}")
        name, convert = _CONFIG_KEYS[key]
        changes[name] = convert(raw)
    cfg = (base or SystemConfig()).replace(**changes)
    if per_feed is not None:
        if "total_power" in changes:
            raise ValueError(f"{path}: give total_power_w or per_feed_power_w, not both")
        cfg = cfg.replace(total_power=per_feed * cfg.n_feeds)
    return cfg


def dump_config(cfg):
    """Serialise ``cfg`` to the key-value text understood by :func:`load_config`."""
    values = {
        "carrier_frequency_hz": cfg.carrier_frequency,
        "satellite_height_m": cfg.satellite_height,
        "user_bandwidth_hz": cfg.user_bandwidth,
        "theta_3db_deg": math.degrees(cfg.theta_3db),
        "g_max_dbi": 10 * math.log10(cfg.g_max),
        "g_rx_dbi": 10 * math.log10(cfg.g_rx),
        "t_sys_k": cfg.t_sys,
        "rain_mu": cfg.rain_mu,
        "rain_sigma": cfg.rain_sigma,
        "n_feeds": cfg.n_feeds,
        "users_per_beam": cfg.users_per_beam,
        "total_power_w": cfg.total_power,
        "csit_alpha": cfg.csit_alpha,
        "sample_size": cfg.sample_size,
        "noise_variance": cfg.noise_variance,
        "rng_seed": cfg.rng_seed,
    }
    lines = ["[system]"] + [f"{k} = {v!r}" for k, v in values.items()]
    return "\n".join(lines) + "\n"


# -- geometry -----------------------------------------------------------------

@dataclass(frozen=True)
class Geometry:
    """Beam centres and user positions as angular offsets (radians) seen from the satellite.

    ``boresight_angles[n, k]`` is the angle between user ``k`` and the centre
    of beam ``n``; ``beam_of_user[k]`` is the serving beam.
    """

    beam_centers: np.ndarray
    user_positions: np.ndarray
    beam_of_user: np.ndarray
    slant_ranges: np.ndarray
    boresight_angles: np.ndarray = field(repr=False)

    @property
    def n_beams(self):
        return len(self.beam_centers)

    @property
    def n_users(self):
        return len(self.user_positions)

    def groups(self):
        """User indices of each beam, in beam order."""
        return [np.flatnonzero(self.beam_of_user == m) for m in range(self.n_beams)]


def hexagonal_centers(n_beams, spacing):
    """First ``n_beams`` points of a hexagonal lattice, nearest to the origin first."""
    rings = int(math.ceil(math.sqrt(n_beams))) + 1
    pts = []
    a1 = np.array([1.0, 0.0])
    a2 = np.array([0.5, math.sqrt(3) / 2])
    for i in range(-rings, rings + 1):
        for j in range(-rings, rings + 1):
            p = i * a1 + j * a2
            pts.append((round(float(np.hypot(*p)), 9), round(math.atan2(p[1], p[0]) % (2 * math.pi), 9),
                        p[0], p[1]))
    pts.sort()
    return spacing * np.array([[p[2], p[3]] for p in pts[:n_beams]])


def geometry_from_positions(beam_centers, user_positions, beam_of_user, satellite_height):
    beam_centers = np.asarray(beam_centers, dtype=float).reshape(-1, 2)
    user_positions = np.asarray(user_positions, dtype=float).reshape(-1, 2)
    beam_of_user = np.asarray(beam_of_user, dtype=int)
    diff = user_positions[None, :, :] - beam_centers[:, None, :]
    angles = np.hypot(diff[..., 0], diff[..., 1])
    ranges = np.full(len(user_positions), float(satellite_height))
    return Geometry(beam_centers, user_positions, beam_of_user, ranges, angles)


def make_geometry(cfg, rng):
    """Hexagonal beam layout, ``users_per_beam`` users uniform in each beam's 3 dB disk.

    Adjacent beam centres are ``2 * theta_3db`` apart so neighbouring beams
    cross near their 3 dB contours.  All users share the nadir slant range.
    """
    centers = hexagonal_centers(cfg.n_beams, 2.0 * cfg.theta_3db)
    rho = cfg.users_per_beam
    beam_of_user = np.repeat(np.arange(cfg.n_beams), rho)
    radius = cfg.theta_3db * np.sqrt(rng.uniform(size=cfg.n_users))
    phase = rng.uniform(0.0, 2 * np.pi, size=cfg.n_users)
    users = centers[beam_of_user] + np.column_stack([radius * np.cos(phase), radius * np.sin(phase)])
    return geometry_from_positions(centers, users, beam_of_user, cfg.satellite_height)


# -- channel ------------------------------------------------------------------

def beam_gain(theta, cfg):
    """Linear multibeam antenna gain at off-axis angle ``theta`` (radians).

    Uses the ``J1/(2u) + 36 J3/u^3`` pattern with the scaled Bessel series so
    the beam centre evaluates to ``g_max`` exactly.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise ValueError("theta must be nonnegative")
    u = PATTERN_CONSTANT * np.sin(theta) / math.sin(cfg.theta_3db)
    bracket = bessel_j_scaled(1, u) / 2.0 + 36.0 * bessel_j_scaled(3, u)
    return cfg.g_max * np.square(bracket)


def build_gain_matrix(geom, cfg):
    """Deterministic attenuation matrix ``B`` (n_feeds x n_users), noise-normalised."""
    d = np.asarray(geom.slant_ranges, dtype=float)
    if np.any(d <= 0):
        raise ValueError("invalid geometry: slant ranges must be positive")
    gains = beam_gain(geom.boresight_angles, cfg)
    path = 4 * np.pi * d / cfg.wavelength
    noise = math.sqrt(BOLTZMANN * cfg.t_sys * cfg.user_bandwidth)
    return np.sqrt(cfg.g_rx * gains) / (path[None, :] * noise)


def sample_fading_matrix(cfg, rng):
    """Rain fading and phase matrix ``Q``; every column is constant across feeds."""
    chi_db = np.exp(rng.normal(cfg.rain_mu, cfg.rain_sigma, size=cfg.n_users))
    chi = 10.0 ** (chi_db / 20.0)
    phi = rng.uniform(0.0, 2 * np.pi, size=cfg.n_users)
    q = chi ** -0.5 * np.exp(-1j * phi)
    return np.tile(q, (cfg.n_feeds, 1))


def build_channel(geom, cfg, rng, fading=None):
    """True channel ``H = B o Q``; ``fading`` overrides the random ``Q`` draw."""
    gain = build_gain_matrix(geom, cfg)
    q = sample_fading_matrix(cfg, rng) if fading is None else np.asarray(fading)
    if q.shape != gain.shape:
        raise RuntimeError(f"fading shape {q.shape} does not match gain shape {gain.shape}")
    return gain * q


@dataclass(frozen=True)
class ChannelEnsemble:
    """A channel estimate and ``S`` realizations ``H_s = H_hat + error_s``.

    ``realizations`` has shape ``(S, n_feeds, n_users)``.
    """

    estimate: np.ndarray
    realizations: np.ndarray
    error_variance: float

    @property
    def sample_size(self):
        return self.realizations.shape[0]

    @property
    def shape(self):
        return self.estimate.shape


def complex_gaussian(rng, shape, variance):
    """Circularly symmetric CN(0, variance) draws."""
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def make_ensemble(true_channel, cfg, rng, error_variance=None, sample_size=None):
    """Estimate ``H_hat = H - E`` and ``S`` fresh realizations around it.

    ``error_variance`` defaults to ``cfg.error_variance``; zero gives a
    perfect-CSIT ensemble.  ``sample_size`` defaults to ``cfg.sample_size``.
    """
    if not 0.0 <= cfg.csit_alpha <= 1.0:
        raise ValueError("csit_alpha must lie in [0, 1]")
    var = cfg.error_variance if error_variance is None else float(error_variance)
    if var < 0:
        raise ValueError("error variance must be nonnegative")
    s = cfg.sample_size if sample_size is None else int(sample_size)
    if s < 1:
        raise ValueError("sample size must be >= 1")
    h = np.asarray(true_channel, dtype=complex)
    estimate = h - complex_gaussian(rng, h.shape, var)
    realizations = estimate[None] + complex_gaussian(rng, (s,) + h.shape, var)
    return ChannelEnsemble(estimate, realizations, var)


def resample(ensemble, rng, sample_size):
    """Fresh realizations around the same estimate (used for evaluation)."""
    var = ensemble.error_variance
    shape = (int(sample_size),) + ensemble.estimate.shape
    realizations = ensemble.estimate[None] + complex_gaussian(rng, shape, var)
    return ChannelEnsemble(ensemble.estimate, realizations, var)
