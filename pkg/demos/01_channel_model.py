"""
Multibeam satellite channel
===========================

Beam pattern, link budget, rain fading and imperfect-CSIT ensembles for
the default 7-beam GEO system.
"""
import math

import numpy as np

from rsmasat.sysmodel import (
    SystemConfig, beam_gain, build_channel, build_gain_matrix, make_ensemble, make_geometry,
)

cfg = SystemConfig()
print(f"{cfg.n_feeds} feeds, {cfg.n_users} users, {cfg.per_feed_power:g} W per feed")

# antenna pattern: peak at boresight, -3 dB at theta_3dB
for frac in (0.0, 0.5, 1.0, 1.5, 2.0):
    g = beam_gain(frac * cfg.theta_3db, cfg)
    print(f"theta = {frac:.1f} theta_3dB   gain = {10 * math.log10(g):6.2f} dBi")

# users dropped uniformly inside each beam's 3 dB disk
rng = np.random.default_rng(0)
geom = make_geometry(cfg, rng)
B = build_gain_matrix(geom, cfg)
print("\n|B| (feeds x users), noise-normalised:")
print(np.array2string(B, precision=3, max_line_width=150))

# rain fading scales whole columns: each user sees one attenuation on every feed
H = build_channel(geom, cfg, rng)
print("\nattenuation per user (dB):", np.round(20 * np.log10(B[0] / np.abs(H[0])), 2))

# CSIT error variance decays as P**-alpha
for alpha in (0.0, 0.6, 1.0):
    print(f"alpha = {alpha:.1f}   error variance = {cfg.replace(csit_alpha=alpha).error_variance:.3e}")

ens = make_ensemble(H, cfg, rng)
err = ens.realizations - ens.estimate
print(f"\nensemble: S = {ens.sample_size}, empirical error variance "
      f"{np.mean(np.abs(err) ** 2):.3e} (target {ens.error_variance:.3e})")
