"""
Rates and the Rate-WMMSE relationship
=====================================

Common and private rates of a rate-splitting precoder, and the identity
linking them to the augmented weighted MSE at the MMSE equalizers and
weights, per realization and averaged over an ensemble.
"""
import numpy as np

from rsmasat.ratecore import Mode, PrecoderMatrix, average_rates, beam_rates, rates
from rsmasat.sysmodel import SystemConfig, make_ensemble
from rsmasat.wmmse import rate_wmmse_check, saf_coefficients, saf_wmse

rng = np.random.default_rng(1)
n_feeds, beams = 3, np.array([0, 0, 1, 1])
H = rng.standard_normal((n_feeds, 4)) + 1j * rng.standard_normal((n_feeds, 4))
P = PrecoderMatrix(rng.standard_normal((n_feeds, 3)) + 1j * rng.standard_normal((n_feeds, 3)))

rc, rp = rates(H, P, beams, 1.0)
print("common rates ", np.round(rc, 4))
print("private rates", np.round(rp, 4))

# give the whole decodable common rate to the weaker beam
split = np.zeros(2)
split[np.argmin([rp[:2].min(), rp[2:].min()])] = rc.min()
report = beam_rates(rc, rp, split, beams, Mode.RS)
print("beam rates   ", np.round(report.beam_rates, 4), " MMF", round(report.mmf_value, 4))

# xi_mmse = 1 - R for each user
for k in range(4):
    xi_c, xi, r_c, r = rate_wmmse_check(H[:, k], P, beams[k], 1.0)
    print(f"user {k}: xi_c + R_c = {xi_c + r_c:.12f}   xi + R = {xi + r:.12f}")

# the same holds for sample averages over an imperfect-CSIT ensemble
cfg = SystemConfig(n_feeds=n_feeds, users_per_beam=2)
ens = make_ensemble(H, cfg, rng, error_variance=0.2, sample_size=50)
_, saf = saf_coefficients(ens, P, beams, 1.0)
xi_c, xi = saf_wmse(saf, P, beams, 1.0)
avg = average_rates(ens, P, beams, 1.0)
print("\nS = 50: max |xi_bar + R_bar - 1| =",
      max(np.abs(xi_c + avg.common_rates - 1).max(), np.abs(xi + avg.private_rates - 1).max()))
