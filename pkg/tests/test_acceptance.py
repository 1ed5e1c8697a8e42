"""End-to-end acceptance checks, one test per criterion.

Each test records a ``criterion N: PASS|FAIL`` line (shown in the terminal
summary) before asserting.  Criteria 7 and 8 are desk-scale Monte Carlo runs
of a few minutes each.
"""
import math
import time

import numpy as np
import pytest

from oracles import bessel_series_exact, grid_search_rs_two_user
from rsmasat import bench
from rsmasat.optimizer import ao_solve, evaluate_solution, training_violation
from rsmasat.ratecore import Mode, PrecoderMatrix, average_rates, check_power
from rsmasat.sysmodel import (
    SystemConfig, beam_gain, bessel_j, build_channel, make_ensemble, make_geometry,
)
from rsmasat.wmmse import rate_wmmse_check, saf_coefficients, saf_wmse

# full-scale RS gains quoted for the 7-beam system; reported, never asserted
REFERENCE_GAINS = {"overall": 0.25, "fig2_low": 0.31, "fig2_high": 0.44}
TREND_SEED = 2021


def _random_precoder(rng, n, m, scale):
    cols = rng.standard_normal((n, m + 1)) + 1j * rng.standard_normal((n, m + 1))
    return PrecoderMatrix(scale * cols)


def test_criterion_1_rate_wmmse_identity(verdict):
    rng = np.random.default_rng(101)
    worst = 0.0
    start = time.perf_counter()
    for _ in range(1000):
        n, m = int(rng.integers(1, 8)), int(rng.integers(1, 8))
        h = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        p = _random_precoder(rng, n, m, 10 ** rng.uniform(-1.5, 1.5))
        sigma2 = 10 ** rng.uniform(-2, 1)
        xi_c, xi, r_c, r = rate_wmmse_check(h, p, int(rng.integers(m)), sigma2)
        worst = max(worst, abs(xi_c - (1 - r_c)), abs(xi - (1 - r)))
    elapsed = time.perf_counter() - start
    verdict(1, worst < 1e-9 and elapsed < 1.0,
            f"max |xi_mmse - (1 - R)| = {worst:.2e} over 1000 instances (< 1e-9), {elapsed:.2f} s")


def test_criterion_2_saf_identity(verdict):
    rng = np.random.default_rng(202)
    worst = 0.0
    start = time.perf_counter()
    for s in (1, 7, 50):
        for _ in range(10):
            n, rho, m = int(rng.integers(2, 8)), int(rng.integers(1, 3)), int(rng.integers(1, 4))
            beams = np.repeat(np.arange(m), rho)
            cfg = SystemConfig(n_feeds=n, users_per_beam=rho)
            h = rng.standard_normal((n, m * rho)) + 1j * rng.standard_normal((n, m * rho))
            ens = make_ensemble(h, cfg, rng, error_variance=10 ** rng.uniform(-2, 0), sample_size=s)
            p = _random_precoder(rng, n, m, 10 ** rng.uniform(-1, 1))
            _, saf = saf_coefficients(ens, p, beams, 1.0)
            xi_c, xi = saf_wmse(saf, p, beams, 1.0)
            rep = average_rates(ens, p, beams, 1.0)
            worst = max(worst, np.max(np.abs(xi_c - (1 - rep.common_rates))),
                        np.max(np.abs(xi - (1 - rep.private_rates))))
    elapsed = time.perf_counter() - start
    verdict(2, worst < 1e-9 and elapsed < 1.0,
            f"max |xi_bar - (1 - R_bar)| = {worst:.2e} for S in {{1, 7, 50}} (< 1e-9), {elapsed:.2f} s")


def test_criterion_3_channel_golden_values(verdict):
    cfg = SystemConfig()
    start = time.perf_counter()
    peak_exact = beam_gain(0.0, cfg) == cfg.g_max
    half_db = 10 * math.log10(beam_gain(cfg.theta_3db, cfg) / (cfg.g_max / 2))
    j1 = abs(bessel_j(1, 1.0) - bessel_series_exact(1, 1))
    j3 = abs(bessel_j(3, 1.0) - bessel_series_exact(3, 1))
    elapsed = time.perf_counter() - start
    ok = peak_exact and abs(half_db) <= 0.2 and j1 < 1e-10 and j3 < 1e-10 and elapsed < 1.0
    verdict(3, ok, f"G(0) == G_max: {peak_exact}; G(theta_3dB) vs G_max/2: {half_db:+.4f} dB; "
                   f"|J1(1) err| = {j1:.1e}, |J3(1) err| = {j3:.1e}")


def _desk_instances(count=50, seed=404):
    rng = np.random.default_rng(seed)
    for i in range(count):
        cfg = SystemConfig(n_feeds=int(rng.choice([3, 7])), users_per_beam=int(rng.choice([1, 2])),
                           csit_alpha=float(rng.uniform(0.4, 1.0)), sample_size=int(rng.integers(5, 51)))
        cfg = cfg.replace(total_power=float(rng.choice(bench.POWER_GRID)) * cfg.n_feeds)
        geom, ens, _ = bench.draw_instance(cfg, seed, i, 1)
        yield cfg, geom.beam_of_user, ens


@pytest.fixture(scope="module")
def desk_runs():
    start = time.perf_counter()
    runs = []
    for cfg, beams, ens in _desk_instances():
        rs = ao_solve(ens, beams, cfg, Mode.RS)
        nors = ao_solve(ens, beams, cfg, Mode.NORS)
        runs.append((cfg, beams, ens, rs, nors))
    return runs, time.perf_counter() - start


def test_criterion_4_ao_monotone_and_feasible(verdict, desk_runs):
    runs, elapsed = desk_runs
    worst_drop, worst_viol, statuses = 0.0, 0.0, set()
    for cfg, beams, ens, rs, nors in runs:
        for res in (rs, nors):
            statuses.add(res.status)
            drops = -np.diff(res.objective_trace)
            worst_drop = max(worst_drop, float(drops.max()) if drops.size else 0.0)
            power = check_power(res.precoders, cfg)
            worst_viol = max(worst_viol, float(max(0.0, -power.slack.min())),
                             training_violation(res, ens, beams, cfg), res.trace[-1].max_violation)
    ok = worst_drop <= 1e-6 and worst_viol <= 1e-6 and "solver_failure" not in statuses and elapsed < 600
    verdict(4, ok, f"{len(runs)} instances x 2 modes: max trace drop {worst_drop:.1e}, "
                   f"max violation {worst_viol:.1e}, statuses {sorted(statuses)}, {elapsed:.0f} s")


def test_criterion_5_small_instance_grid_oracle(verdict):
    cfg = SystemConfig(n_feeds=2, users_per_beam=1, total_power=160.0, sample_size=1)
    start = time.perf_counter()
    gaps = []
    for seed in range(4):
        rng = np.random.default_rng(seed)
        geom = make_geometry(cfg, rng)
        h = build_channel(geom, cfg, rng)
        ens = make_ensemble(h, cfg, rng, error_variance=0.0)
        res = ao_solve(ens, geom.beam_of_user, cfg, Mode.RS)
        ao_value = evaluate_solution(res, ens, geom.beam_of_user, cfg).mmf_average_rate
        grid_value, _ = grid_search_rs_two_user(h, cfg.per_feed_power)
        gaps.append((ao_value - grid_value) / grid_value)
    elapsed = time.perf_counter() - start
    worst = max(abs(g) for g in gaps)
    verdict(5, worst <= 0.02 and elapsed < 300,
            f"AO vs grid relative differences {', '.join(f'{g:+.1e}' for g in gaps)} "
            f"(|.| <= 2%), {elapsed:.0f} s")


def test_criterion_6_subset_dominance(verdict, desk_runs):
    runs, _ = desk_runs
    gaps = []
    for cfg, beams, ens, rs, nors in runs:
        rs_mmf = evaluate_solution(rs, ens, beams, cfg).mmf_average_rate
        nors_mmf = evaluate_solution(nors, ens, beams, cfg).mmf_average_rate
        gaps.append(rs_mmf - nors_mmf)
    worst = min(gaps)
    verdict(6, worst >= -1e-4, f"min RS - NoRS MMF over {len(gaps)} paired runs = {worst:+.4f} (>= -1e-4)")


def _trend_spec(axis, values, **cfg_changes):
    base = SystemConfig(n_feeds=7, users_per_beam=2, sample_size=100).replace(**cfg_changes)
    return bench.ExperimentSpec(base.replace(total_power=80.0 * 7), axis, values,
                                n_channel_estimates=10, eval_sample_size=200, seed=TREND_SEED)


@pytest.mark.slow
def test_criterion_7_csit_quality_trend(verdict):
    start = time.perf_counter()
    result = bench.run_experiment(_trend_spec("alpha", (0.6, 1.0)))
    elapsed = time.perf_counter() - start
    ratio = {a: result.mean(a, "rs") / result.mean(a, "nors") for a in (0.6, 1.0)}
    ok = ratio[0.6] > 1.05 and ratio[0.6] - 1 > ratio[1.0] - 1 and elapsed < 7200
    targets = ", ".join(f"{v:.0%}" for v in REFERENCE_GAINS.values())
    verdict(7, ok, f"RS/NoRS ratio {ratio[0.6]:.3f} at alpha=0.6 (> 1.05), {ratio[1.0]:.3f} at alpha=1.0; "
                   f"gap {ratio[0.6] - 1:.1%} vs {ratio[1.0] - 1:.1%} (full-scale reference gains "
                   f"{targets}, not asserted); failures {result.failures}, {elapsed:.0f} s")


@pytest.mark.slow
def test_criterion_8_overload_degradation(verdict):
    start = time.perf_counter()
    result = bench.run_experiment(_trend_spec("users_per_beam", (2, 4), csit_alpha=0.8))
    elapsed = time.perf_counter() - start
    means = {(rho, mode): result.mean(rho, mode) for rho in (2, 4) for mode in ("rs", "nors")}
    ok = all(means[(4, mode)] <= means[(2, mode)] for mode in ("rs", "nors")) and elapsed < 7200
    verdict(8, ok, f"RS {means[(2, 'rs')]:.3f} -> {means[(4, 'rs')]:.3f}, "
                   f"NoRS {means[(2, 'nors')]:.3f} -> {means[(4, 'nors')]:.3f} for rho 2 -> 4; "
                   f"failures {result.failures}, {elapsed:.0f} s")


def test_criterion_9_determinism(verdict, tmp_path):
    spec = bench.ExperimentSpec(SystemConfig(n_feeds=3, users_per_beam=2, total_power=240.0, sample_size=10),
                                "per_feed_power", (40.0, 80.0), n_channel_estimates=2,
                                eval_sample_size=20, seed=9)
    first = bench.emit_outputs(bench.run_experiment(spec), str(tmp_path / "a"))
    second = bench.emit_outputs(bench.run_experiment(spec), str(tmp_path / "b"))
    same = {name: open(first[name], "rb").read() == open(second[name], "rb").read() for name in first}
    verdict(9, all(same.values()), f"byte-identical outputs on re-run: {same}")
