"""Monte Carlo RS-vs-NoRS experiments over power, CSIT quality and beam load.

Every instance (sweep value x channel estimate) draws a geometry, a true
channel, a training ensemble and an independent evaluation ensemble from
seeds derived only from ``(seed, estimate index)``, so RS and NoRS always see
identical data and the same channel estimates are reused across sweep
values.  The experiment is a pure function of its :class:`ExperimentSpec`.
"""
import csv
import dataclasses
import json
import logging
import math
import os
import subprocess
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .optimizer import SOLVER_FAILURE, ao_solve, evaluate_solution, initialize_precoders
from .ratecore import Mode
from .sysmodel import SystemConfig, build_channel, make_ensemble, make_geometry, resample

logger = logging.getLogger(__name__)

SWEEP_AXES = ("per_feed_power", "alpha", "users_per_beam")
POWER_GRID = (10.0, 20.0, 40.0, 80.0, 160.0)
MAX_FAILURE_FRACTION = 0.10
MODES = (Mode.RS, Mode.NORS)


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    base_config: SystemConfig = field(default_factory=SystemConfig)
    sweep_axis: str = "per_feed_power"
    sweep_values: tuple = POWER_GRID
    n_channel_estimates: int = 10
    eval_sample_size: int = 200
    restarts: int = 1
    output_path: str = None
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.sweep_axis not in SWEEP_AXES:
            raise ValueError(f"sweep_axis must be one of {SWEEP_AXES}")
        values = tuple(self.sweep_values)
        if not values:
            raise ValueError("sweep_values must be nonempty")
        if list(values) != sorted(values):
            raise ValueError("sweep_values must be sorted")
        object.__setattr__(self, "sweep_values", values)
        if self.n_channel_estimates < 1 or self.restarts < 1 or self.eval_sample_size < 1:
            raise ValueError("n_channel_estimates, restarts and eval_sample_size must be >= 1")

    def config_for(self, value):
        cfg = self.base_config
        if self.sweep_axis == "per_feed_power":
            return cfg.replace(total_power=float(value) * cfg.n_feeds)
        if self.sweep_axis == "alpha":
            return cfg.replace(csit_alpha=float(value))
        return cfg.replace(users_per_beam=int(value))


def full_scale(spec):
    """Full-scale protocol (100 estimates, S = 1000); expect hours of solver time."""
    warnings.warn("full-scale experiments run 100 estimates with S=1000 samples and take hours")
    return dataclasses.replace(spec, n_channel_estimates=100,
                               base_config=spec.base_config.replace(sample_size=1000))


@dataclass(frozen=True)
class InstanceRow:
    sweep_value: float
    estimate: int
    mode: str
    mmf_rate: float
    train_objective: float
    common_rate_share: float
    iterations: int
    status: str


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    rows: list
    failures: int
    metadata: dict

    def summary(self):
        """Mean MMF rate and standard error per ``(sweep_value, mode)``."""
        out = []
        for value in self.spec.sweep_values:
            for mode in MODES:
                vals = np.array([r.mmf_rate for r in self.rows
                                 if r.sweep_value == value and r.mode == mode.value])
                mean = float(vals.mean()) if vals.size else float("nan")
                err = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
                out.append({"sweep_value": value, "mode": mode.value, "mean": mean,
                            "std_error": err, "n": int(vals.size)})
        return out

    def mean(self, value, mode):
        for row in self.summary():
            if row["sweep_value"] == value and row["mode"] == Mode(mode).value:
                return row["mean"]
        raise KeyError((value, mode))

    def paired_values(self, value):
        """``(rs, nors)`` arrays of per-estimate MMF rates at one sweep value."""
        rs = {r.estimate: r.mmf_rate for r in self.rows if r.sweep_value == value and r.mode == "rs"}
        nors = {r.estimate: r.mmf_rate for r in self.rows if r.sweep_value == value and r.mode == "nors"}
        keys = sorted(rs.keys() & nors.keys())
        return np.array([rs[k] for k in keys]), np.array([nors[k] for k in keys])


def instance_seeds(seed, estimate):
    """Independent generators for geometry, fading, CSIT draws and evaluation samples."""
    ss = np.random.SeedSequence([seed, estimate])
    return [np.random.default_rng(s) for s in ss.spawn(4)]


def draw_instance(cfg, seed, estimate, eval_sample_size):
    geo_rng, fade_rng, csit_rng, eval_rng = instance_seeds(seed, estimate)
    geom = make_geometry(cfg, geo_rng)
    true_channel = build_channel(geom, cfg, fade_rng)
    ensemble = make_ensemble(true_channel, cfg, csit_rng)
    evaluation = resample(ensemble, eval_rng, eval_sample_size)
    return geom, ensemble, evaluation


def best_of_restarts(ensemble, beam_of_user, cfg, mode, restarts, seed, estimate):
    """Deterministic initialization first, then random-phase restarts; keep the best objective."""
    best = None
    for r in range(restarts):
        rng = None if r == 0 else np.random.default_rng([seed, estimate, r])
        init = initialize_precoders(ensemble.estimate, beam_of_user, cfg, mode, rng=rng)
        res = ao_solve(ensemble, beam_of_user, cfg, mode, initial=init)
        if res.status == SOLVER_FAILURE:
            continue
        if best is None or res.objective > best.objective:
            best = res
    return best


def run_instance(spec, value, estimate):
    """Solve RS and NoRS on one shared instance; ``None`` marks a failure."""
    cfg = spec.config_for(value)
    geom, ensemble, evaluation = draw_instance(cfg, spec.seed, estimate, spec.eval_sample_size)
    rows = []
    for mode in MODES:
        res = best_of_restarts(ensemble, geom.beam_of_user, cfg, mode, spec.restarts, spec.seed, estimate)
        if res is None:
            return None
        ev = evaluate_solution(res, evaluation, geom.beam_of_user, cfg)
        rows.append(InstanceRow(float(value), estimate, mode.value, ev.mmf_average_rate, res.objective,
                                float(ev.split.sum()), res.iterations, res.status))
    return rows


def _run_task(args):
    spec, value, estimate = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return value, estimate, run_instance(spec, value, estimate)


def version_string():
    """``git describe`` of the source tree when available, else the package version."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def run_experiment(spec):
    """Run every (sweep value, estimate) instance and collect paired RS/NoRS rows.

    Raises :class:`ExperimentError` if more than 10% of instances fail.
    """
    tasks = [(spec, v, e) for v in spec.sweep_values for e in range(spec.n_channel_estimates)]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            outcomes = list(pool.map(_run_task, tasks))
    else:
        outcomes = [_run_task(t) for t in tasks]
    rows, failures = [], 0
    for value, estimate, inst in outcomes:
        if inst is None:
            failures += 1
            logger.warning("instance value=%s estimate=%d failed", value, estimate)
            continue
        rows.extend(inst)
    rows.sort(key=lambda r: (r.sweep_value, r.estimate, MODES.index(Mode(r.mode))))
    if failures > MAX_FAILURE_FRACTION * len(tasks):
        raise ExperimentError(f"{failures} of {len(tasks)} instances failed")
    metadata = {
        "version": version_string(),
        "seed": spec.seed,
        "sweep_axis": spec.sweep_axis,
        "sweep_values": list(spec.sweep_values),
        "n_channel_estimates": spec.n_channel_estimates,
        "eval_sample_size": spec.eval_sample_size,
        "restarts": spec.restarts,
        "instances": len(tasks),
        "failures": failures,
        "config": dataclasses.asdict(spec.base_config),
    }
    return ExperimentResult(spec, rows, failures, metadata)


def _fmt(x):
    return repr(float(x))


def emit_outputs(result, output_dir=None):
    """Write ``tidy.csv``, ``summary.csv``, ``plot.csv`` and ``metadata.json``; return their paths."""
    output_dir = output_dir or result.spec.output_path
    if output_dir is None:
        raise ValueError("no output path given")
    if not result.rows:
        raise ValueError("experiment produced no rows")
    try:
        os.makedirs(output_dir, exist_ok=True)
        paths = {name: os.path.join(output_dir, name)
                 for name in ("tidy.csv", "summary.csv", "plot.csv", "metadata.json")}
        with open(paths["tidy.csv"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sweep_value", "estimate", "mode", "mmf_rate", "train_objective",
                        "common_rate_share", "iterations", "status"])
            for r in result.rows:
                w.writerow([_fmt(r.sweep_value), r.estimate, r.mode, _fmt(r.mmf_rate),
                            _fmt(r.train_objective), _fmt(r.common_rate_share), r.iterations, r.status])
        summary = result.summary()
        with open(paths["summary.csv"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sweep_value", "mode", "mean_mmf_rate", "std_error", "n"])
            for s in summary:
                w.writerow([_fmt(s["sweep_value"]), s["mode"], _fmt(s["mean"]), _fmt(s["std_error"]), s["n"]])
        by_key = {(s["sweep_value"], s["mode"]): s for s in summary}
        with open(paths["plot.csv"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([result.spec.sweep_axis, "rs_mean", "rs_err", "nors_mean", "nors_err"])
            for v in result.spec.sweep_values:
                rs, nr = by_key[(v, "rs")], by_key[(v, "nors")]
                w.writerow([_fmt(v), _fmt(rs["mean"]), _fmt(rs["std_error"]),
                            _fmt(nr["mean"]), _fmt(nr["std_error"])])
        with open(paths["metadata.json"], "w") as fh:
            json.dump(result.metadata, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write experiment outputs to {output_dir!r}: {exc}") from exc
    return paths
