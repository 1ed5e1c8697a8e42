"""Command line entry point: ``rsmasat channel | solve | sweep``."""
import argparse
import logging
import sys
import warnings

from . import bench
from .fileio import dump_ensemble, dump_precoder
from .optimizer import SOLVER_FAILURE, ao_solve, evaluate_solution
from .ratecore import Mode, average_rates
from .sysmodel import SystemConfig, load_config


def _system_args(parser):
    g = parser.add_argument_group("system")
    g.add_argument("--config", help="key-value [system] file overriding the default system parameters")
    g.add_argument("--n-feeds", type=int)
    g.add_argument("--users-per-beam", type=int)
    g.add_argument("--per-feed-power", type=float, help="Watts per feed")
    g.add_argument("--alpha", type=float, help="CSIT error scaling factor in [0, 1]")
    g.add_argument("--sample-size", type=int, help="training realizations S")
    g.add_argument("--seed", type=int, default=0)


def _config(args):
    cfg = load_config(args.config) if args.config else SystemConfig()
    changes = {}
    if args.n_feeds is not None:
        changes["n_feeds"] = args.n_feeds
    if args.users_per_beam is not None:
        changes["users_per_beam"] = args.users_per_beam
    if args.alpha is not None:
        changes["csit_alpha"] = args.alpha
    if args.sample_size is not None:
        changes["sample_size"] = args.sample_size
    cfg = cfg.replace(rng_seed=args.seed, **changes)
    if args.per_feed_power is not None:
        cfg = cfg.replace(total_power=args.per_feed_power * cfg.n_feeds)
    elif "n_feeds" in changes and not args.config:
        cfg = cfg.replace(total_power=80.0 * cfg.n_feeds)
    return cfg


def cmd_channel(args):
    cfg = _config(args)
    _, ensemble, _ = bench.draw_instance(cfg, args.seed, args.estimate, 1)
    dump_ensemble(args.output, ensemble)
    print(f"wrote ensemble n_t={cfg.n_feeds} k={cfg.n_users} s={ensemble.sample_size} "
          f"error_variance={ensemble.error_variance:.6g} to {args.output}")
    return 0


def cmd_solve(args):
    cfg = _config(args)
    geom, ensemble, evaluation = bench.draw_instance(cfg, args.seed, args.estimate, args.eval_sample_size)
    modes = list(bench.MODES) if args.mode == "both" else [Mode(args.mode)]
    status = 0
    for mode in modes:
        res = ao_solve(ensemble, geom.beam_of_user, cfg, mode, verbose=args.verbose)
        print(f"[{mode.value}] status={res.status} iterations={res.iterations}")
        for row in res.trace:
            print(f"  {row.iteration:4d}  r_g={row.objective:.6f}  viol={row.max_violation:.2e}")
        if args.trace:
            res.trace_to_csv(f"{args.trace}.{mode.value}.csv")
        if res.status == SOLVER_FAILURE:
            print(f"  solver failure: {res.diagnostics}")
            status = 1
            continue
        ev = evaluate_solution(res, evaluation, geom.beam_of_user, cfg)
        print(f"  train objective={res.objective:.6f}  eval MMF={ev.mmf_average_rate:.6f}")
        if args.precoder:
            dump_precoder(f"{args.precoder}.{mode.value}.csv", res.precoders)
        if args.rates:
            average_rates(evaluation, res.precoders, geom.beam_of_user, cfg.noise_variance,
                          split=ev.split).to_csv(f"{args.rates}.{mode.value}.csv", geom.beam_of_user)
    return status


def cmd_sweep(args):
    cfg = _config(args)
    values = tuple(sorted(args.values)) if args.values else (
        bench.POWER_GRID if args.axis == "per_feed_power" else None)
    if values is None:
        raise SystemExit("--values is required for this sweep axis")
    spec = bench.ExperimentSpec(cfg, args.axis, values, n_channel_estimates=args.estimates,
                                eval_sample_size=args.eval_sample_size, restarts=args.restarts,
                                output_path=args.output, seed=args.seed, workers=args.workers)
    if args.full_scale:
        spec = bench.full_scale(spec)
    try:
        result = bench.run_experiment(spec)
    except bench.ExperimentError as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return 2
    paths = bench.emit_outputs(result)
    for s in result.summary():
        print(f"{spec.sweep_axis}={s['sweep_value']:<8g} {s['mode']:<5} mean={s['mean']:.4f} "
              f"+/- {s['std_error']:.4f} (n={s['n']})")
    print("failures:", result.failures)
    print("outputs:", ", ".join(paths.values()))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="rsmasat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("channel", help="draw one instance and dump its channel ensemble")
    _system_args(p)
    p.add_argument("--estimate", type=int, default=0, help="channel-estimate index")
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=cmd_channel)

    p = sub.add_parser("solve", help="solve one instance and print the AO trace")
    _system_args(p)
    p.add_argument("--estimate", type=int, default=0)
    p.add_argument("--mode", choices=["rs", "nors", "both"], default="both")
    p.add_argument("--eval-sample-size", type=int, default=200)
    p.add_argument("--trace", help="prefix for per-iteration trace CSVs")
    p.add_argument("--precoder", help="prefix for precoder dumps")
    p.add_argument("--rates", help="prefix for evaluation rate-report CSVs")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="RS vs NoRS Monte Carlo sweep")
    _system_args(p)
    p.add_argument("--axis", choices=bench.SWEEP_AXES, default="per_feed_power")
    p.add_argument("--values", type=float, nargs="+")
    p.add_argument("--estimates", type=int, default=10)
    p.add_argument("--eval-sample-size", type=int, default=200)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--full-scale", action="store_true", help="100 estimates, S=1000 (hours)")
    p.add_argument("--output", "-o", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING)
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="Solution may be inaccurate")
        try:
            return args.func(args)
        except (ValueError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2


if __name__ == "__main__":
    sys.exit(main())
