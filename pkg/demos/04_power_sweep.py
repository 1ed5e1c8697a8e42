"""
RS vs NoRS over per-feed power
==============================

A reduced Monte Carlo sweep (3 estimates, S = 50) over the per-feed power
grid.  The outputs are the same files the ``rsmasat sweep`` command
writes; ``plot.csv`` has one row per power with both means and errors.
Takes a few minutes on one core.
"""
import sys

from rsmasat import bench
from rsmasat.sysmodel import SystemConfig

out = sys.argv[1] if len(sys.argv) > 1 else "power_sweep"
spec = bench.ExperimentSpec(SystemConfig(csit_alpha=0.6, sample_size=50), "per_feed_power",
                            bench.POWER_GRID, n_channel_estimates=3, eval_sample_size=100)
result = bench.run_experiment(spec)

print(f"{'P/N_t (W)':>10} {'RS':>8} {'NoRS':>8} {'gain':>7}")
for p in spec.sweep_values:
    rs, nors = result.mean(p, "rs"), result.mean(p, "nors")
    print(f"{p:10g} {rs:8.3f} {nors:8.3f} {rs / nors - 1:7.1%}")

paths = bench.emit_outputs(result, out)
print("wrote", ", ".join(paths.values()))
