"""
One RS and one NoRS solve
=========================

Alternating optimisation on a single 7-beam instance with imperfect CSIT.
Training uses S = 100 realizations; the reported rates come from a fresh
evaluation ensemble around the same channel estimate.
"""
from rsmasat.bench import draw_instance
from rsmasat.optimizer import ao_solve, evaluate_solution
from rsmasat.ratecore import Mode, check_power
from rsmasat.sysmodel import SystemConfig

cfg = SystemConfig(csit_alpha=0.6)
geom, train, evaluation = draw_instance(cfg, seed=0, estimate=0, eval_sample_size=200)

for mode in (Mode.RS, Mode.NORS):
    res = ao_solve(train, geom.beam_of_user, cfg, mode)
    ev = evaluate_solution(res, evaluation, geom.beam_of_user, cfg)
    print(f"[{mode.value}] {res.status} after {res.iterations} iterations")
    print("   r_g trace:", " ".join(f"{x:.3f}" for x in res.objective_trace[:8]),
          "..." if res.iterations > 8 else "")
    print(f"   training objective {res.objective:.4f}, evaluation MMF {ev.mmf_average_rate:.4f}")
    if mode is Mode.RS:
        print(f"   common rate portions {ev.split.round(3)} (floor {ev.achieved_common_rate_floor:.3f})")
    print(f"   feasible: {check_power(res.precoders, cfg).feasible}")
