"""Alternating-optimization max-min fair precoder design.

Each iteration fixes the MMSE equalizers and weights at the current
precoder, folds them into sample-average coefficients, and solves a convex
precoder subproblem (a second-order cone program) for the precoder, the
common-rate split and the epigraph variables.  NoRS is the same problem with
the common stream and the split pinned to zero.
"""
import csv
import logging
import math
import time
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .ratecore import Mode, POWER_TOLERANCE, PrecoderMatrix, average_rates, beam_rates, check_power
from .wmmse import LN2, NumericalFault, saf_coefficients, saf_wmse

logger = logging.getLogger(__name__)

CONVERGENCE_TOL = 1e-4
MAX_ITERATIONS = 200
PSD_TOLERANCE = 1e-9

CONVERGED = "converged"
MAX_ITER = "max_iter"
SOLVER_FAILURE = "solver_failure"


def _group_matrix(beam_of_user, n_beams):
    return [np.flatnonzero(np.asarray(beam_of_user) == m) for m in range(n_beams)]


def _scale_to_feed_budget(columns, per_feed_power):
    worst = np.max(np.sum(np.abs(columns) ** 2, axis=1))
    if worst <= 0:
        return columns
    return columns * math.sqrt(per_feed_power / worst)


def initialize_precoders(estimate, beam_of_user, cfg, mode, rng=None):
    """Matched-filter private precoders and a principal-direction common precoder.

    Unit columns are weighted (half the budget to the common stream in RS
    mode) and then scaled by one scalar so the most loaded feed sits exactly
    at ``P / n_feeds``.  With ``rng`` the directions get random phases, which
    is used for restarts.
    """
    mode = Mode(mode)
    h = np.asarray(estimate, dtype=complex)
    n, _ = h.shape
    m_beams = cfg.n_beams
    fallback = np.ones(n, dtype=complex) / math.sqrt(n)
    private = np.empty((n, m_beams), dtype=complex)
    for m, members in enumerate(_group_matrix(beam_of_user, m_beams)):
        direction = h[:, members].sum(axis=1)
        norm = np.linalg.norm(direction)
        private[:, m] = direction / norm if norm > 0 else fallback
    if mode is Mode.RS:
        if np.any(h):
            common = np.linalg.svd(h)[0][:, 0]
        else:
            common = fallback
        weights = np.concatenate([[math.sqrt(0.5)], np.full(m_beams, math.sqrt(0.5 / m_beams))])
    else:
        common = np.zeros(n, dtype=complex)
        weights = np.concatenate([[0.0], np.full(m_beams, math.sqrt(1.0 / m_beams))])
    columns = np.column_stack([common, private]) * weights
    if rng is not None:
        columns = columns * np.exp(2j * np.pi * rng.uniform(size=columns.shape))
    return PrecoderMatrix(_scale_to_feed_budget(columns, cfg.per_feed_power), mode)


# -- subproblem ---------------------------------------------------------------

@dataclass(frozen=True)
class SubproblemSpec:
    """Data of one precoder subproblem: SAF coefficients and constraint budgets."""

    saf: object
    beam_of_user: np.ndarray
    mode: Mode
    sigma2: float
    per_feed_power: float
    n_beams: int

    @property
    def n_feeds(self):
        return self.saf.n_feeds

    @property
    def n_users(self):
        return self.saf.n_users

    def constraint_count(self):
        """Rows of the beam-epigraph, private, common, split-sign and feed families."""
        m, k, n = self.n_beams, self.n_users, self.n_feeds
        if self.mode is Mode.RS:
            return m + k + k + m + n
        return m + k + n

    def slacks(self, prec, split, r_g, r_beams):
        """Slack of every encoded constraint at a candidate point (nonnegative = satisfied).

        Evaluated from the complex-valued WMSE expressions, independently of
        the real-valued cone program handed to the solver.
        """
        split = np.zeros(self.n_beams) if split is None else np.asarray(split, dtype=float)
        r_beams = np.asarray(r_beams, dtype=float)
        xi_c, xi_p = saf_wmse(self.saf, prec, self.beam_of_user, self.sigma2)
        epigraph = split + r_beams - r_g
        private = (1 - xi_p) - r_beams[self.beam_of_user]
        feed = self.per_feed_power - prec.feed_powers()
        if self.mode is Mode.RS:
            common = (1 - xi_c) - split.sum()
            return np.concatenate([epigraph, private, common, split, feed])
        return np.concatenate([epigraph, private, feed])


def build_subproblem(saf, mode, cfg, beam_of_user):
    """Validate the SAF coefficients and bundle them into a :class:`SubproblemSpec`."""
    for name in ("psi", "psi_c"):
        mats = getattr(saf, name)
        if not np.all(np.isfinite(mats)):
            raise NumericalFault(f"non-finite {name}")
        for k, mat in enumerate(mats):
            hermitian = 0.5 * (mat + mat.conj().T)
            scale = max(1.0, float(np.max(np.abs(mat))))
            if np.linalg.eigvalsh(hermitian)[0] < -PSD_TOLERANCE * scale:
                raise NumericalFault(f"{name}[{k}] is not positive semidefinite")
    return SubproblemSpec(saf, np.asarray(beam_of_user), Mode(mode), cfg.noise_variance,
                          cfg.per_feed_power, cfg.n_beams)


def _psd_factor(mat):
    """Real ``2N x 2N`` factor ``A`` with ``||A [Re p; Im p]||^2 = p^H mat p``."""
    hermitian = 0.5 * (mat + mat.conj().T)
    vals, vecs = np.linalg.eigh(hermitian)
    root = np.sqrt(np.clip(vals, 0.0, None))[:, None] * vecs.conj().T
    return np.block([[root.real, -root.imag], [root.imag, root.real]])


def _real_vec(vec):
    return np.concatenate([vec.real, vec.imag])


@dataclass(frozen=True)
class SubproblemSolution:
    precoders: PrecoderMatrix
    split: np.ndarray
    objective: float
    auxiliaries: np.ndarray
    status: str
    max_violation: float = 0.0
    diagnostics: str = ""


class SubproblemSolver:
    """Parametrised second-order cone program, compiled once and re-solved per iteration.

    Variables are the stacked real and imaginary parts of the precoder
    columns.  Quadratic forms ``p^H Psi p`` enter through real factors of
    ``Psi`` so the program stays disciplined-parametrized and cached.
    """

    def __init__(self, n_feeds, beam_of_user, n_beams, mode, solver="CLARABEL", verbose=False):
        self.mode = Mode(mode)
        self.beam_of_user = np.asarray(beam_of_user)
        self.n_feeds = n_feeds
        self.n_beams = n_beams
        self.solver = solver
        self.verbose = verbose
        n2 = 2 * n_feeds
        k_users = len(self.beam_of_user)
        rs = self.mode is Mode.RS

        self.x_private = cp.Variable((n2, n_beams), name="x_private")
        self.x_common = cp.Variable(n2, name="x_common") if rs else None
        self.split = cp.Variable(n_beams, name="split") if rs else None
        self.r_beams = cp.Variable(n_beams, name="r_beams")
        self.r_g = cp.Variable(name="r_g")
        self.budget = cp.Parameter(nonneg=True, name="budget")
        self.a_p = [cp.Parameter((n2, n2), name=f"a_p{k}") for k in range(k_users)]
        self.b_p = [cp.Parameter(n2, name=f"b_p{k}") for k in range(k_users)]
        self.c_p = cp.Parameter(k_users, name="c_p")

        cons = []
        lhs = self.r_beams + (self.split if rs else 0)
        cons.append(lhs >= self.r_g)
        for k in range(k_users):
            m = self.beam_of_user[k]
            quad = cp.sum_squares(self.a_p[k] @ self.x_private)
            cons.append(quad - 2 * self.b_p[k] @ self.x_private[:, m] + self.c_p[k]
                        + LN2 * self.r_beams[m] <= 0)
        if rs:
            self.a_c = [cp.Parameter((n2, n2), name=f"a_c{k}") for k in range(k_users)]
            self.b_c = [cp.Parameter(n2, name=f"b_c{k}") for k in range(k_users)]
            self.c_c = cp.Parameter(k_users, name="c_c")
            total_split = cp.sum(self.split)
            for k in range(k_users):
                quad = (cp.sum_squares(self.a_c[k] @ self.x_private)
                        + cp.sum_squares(self.a_c[k] @ self.x_common))
                cons.append(quad - 2 * self.b_c[k] @ self.x_common + self.c_c[k]
                            + LN2 * total_split <= 0)
            cons.append(self.split >= 0)
        for n in range(n_feeds):
            row = [self.x_private[n, :], self.x_private[n_feeds + n, :]]
            if rs:
                row += [self.x_common[n:n + 1], self.x_common[n_feeds + n:n_feeds + n + 1]]
            cons.append(cp.sum_squares(cp.hstack(row)) <= self.budget)
        self.problem = cp.Problem(cp.Maximize(self.r_g), cons)

    def _load(self, spec):
        saf, sigma2 = spec.saf, spec.sigma2
        self.budget.value = spec.per_feed_power
        # constraint "1 - xi >= r" scaled by ln 2
        self.c_p.value = sigma2 * saf.t + saf.u - 1.0 - LN2 * saf.v
        for k in range(spec.n_users):
            self.a_p[k].value = _psd_factor(saf.psi[k])
            self.b_p[k].value = _real_vec(saf.f[k])
        if self.mode is Mode.RS:
            self.c_c.value = sigma2 * saf.t_c + saf.u_c - 1.0 - LN2 * saf.v_c
            for k in range(spec.n_users):
                self.a_c[k].value = _psd_factor(saf.psi_c[k])
                self.b_c[k].value = _real_vec(saf.f_c[k])

    def _columns(self):
        n = self.n_feeds
        xp = self.x_private.value
        private = xp[:n] + 1j * xp[n:]
        if self.mode is Mode.RS:
            xc = self.x_common.value
            common = xc[:n] + 1j * xc[n:]
        else:
            common = np.zeros(n, dtype=complex)
        return np.column_stack([common, private])

    def solve(self, spec):
        """Solve and polish: project onto the feed budgets and recompute the epigraph values."""
        self._load(spec)
        messages = []
        for solver, options in self.attempts():
            try:
                self.problem.solve(solver=solver, verbose=self.verbose, **options)
            except cp.error.SolverError as exc:
                messages.append(f"{solver}{options or ''}: {exc}")
                continue
            if self.problem.status == cp.OPTIMAL and self.x_private.value is not None:
                return polish(spec, self._columns(), None if self.split is None else self.split.value)
            messages.append(f"{solver}{options or ''}: status {self.problem.status}")
        return SubproblemSolution(None, None, float("nan"), None, SOLVER_FAILURE,
                                  diagnostics="; ".join(messages))

    def attempts(self):
        """Solver calls tried in order until one reports an optimal point."""
        yield self.solver, {}
        if self.solver == "CLARABEL":
            # fresh factorisation with slightly stronger regularisation
            yield "CLARABEL", {"static_regularization_constant": 1e-7}
            yield "CLARABEL", {"max_iter": 500, "tol_feas": 1e-7, "tol_gap_abs": 1e-7, "tol_gap_rel": 1e-7}
        yield "CVXOPT", {}


def polish(spec, columns, split):
    """Turn a raw solver point into an exactly feasible one with consistent epigraph values."""
    columns = np.array(columns, dtype=complex)
    row_power = np.sum(np.abs(columns) ** 2, axis=1)
    over = row_power > spec.per_feed_power
    columns[over] *= np.sqrt(spec.per_feed_power / row_power[over])[:, None]
    prec = PrecoderMatrix(columns, spec.mode)
    xi_c, xi_p = saf_wmse(spec.saf, prec, spec.beam_of_user, spec.sigma2)
    groups = _group_matrix(spec.beam_of_user, spec.n_beams)
    r_beams = np.array([np.min(1 - xi_p[g]) for g in groups])
    if spec.mode is Mode.RS:
        split = np.clip(np.asarray(split, dtype=float), 0.0, None)
        floor = max(float(np.min(1 - xi_c)), 0.0)
        if split.sum() > floor:
            split = split * (floor / split.sum())
    else:
        split = np.zeros(spec.n_beams)
    r_g = float(np.min(split + r_beams))
    slack = spec.slacks(prec, split, r_g, r_beams)
    return SubproblemSolution(prec, split, r_g, r_beams, CONVERGED,
                              max_violation=float(max(0.0, -slack.min())))


def solve_subproblem(spec, solver=None):
    """One-shot solve of a subproblem; pass a cached ``SubproblemSolver`` to reuse compilation."""
    if solver is None:
        solver = SubproblemSolver(spec.n_feeds, spec.beam_of_user, spec.n_beams, spec.mode)
    return solver.solve(spec)


# -- alternating optimisation -------------------------------------------------

@dataclass
class TraceRow:
    iteration: int
    objective: float
    max_violation: float
    wall_time: float


@dataclass
class SolveResult:
    precoders: PrecoderMatrix
    split: np.ndarray
    objective: float
    auxiliaries: np.ndarray
    iterations: int
    objective_trace: list
    status: str
    mode: Mode
    trace: list = field(default_factory=list, repr=False)
    diagnostics: str = ""

    def trace_to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "objective", "max_violation", "wall_time"])
            for row in self.trace:
                writer.writerow([row.iteration, repr(row.objective), repr(row.max_violation),
                                 f"{row.wall_time:.6f}"])


def ao_solve(ensemble, beam_of_user, cfg, mode, initial=None, tol=CONVERGENCE_TOL,
             max_iter=MAX_ITERATIONS, solver=None, verbose=False):
    """Alternate MMSE equalizer/weight updates with convex precoder updates until ``r_g`` settles.

    Stops when consecutive objectives differ by less than ``tol`` or after
    ``max_iter`` iterations.  A subproblem failure ends the run with status
    ``solver_failure`` and the last good iterate.
    """
    mode = Mode(mode)
    prec = initial if initial is not None else initialize_precoders(
        ensemble.estimate, beam_of_user, cfg, mode)
    if prec.mode is not mode:
        prec = PrecoderMatrix(prec.columns if mode is Mode.RS else
                              np.column_stack([np.zeros(prec.n_feeds), prec.private]), mode)
    if solver is None:
        solver = SubproblemSolver(cfg.n_feeds, beam_of_user, cfg.n_beams, mode)
    split = np.zeros(cfg.n_beams)
    aux = None
    objective = float("nan")
    trace, rows = [], []
    status = MAX_ITER
    diagnostics = ""
    start = time.perf_counter()
    for it in range(1, max_iter + 1):
        _, saf = saf_coefficients(ensemble, prec, beam_of_user, cfg.noise_variance)
        try:
            spec = build_subproblem(saf, mode, cfg, beam_of_user)
        except NumericalFault as exc:
            status, diagnostics = SOLVER_FAILURE, str(exc)
            break
        sol = solver.solve(spec)
        if sol.status == SOLVER_FAILURE:
            status, diagnostics = SOLVER_FAILURE, sol.diagnostics
            break
        prec, split, aux = sol.precoders, sol.split, sol.auxiliaries
        previous, objective = objective, sol.objective
        trace.append(objective)
        rows.append(TraceRow(it, objective, sol.max_violation, time.perf_counter() - start))
        if verbose:
            logger.info("iter %d  r_g=%.6f  viol=%.2e", it, objective, sol.max_violation)
        if it > 1 and abs(objective - previous) < tol:
            status = CONVERGED
            break
    return SolveResult(prec, split, objective, aux, len(trace), trace, status, mode, rows, diagnostics)


@dataclass(frozen=True)
class MmfEvaluation:
    mmf_average_rate: float
    per_beam: np.ndarray
    achieved_common_rate_floor: float
    split: np.ndarray


def evaluate_solution(result, eval_ensemble, beam_of_user, cfg):
    """Max-min average rate of a solution on (possibly fresh) realizations.

    If the trained split is not decodable on ``eval_ensemble`` it is scaled
    down to the achieved common-rate floor.
    """
    if result.status == SOLVER_FAILURE:
        raise ValueError("cannot evaluate a failed solve")
    prec = result.precoders
    report = average_rates(eval_ensemble, prec, beam_of_user, cfg.noise_variance)
    floor = report.common_rate
    if result.mode is Mode.RS:
        split = np.clip(np.asarray(result.split, dtype=float), 0.0, None)
        if split.sum() > floor and split.sum() > 0:
            split = split * (floor / split.sum())
    else:
        split = np.zeros(cfg.n_beams)
    final = beam_rates(report.common_rates, report.private_rates, split, beam_of_user,
                       result.mode, n_beams=cfg.n_beams)
    return MmfEvaluation(final.mmf_value, final.beam_rates, floor, split)


def training_violation(result, ensemble, beam_of_user, cfg):
    """Largest violation of decodability, split sign and feed budgets on the training set."""
    report = average_rates(ensemble, result.precoders, beam_of_user, cfg.noise_variance)
    power = check_power(result.precoders, cfg)
    viol = [0.0, float(max(0.0, -power.slack.min()))]
    if result.mode is Mode.RS:
        viol.append(float(result.split.sum() - report.common_rate))
        viol.append(float(-result.split.min()))
    return max(viol)


__all__ = [
    "CONVERGED", "MAX_ITER", "SOLVER_FAILURE", "POWER_TOLERANCE", "SubproblemSpec",
    "SubproblemSolver", "SubproblemSolution", "SolveResult", "MmfEvaluation", "initialize_precoders",
    "build_subproblem", "solve_subproblem", "ao_solve", "evaluate_solution", "training_violation",
]
