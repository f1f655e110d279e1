"""Solution procedures: one-pass block coordinate descent (centralized),
the Jacobi-proximal multi-convex ADMM loop with Gauss-Seidel and
early-stopping variants, and the two heuristic baselines.

All CPU iterates inside the ADMM loop live at GHz scale (see subproblems);
outputs are converted back to Hz.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .costs import Allocation, CostBreakdown, total_cost
from .errors import InfeasibilityError, MsFedlError
from .learning import fedl_constants, optimal_eta
from .scenario import Scenario
from .solver import solve
from .subproblems import (AdmmParams, F_SCALE, _bandwidth_terms, build_sub2c,
                          build_sub2d, build_sub3c, build_sub3d)


@dataclass
class AdmmState:
    """Iterates of the decentralized loop (CPU entries in GHz)."""

    f: np.ndarray                 # (S, N) per-service CPU
    w_per_service: np.ndarray     # (S, N) pre-consensus bandwidth
    z: np.ndarray                 # (N,) consensus bandwidth
    y: np.ndarray                 # (N,) shared-CPU dual
    bandwidth_dual: np.ndarray    # (S, N)
    r1: np.ndarray                # (N,)
    r2: np.ndarray                # (S, N)
    iter: int = 0


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    objective: float
    r1_norm: float
    r2_norm_max: float
    f_delta_frobenius: float
    z_delta: float


@dataclass
class AdmmTrace:
    records: list = field(default_factory=list)

    def to_csv(self, mode: str) -> str:
        buf = io.StringIO()
        buf.write("iter,objective,r1_norm,r2_norm_max,f_delta_frobenius,z_delta,mode\n")
        for r in self.records:
            buf.write(f"{r.iteration},{float(r.objective)!r},{r.r1_norm!r},"
                      f"{r.r2_norm_max!r},{r.f_delta_frobenius!r},"
                      f"{r.z_delta!r},{mode}\n")
        return buf.getvalue()


@dataclass
class SolveOutcome:
    allocation: Allocation
    cost: CostBreakdown
    trace: AdmmTrace
    iterations: int
    mode: str
    status: str = "converged"

    def to_document(self, scenario: Scenario) -> str:
        """Versioned plain-text result document."""
        lines = [
            "msfedl-outcome v1",
            f"seed: {scenario.seed}",
            f"mode: {self.mode}",
            f"status: {self.status}",
            f"iterations: {self.iterations}",
            f"total_cost: {float(self.cost.total)!r}",
            "eta: " + " ".join(repr(float(v)) for v in self.allocation.eta),
            "bandwidth: " + " ".join(repr(float(v)) for v in self.allocation.bandwidth),
        ]
        for s in range(self.allocation.cpu.shape[0]):
            lines.append(f"cpu[{s}]: " + " ".join(
                repr(float(v)) for v in self.allocation.cpu[s]))
        return "\n".join(lines) + "\n"


def optimal_etas(scenario: Scenario) -> np.ndarray:
    """Closed-form optimal hyper-learning rate for every service."""
    return np.array([
        optimal_eta(fedl_constants(svc.local_accuracy, scenario.learning,
                                   svc.round_scale))
        for svc in scenario.services])


def _allocation_from(scenario, cpu_hz, w, eta):
    """Build a feasible Allocation, recomputing epigraph times from (f, w)."""
    from .costs import service_round_time
    t_cmp = np.zeros(scenario.n_services)
    t_com = np.zeros(scenario.n_services)
    alloc = Allocation(cpu=cpu_hz, bandwidth=w, eta=eta, t_cmp=t_cmp, t_com=t_com)
    t_cmp, t_com = [], []
    for svc in scenario.services:
        tc, tx, _ = service_round_time(svc, scenario, alloc, check=False)
        t_cmp.append(tc)
        t_com.append(tx)
    return Allocation(cpu=cpu_hz, bandwidth=w, eta=eta,
                      t_cmp=np.array(t_cmp), t_com=np.array(t_com))


def _project_bandwidth(scenario, w):
    """Clamp to the minimum fraction and renormalize onto the simplex,
    re-clamping until no renormalized entry falls below the floor."""
    w_min = scenario.bandwidth_min
    w = np.asarray(w, dtype=float).copy()
    clamped = np.zeros(w.size, dtype=bool)
    for _ in range(w.size + 1):
        low = w < w_min
        clamped |= low
        w[clamped] = w_min
        free = ~clamped
        if not free.any():
            return np.full_like(w, 1.0 / w.size)
        w[free] *= (1.0 - w_min * clamped.sum()) / w[free].sum()
        if not (w[free] < w_min).any():
            break
    return w


def _project_cpu(scenario, f_ghz):
    """Rescale each UE column onto the exact CPU budget."""
    f = np.array(f_ghz, dtype=float)
    totals = scenario.cpu_totals() / F_SCALE
    col = f.sum(axis=0)
    f *= (totals / col)[None, :]
    return f


def solve_centralized(scenario: Scenario, passes: int = 1) -> SolveOutcome:
    """One-pass BCD: closed-form eta*, then the CPU and bandwidth programs.

    eta* does not depend on (f, w), so a single pass reaches the optimum;
    extra passes (robustness experiments) must be a fixed point.
    """
    eta = optimal_etas(scenario)
    cpu = w = None
    for _ in range(max(1, passes)):
        prog2, x02 = build_sub2c(scenario, eta)
        rep2 = solve(prog2, x02)
        if rep2.status == "infeasible":
            raise InfeasibilityError("CPU allocation subproblem infeasible")
        s, n = scenario.n_services, scenario.n_ues
        cpu = rep2.x_star[:s * n].reshape(s, n)
        prog3, x03 = build_sub3c(scenario, eta)
        rep3 = solve(prog3, x03)
        if rep3.status == "infeasible":
            raise InfeasibilityError("bandwidth allocation subproblem infeasible")
        w = rep3.x_star[:n]
    cpu = _project_cpu(scenario, cpu)
    w = _project_bandwidth(scenario, w)
    alloc = _allocation_from(scenario, cpu * F_SCALE, w, eta)
    cost = total_cost(scenario, alloc, check=False)
    return SolveOutcome(allocation=alloc, cost=cost, trace=AdmmTrace(),
                        iterations=1, mode="centralized")


def consensus_dual_step(state: AdmmState, scenario: Scenario,
                        params: AdmmParams) -> AdmmState:
    """Consensus average, primal residuals, and relaxed dual ascent.

    The consensus update uses the pre-update duals (the printed index in the
    source formulation is circular); plain averaging recovers it once the
    duals sum to zero, which holds from the second iteration on.
    """
    s = scenario.n_services
    z_new = (state.w_per_service + state.bandwidth_dual / params.rho2).mean(axis=0)
    r1 = state.f.sum(axis=0) - scenario.cpu_totals() / F_SCALE
    r2 = state.w_per_service - z_new[None, :]
    y_new = state.y + params.relax_alpha * params.rho1 * r1
    dual_new = state.bandwidth_dual + params.relax_alpha * params.rho2 * r2
    return AdmmState(f=state.f, w_per_service=state.w_per_service, z=z_new,
                     y=y_new, bandwidth_dual=dual_new, r1=r1, r2=r2,
                     iter=state.iter + 1)


# warm-start handling for the inner barrier solves: lift solved iterates a
# little off their active constraints (slack ~_NUDGE) and restart the barrier
# schedule at _HOT_T0 instead of the cold automatic value.  The two are
# coupled: the hot first centering needs slacks roughly 1/(t0 * multiplier)
# to be near-central, so a larger _HOT_T0 wants a smaller _NUDGE.
_HOT_T0 = 100.0
_NUDGE = 3e-5


def _interior_nudge(x, lb):
    """Lift a solved iterate slightly off its active constraints: raise
    bounded entries a hair above the bound and inflate the trailing
    epigraph variable so fractional rows regain slack."""
    out = np.array(x, dtype=float)
    finite = np.isfinite(lb)
    out[finite] = np.maximum(out[finite], lb[finite] + _NUDGE)
    out[-1] = out[-1] * (1.0 + _NUDGE) + _NUDGE
    return out


def solve_decentralized(scenario: Scenario, params: AdmmParams | None = None,
                        mode: str = "jacobi", workers: int = 1) -> SolveOutcome:
    """Iterative JP-miADMM solve.

    mode: 'jacobi' (parallel primal updates, proximal damping),
    'jacobi-early-stop' (stop on primal residuals instead of iterate deltas),
    'gauss-seidel' (sequential primal updates with freshest peers, no
    proximal term).
    """
    if mode not in ("jacobi", "jacobi-early-stop", "gauss-seidel"):
        raise MsFedlError(f"unknown decentralized mode: {mode}")
    params = params or AdmmParams()
    s, n = scenario.n_services, scenario.n_ues
    eta = optimal_etas(scenario)
    totals = scenario.cpu_totals() / F_SCALE

    f = np.tile(totals / s, (s, 1))
    w_sv = np.full((s, n), 1.0 / n)
    state = AdmmState(f=f, w_per_service=w_sv, z=np.full(n, 1.0 / n),
                      y=np.zeros(n), bandwidth_dual=np.zeros((s, n)),
                      r1=np.zeros(n), r2=np.zeros((s, n)))
    prox = 0.0 if mode == "gauss-seidel" else None
    trace = AdmmTrace()
    status = "max-iter"
    warm = {}

    def primal_one(args):
        svc_idx, f_snapshot, state_ref = args
        f_others = f_snapshot.sum(axis=0) - f_snapshot[svc_idx]
        prog2, x02 = build_sub2d(scenario, svc_idx, eta[svc_idx], f_others,
                                 f_snapshot[svc_idx], state_ref.y, params,
                                 proximal_weight=prox)
        prog3, x03 = build_sub3d(scenario, svc_idx, eta[svc_idx], state_ref.z,
                                 state_ref.bandwidth_dual[svc_idx], params)
        key2, key3 = ("f", svc_idx), ("w", svc_idx)
        # warm iterates sit near the new optimum: skip the low-t barrier
        # phases that would only re-walk the central path
        hot2 = _HOT_T0 if key2 in warm else None
        hot3 = _HOT_T0 if key3 in warm else None
        rep2 = solve(prog2, warm.get(key2, x02), hot_t0=hot2)
        rep3 = solve(prog3, warm.get(key3, x03), hot_t0=hot3)
        # nudge the stored warm starts off active constraints so the next
        # solve starts strictly interior (solutions pin bounds exactly)
        warm[key2] = _interior_nudge(rep2.x_star, prog2.lb)
        warm[key3] = _interior_nudge(rep3.x_star, prog3.lb)
        return svc_idx, rep2.x_star[:n], rep3.x_star[:n]

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for _ in range(params.max_outer):
            f_prev, z_prev = state.f.copy(), state.z.copy()
            r1_prev, r2_prev = state.r1.copy(), state.r2.copy()
            if mode == "gauss-seidel":
                f_new, w_new = state.f.copy(), state.w_per_service.copy()
                for svc_idx in range(s):
                    _, f_s, w_s = primal_one((svc_idx, f_new, state))
                    f_new[svc_idx], w_new[svc_idx] = f_s, w_s
            else:
                jobs = [(svc_idx, state.f, state) for svc_idx in range(s)]
                results = list(pool.map(primal_one, jobs)) if pool \
                    else [primal_one(j) for j in jobs]
                f_new = np.empty_like(state.f)
                w_new = np.empty_like(state.w_per_service)
                for svc_idx, f_s, w_s in sorted(results):  # fixed reduction order
                    f_new[svc_idx], w_new[svc_idx] = f_s, w_s
            state = replace(state, f=f_new, w_per_service=w_new)
            state = consensus_dual_step(state, scenario, params)

            f_delta = float(np.linalg.norm(state.f - f_prev))
            z_delta = float(np.linalg.norm(state.z - z_prev))
            r1_norm = float(np.linalg.norm(state.r1))
            r2_max = float(np.max(np.linalg.norm(state.r2, axis=1)))
            obj = total_cost(
                scenario,
                _allocation_from(scenario,
                                 _project_cpu(scenario, state.f) * F_SCALE,
                                 _project_bandwidth(scenario, state.z), eta),
                check=False).total
            trace.records.append(TraceRecord(
                iteration=state.iter, objective=obj, r1_norm=r1_norm,
                r2_norm_max=r2_max, f_delta_frobenius=f_delta, z_delta=z_delta))
            if mode == "jacobi-early-stop":
                # stop once the primal residuals settle (their change falls
                # below the thresholds), rather than waiting for the primal
                # iterates themselves to stop moving
                r1_delta = float(np.linalg.norm(state.r1 - r1_prev))
                r2_delta = float(np.max(np.linalg.norm(state.r2 - r2_prev,
                                                       axis=1)))
                if r1_delta <= params.eps1 and r2_delta <= params.eps2:
                    status = "converged"
                    break
            else:
                if f_delta <= params.eps1 and z_delta <= params.eps2:
                    status = "converged"
                    break
    finally:
        if pool:
            pool.shutdown()

    cpu = _project_cpu(scenario, state.f)
    w = _project_bandwidth(scenario, state.z)
    alloc = _allocation_from(scenario, cpu * F_SCALE, w, eta)
    cost = total_cost(scenario, alloc, check=False)
    mode_name = {"jacobi": "jp-admm", "jacobi-early-stop": "jp-admm-es",
                 "gauss-seidel": "gs-miadmm"}[mode]
    return SolveOutcome(allocation=alloc, cost=cost, trace=trace,
                        iterations=state.iter, mode=mode_name, status=status)


def heuristic_equal(scenario: Scenario) -> SolveOutcome:
    """Equal CPU split across services, equal bandwidth across UEs."""
    s, n = scenario.n_services, scenario.n_ues
    totals = scenario.cpu_totals()
    if np.any(totals / s < max(svc.cpu_min for svc in scenario.services)) \
            or 1.0 / n < scenario.bandwidth_min:
        raise InfeasibilityError("equal split violates minimum bounds")
    cpu = np.tile(totals / s, (s, 1))
    w = np.full(n, 1.0 / n)
    eta = optimal_etas(scenario)
    alloc = _allocation_from(scenario, cpu, w, eta)
    return SolveOutcome(allocation=alloc, cost=total_cost(scenario, alloc),
                        trace=AdmmTrace(), iterations=1, mode="heuristic-1")


def heuristic_proportional(scenario: Scenario,
                           bandwidth_rule: str = "capacity") -> SolveOutcome:
    """CPU proportional to per-service data size; bandwidth by link capacity.

    bandwidth_rule 'capacity' allocates proportional to spectral efficiency;
    'equal-time' applies the inverse rule (equalize upload times).
    """
    s, n = scenario.n_services, scenario.n_ues
    data = scenario.data_matrix()
    cpu = scenario.cpu_totals()[None, :] * data / data.sum(axis=0, keepdims=True)
    cpu = _clamp_columns(cpu, np.array([svc.cpu_min for svc in scenario.services]),
                         scenario.cpu_totals())
    log_se, _ = _bandwidth_terms(scenario)
    if bandwidth_rule == "capacity":
        w = log_se / log_se.sum()
    elif bandwidth_rule == "equal-time":
        w = (1.0 / log_se) / (1.0 / log_se).sum()
    else:
        raise MsFedlError(f"unknown bandwidth rule: {bandwidth_rule}")
    w = _project_bandwidth(scenario, w)
    eta = optimal_etas(scenario)
    alloc = _allocation_from(scenario, cpu, w, eta)
    return SolveOutcome(allocation=alloc, cost=total_cost(scenario, alloc),
                        trace=AdmmTrace(), iterations=1, mode="heuristic-2")


def _clamp_columns(cpu, cpu_min, totals):
    """Clamp each column to per-service floors, renormalizing the rest."""
    s, n = cpu.shape
    out = cpu.copy()
    for col in range(n):
        clamped = np.zeros(s, dtype=bool)
        for _ in range(n + s):
            low = out[:, col] < cpu_min
            if not (low & ~clamped).any():
                break
            clamped |= low
            out[clamped, col] = cpu_min[clamped]
            budget = totals[col] - cpu_min[clamped].sum()
            rest = ~clamped
            if budget < 0 or (rest.any() and out[rest, col].sum() <= 0):
                raise InfeasibilityError(
                    f"proportional clamping failed at UE {col}")
            if rest.any():
                out[rest, col] *= budget / out[rest, col].sum()
        else:
            raise InfeasibilityError(
                f"proportional clamping did not settle at UE {col}")
    return out
