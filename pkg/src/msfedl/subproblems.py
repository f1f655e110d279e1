"""Builders for the four resource-allocation convex programs.

Centralized: CPU allocation over all services (sub2c) and bandwidth
allocation over all UEs (sub3c).  Decentralized: the per-service augmented
versions with dual, penalty, and proximal terms (sub2d, sub3d).

CPU variables are expressed in GHz inside the programs: the published
penalty/threshold constants (rho1 = 1000, nu = 1500, eps1 = 1e-4) are only
commensurate with the objective at that scale.  Builders convert from and
back to Hz at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costs import downlink_time
from .errors import InvalidParameterError
from .learning import fedl_constants, num_global_rounds, num_local_rounds
from .scenario import GHZ, Scenario
from .solver import ConvexProgram, ReciprocalEpigraphBlock, ReciprocalQuadObjective

F_SCALE = GHZ  # Hz per internal CPU unit


@dataclass(frozen=True)
class AdmmParams:
    """Penalty, proximal, and stopping parameters of the decentralized loop."""

    rho1: float = 1000.0            # shared-CPU penalty
    rho2: float = 10.0              # bandwidth-consensus penalty
    proximal_weight: float = 1500.0  # Jacobi proximal coefficient
    relax_alpha: float = 1.0        # dual step relaxation
    eps1: float = 1e-4              # CPU-delta stop threshold (GHz scale)
    eps2: float = 1e-5              # consensus-delta stop threshold
    max_outer: int = 500

    def __post_init__(self):
        if min(self.rho1, self.rho2, self.proximal_weight) <= 0:
            raise InvalidParameterError("rho1, rho2, proximal_weight must be > 0")
        if not 0 < self.relax_alpha < 2:
            raise InvalidParameterError("relax_alpha must lie in (0, 2)")
        if self.eps1 <= 0 or self.eps2 <= 0:
            raise InvalidParameterError("eps1, eps2 must be > 0")

    def sufficiency_holds(self, n_services: int) -> bool:
        """Sufficient (not necessary) global-convergence condition of the
        Jacobi-proximal scheme; false for the published defaults."""
        return self.proximal_weight > self.rho1 * (
            n_services / (2.0 - self.relax_alpha) - 1.0)


def service_weights(scenario: Scenario, eta_star) -> tuple:
    """(K_l[s], K_g[s]) vectors at the given hyper-learning rates."""
    k_l, k_g = [], []
    for svc in scenario.services:
        consts = fedl_constants(svc.local_accuracy, scenario.learning,
                                svc.round_scale)
        k_l.append(num_local_rounds(svc.local_accuracy, scenario.learning))
        k_g.append(num_global_rounds(float(eta_star[svc.id]), consts))
    return np.array(k_l, dtype=float), np.array(k_g)


def _compute_workloads(scenario):
    """(S, N) matrix of c_s * D_{s,n} in cycles."""
    d = scenario.data_matrix()
    c = np.array([svc.cycles_per_bit for svc in scenario.services])
    return c[:, None] * d


def build_sub2c(scenario: Scenario, eta_star) -> tuple:
    """Centralized CPU program.  Variables [f (S*N, GHz), T_cmp (S)].

    Returns (program, x0) with x0 the equal-split warm start.
    """
    s, n = scenario.n_services, scenario.n_ues
    k_l, k_g = service_weights(scenario, eta_star)
    work = _compute_workloads(scenario)                       # cycles
    beta = np.array([ue.capacitance for ue in scenario.ues])
    kappa = np.array([svc.tradeoff_weight for svc in scenario.services])
    mem = np.array([[ue.mem_overhead[i] for ue in scenario.ues] for i in range(s)])

    dim = s * n + s
    # energy term: sum_sn Klg_s * (beta_n/2) work_sn * (F_SCALE f)^2
    quad = np.zeros(dim)
    quad[:s * n] = ((k_l * k_g)[:, None] * beta[None, :] * work
                    * F_SCALE ** 2).ravel()
    lin = np.zeros(dim)
    lin[s * n:] = k_l * k_g * kappa
    objective = ReciprocalQuadObjective(np.zeros(dim), quad, lin)

    # epigraph rows: (work/F_SCALE)/f + mem - T_s <= 0
    a = (work / F_SCALE).ravel()
    i_idx = np.arange(s * n)
    j_idx = s * n + np.repeat(np.arange(s), n)
    block = ReciprocalEpigraphBlock(a, i_idx, j_idx, mem.ravel(), dim)

    # shared CPU: sum_s f_sn = f_n^tot
    a_eq = np.zeros((n, dim))
    for ue in range(n):
        a_eq[ue, ue + n * np.arange(s)] = 1.0
    b_eq = scenario.cpu_totals() / F_SCALE

    lb = np.full(dim, -np.inf)
    lb[:s * n] = np.repeat(
        np.array([svc.cpu_min for svc in scenario.services]) / F_SCALE, n)

    program = ConvexProgram(dim=dim, objective=objective, ineq=[block],
                            eq=(a_eq, b_eq), lb=lb,
                            meta={"kind": "sub2c", "S": s, "N": n})
    f0 = np.tile(scenario.cpu_totals() / F_SCALE / s, s)
    t0 = np.array([np.max(a[i * n:(i + 1) * n] / f0[i * n:(i + 1) * n]
                          + mem[i]) for i in range(s)]) * 1.05 + 1e-6
    return program, np.concatenate([f0, t0])


def _bandwidth_terms(scenario):
    """Per-UE spectral efficiency and per-(s, n) upload-time coefficients."""
    net = scenario.network
    log_se = np.array([math.log2(1 + ue.channel_gain * ue.tx_power / net.noise_power)
                       for ue in scenario.ues])
    v = np.array([svc.update_size for svc in scenario.services])
    # upload time of (s, n) is u[s, n] / w_n
    u = v[:, None] / (net.uplink_bandwidth * log_se[None, :])
    return log_se, u


def build_sub3c(scenario: Scenario, eta_star) -> tuple:
    """Centralized bandwidth program.  Variables [w (N), T_com (S)]."""
    s, n = scenario.n_services, scenario.n_ues
    _, k_g = service_weights(scenario, eta_star)
    kappa = np.array([svc.tradeoff_weight for svc in scenario.services])
    p = np.array([ue.tx_power for ue in scenario.ues])
    _, u = _bandwidth_terms(scenario)
    dl = np.array([downlink_time(svc, scenario) for svc in scenario.services])
    ex = np.array([[ue.comm_overhead[i] for ue in scenario.ues] for i in range(s)])

    dim = n + s
    recip = np.zeros(dim)
    recip[:n] = (k_g[:, None] * p[None, :] * u).sum(axis=0)
    lin = np.zeros(dim)
    lin[n:] = k_g * kappa
    objective = ReciprocalQuadObjective(recip, np.zeros(dim), lin)

    # epigraph rows: u_sn / w_n + dl_s + ex_sn - T_s <= 0
    i_idx = np.tile(np.arange(n), s)
    j_idx = n + np.repeat(np.arange(s), n)
    offset = (dl[:, None] + ex).ravel()
    block = ReciprocalEpigraphBlock(u.ravel(), i_idx, j_idx, offset, dim)

    a_eq = np.zeros((1, dim))
    a_eq[0, :n] = 1.0
    b_eq = np.array([1.0])
    lb = np.full(dim, -np.inf)
    lb[:n] = scenario.bandwidth_min

    program = ConvexProgram(dim=dim, objective=objective, ineq=[block],
                            eq=(a_eq, b_eq), lb=lb,
                            meta={"kind": "sub3c", "S": s, "N": n})
    w0 = np.full(n, 1.0 / n)
    t0 = (u / w0[None, :] + dl[:, None] + ex).max(axis=1) * 1.05 + 1e-6
    return program, np.concatenate([w0, t0])


def build_sub2d(scenario: Scenario, s: int, eta_star_s: float,
                f_others_sum, f_prev_s, y, params: AdmmParams,
                proximal_weight=None) -> tuple:
    """Per-service decentralized CPU program.  Variables [f_s (N, GHz), T_cmp_s].

    f_others_sum, f_prev_s, y are in GHz scale.  proximal_weight overrides
    params.proximal_weight (the pure multi-convex mode passes 0).
    """
    n = scenario.n_ues
    f_others_sum = np.asarray(f_others_sum, dtype=float)
    f_prev_s = np.asarray(f_prev_s, dtype=float)
    y = np.asarray(y, dtype=float)
    if f_others_sum.shape != (n,) or f_prev_s.shape != (n,) or y.shape != (n,):
        raise InvalidParameterError("sub2d input vectors must have one entry per UE")
    svc = scenario.services[s]
    consts = fedl_constants(svc.local_accuracy, scenario.learning, svc.round_scale)
    k_g = num_global_rounds(float(eta_star_s), consts)
    k_l = num_local_rounds(svc.local_accuracy, scenario.learning)
    beta = np.array([ue.capacitance for ue in scenario.ues])
    work = svc.cycles_per_bit * np.array(svc.data_sizes)
    mem = np.array([ue.mem_overhead[s] for ue in scenario.ues])
    nu_prox = params.proximal_weight if proximal_weight is None else proximal_weight
    delta = f_others_sum - scenario.cpu_totals() / F_SCALE   # residual offset

    dim = n + 1
    quad = np.zeros(dim)
    quad[:n] = k_l * k_g * beta * work * F_SCALE ** 2 + params.rho1 + nu_prox
    lin = np.zeros(dim)
    lin[:n] = y + params.rho1 * delta - nu_prox * f_prev_s
    lin[n] = k_l * k_g * svc.tradeoff_weight
    const = 0.5 * params.rho1 * float(delta @ delta) \
        + 0.5 * nu_prox * float(f_prev_s @ f_prev_s)
    objective = ReciprocalQuadObjective(np.zeros(dim), quad, lin, const)

    a = work / F_SCALE
    block = ReciprocalEpigraphBlock(a, np.arange(n), np.full(n, n), mem, dim)
    lb = np.full(dim, -np.inf)
    lb[:n] = svc.cpu_min / F_SCALE

    program = ConvexProgram(dim=dim, objective=objective, ineq=[block], lb=lb,
                            meta={"kind": "sub2d", "service": s, "N": n})
    f0 = np.maximum(f_prev_s, svc.cpu_min / F_SCALE * (1 + 1e-7))
    t0 = float(np.max(a / f0 + mem)) * 1.05 + 1e-6
    return program, np.concatenate([f0, [t0]])


def build_sub3d(scenario: Scenario, s: int, eta_star_s: float,
                z, bandwidth_dual_s, params: AdmmParams) -> tuple:
    """Per-service decentralized bandwidth program.  Variables [w_s (N), T_com_s]."""
    n = scenario.n_ues
    z = np.asarray(z, dtype=float)
    dual = np.asarray(bandwidth_dual_s, dtype=float)
    if z.shape != (n,) or dual.shape != (n,):
        raise InvalidParameterError("sub3d input vectors must have one entry per UE")
    svc = scenario.services[s]
    consts = fedl_constants(svc.local_accuracy, scenario.learning, svc.round_scale)
    k_g = num_global_rounds(float(eta_star_s), consts)
    p = np.array([ue.tx_power for ue in scenario.ues])
    _, u_all = _bandwidth_terms(scenario)
    u = u_all[s]
    dl = downlink_time(svc, scenario)
    ex = np.array([ue.comm_overhead[s] for ue in scenario.ues])

    dim = n + 1
    recip = np.zeros(dim)
    recip[:n] = k_g * p * u
    quad = np.zeros(dim)
    quad[:n] = params.rho2
    lin = np.zeros(dim)
    lin[:n] = dual - params.rho2 * z
    lin[n] = k_g * svc.tradeoff_weight
    const = -float(dual @ z) + 0.5 * params.rho2 * float(z @ z)
    objective = ReciprocalQuadObjective(recip, quad, lin, const)

    block = ReciprocalEpigraphBlock(u, np.arange(n), np.full(n, n), dl + ex, dim)
    a_eq = np.zeros((1, dim))
    a_eq[0, :n] = 1.0
    lb = np.full(dim, -np.inf)
    lb[:n] = scenario.bandwidth_min

    program = ConvexProgram(dim=dim, objective=objective, ineq=[block],
                            eq=(a_eq, np.array([1.0])), lb=lb,
                            meta={"kind": "sub3d", "service": s, "N": n})
    w0 = np.full(n, 1.0 / n)
    t0 = float(np.max(u / w0 + dl + ex)) * 1.05 + 1e-6
    return program, np.concatenate([w0, [t0]])
