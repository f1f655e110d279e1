"""Time/energy cost model for a given allocation.

Evaluates uplink rates, per-iteration compute cost, per-round time and
energy, and the weighted total cost over all services.  Pure functions over
immutable inputs; epigraph times are always recomputed from (f, w), never
trusted from the allocation object.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfeasibilityError, InvalidParameterError
from .learning import fedl_constants, num_global_rounds, num_local_rounds
from .scenario import NetworkProfile, Scenario, ServiceProfile, UEProfile


@dataclass(frozen=True)
class Allocation:
    """A joint decision: CPU matrix (S, N) in Hz, bandwidth fractions (N,),
    hyper-learning rates (S,), and epigraph times (S,) in seconds."""

    cpu: np.ndarray
    bandwidth: np.ndarray
    eta: np.ndarray
    t_cmp: np.ndarray
    t_com: np.ndarray

    def __post_init__(self):
        for name in ("cpu", "bandwidth", "eta", "t_cmp", "t_com"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.cpu.ndim != 2:
            raise InvalidParameterError("cpu must be an (S, N) matrix")
        s, n = self.cpu.shape
        if self.bandwidth.shape != (n,) or self.eta.shape != (s,):
            raise InvalidParameterError("allocation field shapes disagree")
        if self.t_cmp.shape != (s,) or self.t_com.shape != (s,):
            raise InvalidParameterError("allocation field shapes disagree")

    def check_feasible(self, scenario: Scenario, rel_tol: float = 1e-9) -> None:
        """Raise InfeasibilityError if the allocation violates the shared
        resource constraints or minimum bounds (rel_tol is relative)."""
        s, n = self.cpu.shape
        if s != scenario.n_services or n != scenario.n_ues:
            raise InvalidParameterError("allocation shape does not match scenario")
        cpu_tot = scenario.cpu_totals()
        cpu_min = np.array([svc.cpu_min for svc in scenario.services])
        if np.any(self.cpu < cpu_min[:, None] * (1 - rel_tol)):
            raise InfeasibilityError("cpu below per-service minimum")
        col = self.cpu.sum(axis=0)
        if np.any(np.abs(col - cpu_tot) > rel_tol * cpu_tot + 1e-12):
            worst = int(np.argmax(np.abs(col - cpu_tot) / cpu_tot))
            raise InfeasibilityError(
                f"shared-CPU budget violated at UE {worst}: "
                f"sum {col[worst]:.6e} vs total {cpu_tot[worst]:.6e}")
        if np.any(self.bandwidth < scenario.bandwidth_min * (1 - rel_tol)):
            raise InfeasibilityError("bandwidth below minimum fraction")
        if abs(self.bandwidth.sum() - 1.0) > 1e-9:
            raise InfeasibilityError(
                f"bandwidth fractions sum to {self.bandwidth.sum():.12f}, not 1")
        if np.any(self.eta <= 0):
            raise InfeasibilityError("eta entries must be > 0")


@dataclass(frozen=True)
class ServiceCost:
    service_id: int
    rounds: float       # K_g
    local_iters: int    # K_l
    t_cmp: float
    t_com: float
    round_time: float   # T_gl
    round_energy: float  # E_gl
    cost: float         # K_g * (E_gl + kappa * T_gl)


@dataclass(frozen=True)
class CostBreakdown:
    per_service: tuple  # of ServiceCost
    total: float

    def to_csv(self) -> str:
        """One row per service plus a totals row."""
        buf = io.StringIO()
        buf.write("service_id,K_g,K_l,t_cmp,t_com,t_round,e_round,service_cost\n")
        for sc in self.per_service:
            buf.write(f"{sc.service_id},{float(sc.rounds)!r},{sc.local_iters},"
                      f"{float(sc.t_cmp)!r},{float(sc.t_com)!r},"
                      f"{float(sc.round_time)!r},"
                      f"{float(sc.round_energy)!r},{float(sc.cost)!r}\n")
        buf.write(f"total,,,,,,,{float(self.total)!r}\n")
        return buf.getvalue()


def uplink_rate(w_n: float, ue: UEProfile, network: NetworkProfile) -> float:
    """Achievable uplink rate w_n * B_ul * log2(1 + h p / N0), in bps."""
    if w_n <= 0:
        raise InvalidParameterError(f"bandwidth fraction must be > 0, got {w_n}")
    snr = ue.channel_gain * ue.tx_power / network.noise_power
    return w_n * network.uplink_bandwidth * math.log2(1 + snr)


def per_iteration_compute(service: ServiceProfile, ue: UEProfile,
                          f: float) -> tuple:
    """(energy J, time s) for one local iteration of `service` on `ue` at CPU f."""
    if f <= 0:
        raise InvalidParameterError(f"cpu frequency must be > 0, got {f}")
    work = service.cycles_per_bit * service.data_sizes[ue.id]
    energy = 0.5 * ue.capacitance * work * f ** 2
    time = work / f + ue.mem_overhead[service.id]
    return energy, time


def uplink_time(service: ServiceProfile, ue: UEProfile, w_n: float,
                network: NetworkProfile) -> float:
    """Upload time of one local update: v_s / rate."""
    return service.update_size / uplink_rate(w_n, ue, network)


def downlink_time(service: ServiceProfile, scenario: Scenario) -> float:
    """Broadcast time of the global update, max over UEs."""
    net = scenario.network
    rates = [net.downlink_bandwidth
             * math.log2(1 + ue.channel_gain * net.bs_power / net.noise_power)
             for ue in scenario.ues]
    return max(service.update_size / r for r in rates)


def service_round_time(service: ServiceProfile, scenario: Scenario,
                       alloc: Allocation, check: bool = True) -> tuple:
    """(t_cmp, t_com, t_round) of one global round of `service`.

    t_round = t_com + T_avg + K_l * t_cmp, with t_cmp/t_com the max over UEs.
    """
    if check:
        alloc.check_feasible(scenario)
    s = service.id
    t_cmp = max(per_iteration_compute(service, ue, alloc.cpu[s, ue.id])[1]
                for ue in scenario.ues)
    dl = downlink_time(service, scenario)
    t_com = max(uplink_time(service, ue, alloc.bandwidth[ue.id], scenario.network)
                + dl + ue.comm_overhead[s]
                for ue in scenario.ues)
    k_l = num_local_rounds(service.local_accuracy, scenario.learning)
    t_round = t_com + service.avg_time + k_l * t_cmp
    return t_cmp, t_com, t_round


def service_round_energy(service: ServiceProfile, scenario: Scenario,
                         alloc: Allocation, check: bool = True) -> float:
    """Energy of one global round: sum over UEs of upload + K_l * compute."""
    if check:
        alloc.check_feasible(scenario)
    s = service.id
    k_l = num_local_rounds(service.local_accuracy, scenario.learning)
    total = 0.0
    for ue in scenario.ues:
        e_cmp, _ = per_iteration_compute(service, ue, alloc.cpu[s, ue.id])
        tau_ul = uplink_time(service, ue, alloc.bandwidth[ue.id], scenario.network)
        total += ue.tx_power * tau_ul + k_l * e_cmp
    return total


def total_cost(scenario: Scenario, alloc: Allocation, check: bool = True,
               theta_cap_override=None) -> CostBreakdown:
    """Weighted total cost sum_s K_g(Theta_s) * (E_gl_s + kappa_s * T_gl_s).

    theta_cap_override, when given, supplies per-service contraction factors
    directly instead of evaluating Theta(eta_s) (testing hook).
    """
    if check:
        alloc.check_feasible(scenario)
    rows = []
    total = 0.0
    for svc in scenario.services:
        s = svc.id
        if theta_cap_override is not None:
            k_g = svc.round_scale / theta_cap_override[s]
        else:
            try:
                consts = fedl_constants(svc.local_accuracy, scenario.learning,
                                        svc.round_scale)
                k_g = num_global_rounds(float(alloc.eta[s]), consts)
            except DomainError as exc:
                raise DomainError(f"service {s}: {exc}") from exc
        k_l = num_local_rounds(svc.local_accuracy, scenario.learning)
        t_cmp, t_com, t_round = service_round_time(svc, scenario, alloc, check=False)
        e_round = service_round_energy(svc, scenario, alloc, check=False)
        cost = k_g * (e_round + svc.tradeoff_weight * t_round)
        rows.append(ServiceCost(service_id=s, rounds=k_g, local_iters=k_l,
                                t_cmp=t_cmp, t_com=t_com, round_time=t_round,
                                round_energy=e_round, cost=cost))
        total += cost
    return CostBreakdown(per_service=tuple(rows), total=total)
