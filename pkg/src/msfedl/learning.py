"""Convergence algebra of the federated learning scheme.

Maps the local accuracy theta and condition number rho = L/beta to the
per-round contraction factor Theta(eta), the global/local round counts,
and the closed-form optimal hyper-learning rate eta*.

Natural logarithms throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, InfeasibleAccuracyError, InvalidParameterError
from .scenario import LearningGlobals


@dataclass(frozen=True)
class FedlConstants:
    """Constants of the simplified contraction factor.

    Theta(eta) = (c_ * eta - d * eta^2) / (2 rho (b * eta^2 + 1)),
    feasible on eta in (0, c_/d), nonempty iff c_ > 0.
    """

    a: float     # round-count scale
    b: float     # (1 + theta)^2 rho^2
    c_: float    # 2 (theta - 1)^2 - 2 (theta + 1) theta rho^2
    d: float     # rho^2 (theta + 1) (3 theta + 1)
    rho: float

    @property
    def eta_max(self) -> float:
        return self.c_ / self.d


def fedl_constants(theta: float, learning: LearningGlobals,
                   round_scale: float = 1.0) -> FedlConstants:
    """Build the contraction constants for one service."""
    if not 0 < theta < 1:
        raise InvalidParameterError(f"theta must be in (0, 1), got {theta}")
    if round_scale <= 0:
        raise InvalidParameterError("round_scale must be > 0")
    rho = learning.condition_number
    b = (1 + theta) ** 2 * rho ** 2
    c_ = 2 * (theta - 1) ** 2 - 2 * (theta + 1) * theta * rho ** 2
    d = rho ** 2 * (theta + 1) * (3 * theta + 1)
    if c_ <= 0:
        raise InfeasibleAccuracyError(
            f"theta = {theta} is too large for condition number rho = {rho}: "
            "the feasible hyper-learning-rate interval is empty")
    return FedlConstants(a=round_scale, b=b, c_=c_, d=d, rho=rho)


def _check_eta(eta: float, k: FedlConstants) -> None:
    if not 0 < eta < k.eta_max:
        raise DomainError(
            f"eta = {eta} outside the feasible interval (0, {k.eta_max})")


def theta_cap(eta: float, k: FedlConstants) -> float:
    """Per-round contraction factor Theta(eta), in (0, 1) on the feasible interval."""
    _check_eta(eta, k)
    return (k.c_ * eta - k.d * eta ** 2) / (2 * k.rho * (k.b * eta ** 2 + 1))


def num_global_rounds(eta: float, k: FedlConstants) -> float:
    """Global rounds K_g = a / Theta(eta)."""
    return k.a / theta_cap(eta, k)


def num_local_rounds(theta: float, learning: LearningGlobals) -> int:
    """Local GD iterations to reach a theta-approximate solution (ceil, >= 1)."""
    if theta <= 0:
        raise InvalidParameterError("theta must be > 0")
    big_c = learning.rate_c * learning.condition_number
    if theta >= big_c:
        # log term nonpositive: no iterations needed in the model; clamp
        return 1
    return max(1, math.ceil((2.0 / learning.rate_gamma) * math.log(big_c / theta)))


def sub1_objective(eta: float, k: FedlConstants) -> float:
    """g(eta) = (b eta^2 + 1) / (c_ eta - d eta^2), proportional to K_g(eta)."""
    _check_eta(eta, k)
    return (k.b * eta ** 2 + 1) / (k.c_ * eta - k.d * eta ** 2)


def optimal_eta(k: FedlConstants) -> float:
    """Closed-form minimizer of g: eta* = (-d + sqrt(d^2 + b c_^2)) / (b c_).

    Satisfies the stationarity identity b c_ eta^2 + 2 d eta - c_ = 0.
    """
    if k.c_ <= 0:
        raise InfeasibleAccuracyError("no feasible eta: c_ <= 0")
    return (-k.d + math.sqrt(k.d ** 2 + k.b * k.c_ ** 2)) / (k.b * k.c_)
