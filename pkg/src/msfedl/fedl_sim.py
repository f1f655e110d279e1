"""Desk-scale federated training loop on synthetic strongly convex tasks.

Validates the convergence algebra consumed by the cost model: the local
iteration bound, the per-round contraction envelope, and the unimodal
dependence of round counts on the hyper-learning rate.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, InvalidParameterError
from .learning import FedlConstants
from .scenario import LearningGlobals


@dataclass(frozen=True)
class SyntheticTask:
    """Disjoint per-UE datasets with a convex loss family.

    family: 'linear' (l2-regularized linear regression) or 'logistic'
    (l2-regularized logistic regression with labels in {-1, +1}).
    """

    features: tuple      # per-UE (m_n, d) arrays
    labels: tuple        # per-UE (m_n,) arrays
    family: str
    regularizer: float
    dim: int
    smoothness: float        # measured L (max over UEs)
    strong_convexity: float  # measured beta (min over UEs)

    @property
    def n_ues(self):
        return len(self.features)

    @property
    def condition_number(self):
        return self.smoothness / self.strong_convexity

    @property
    def sizes(self):
        return np.array([x.shape[0] for x in self.features], dtype=float)

    def local_loss_grad(self, n, w):
        """(F_n(w), grad F_n(w)) for UE n."""
        x, y = self.features[n], self.labels[n]
        m = x.shape[0]
        if self.family == "linear":
            r = x @ w - y
            val = 0.5 * float(r @ r) / m
            grad = x.T @ r / m
        else:
            margin = -y * (x @ w)
            val = float(np.mean(np.logaddexp(0.0, margin)))
            sig = 1.0 / (1.0 + np.exp(-margin))
            grad = -(x.T @ (y * sig)) / m
        val += 0.5 * self.regularizer * float(w @ w)
        grad = grad + self.regularizer * w
        return val, grad

    def global_loss_grad(self, w):
        sizes = self.sizes
        total = sizes.sum()
        val, grad = 0.0, np.zeros(self.dim)
        for n in range(self.n_ues):
            v, g = self.local_loss_grad(n, w)
            val += sizes[n] / total * v
            grad += sizes[n] / total * g
        return val, grad

    def minimize_global(self, tol=1e-12, max_iter=200):
        """High-accuracy reference optimum (damped Newton on the global loss)."""
        w = np.zeros(self.dim)
        sizes = self.sizes
        total = sizes.sum()
        for _ in range(max_iter):
            val, grad = self.global_loss_grad(w)
            if np.linalg.norm(grad) <= tol:
                break
            hess = np.zeros((self.dim, self.dim))
            for n in range(self.n_ues):
                x, y = self.features[n], self.labels[n]
                m = x.shape[0]
                if self.family == "linear":
                    h_n = x.T @ x / m
                else:
                    margin = -y * (x @ w)
                    sig = 1.0 / (1.0 + np.exp(-margin))
                    h_n = (x.T * (sig * (1 - sig))) @ x / m
                hess += sizes[n] / total * h_n
            hess += self.regularizer * np.eye(self.dim)
            step = np.linalg.solve(hess, -grad)
            alpha = 1.0
            while alpha > 1e-12 and self.global_loss_grad(w + alpha * step)[0] > val:
                alpha *= 0.5
            w = w + alpha * step
        return w


@dataclass
class ModelState:
    global_weights: np.ndarray
    local_weights: np.ndarray    # (N, d)
    global_gradient: np.ndarray
    round: int = 0


def make_synthetic_task(seed: int, n_ues: int, dim: int, samples_per_ue: int,
                        family: str = "linear",
                        regularizer: float = 0.5) -> SyntheticTask:
    """Deterministic synthetic task with measured L, beta."""
    if min(n_ues, dim, samples_per_ue) < 1:
        raise InvalidParameterError("counts must be >= 1")
    if family not in ("linear", "logistic"):
        raise InvalidParameterError(f"unknown loss family: {family}")
    rng = np.random.default_rng(seed)
    feats, labels = [], []
    w_true = rng.normal(size=dim)
    for _ in range(n_ues):
        m = int(rng.integers(max(1, samples_per_ue // 2),
                             samples_per_ue + samples_per_ue // 2 + 1))
        x = rng.normal(size=(m, dim)) / np.sqrt(dim)
        if family == "linear":
            y = x @ w_true + 0.1 * rng.normal(size=m)
        else:
            y = np.sign(x @ w_true + 0.1 * rng.normal(size=m))
            y[y == 0] = 1.0
        feats.append(x)
        labels.append(y)
    lmax, lmin = 0.0, np.inf
    for x in feats:
        gram = x.T @ x / x.shape[0]
        ev = np.linalg.eigvalsh(gram)
        # logistic curvature is at most 1/4 of the Gram spectrum
        scale = 1.0 if family == "linear" else 0.25
        lmax = max(lmax, scale * ev[-1] + regularizer)
        lmin = min(lmin, (scale * ev[0] if family == "linear" else 0.0) + regularizer)
    return SyntheticTask(features=tuple(feats), labels=tuple(labels),
                         family=family, regularizer=regularizer, dim=dim,
                         smoothness=float(lmax), strong_convexity=float(lmin))


def surrogate_grad(task, n, w, pseudo_grad):
    """Gradient of the local surrogate: grad F_n(w) + pseudo_grad.

    pseudo_grad = eta * grad F(w_prev) - grad F_n(w_prev) is constant during
    one local solve.
    """
    _, g = task.local_loss_grad(n, w)
    return g + pseudo_grad


def local_train(task: SyntheticTask, ue: int, w_prev, global_grad,
                eta: float, theta: float, step: float | None = None,
                max_iters: int = 10000):
    """Gradient descent on the local surrogate until the theta-condition
    |grad J_n(w)| <= theta * |grad J_n(w_prev)| holds.

    Returns (w_n, iters, converged)."""
    if eta <= 0 or not 0 < theta < 1:
        raise InvalidParameterError("need eta > 0 and theta in (0, 1)")
    step = 1.0 / task.smoothness if step is None else step
    _, g_local_prev = task.local_loss_grad(ue, w_prev)
    pseudo = eta * global_grad - g_local_prev
    g0 = surrogate_grad(task, ue, w_prev, pseudo)
    target = theta * float(np.linalg.norm(g0))
    w = w_prev.copy()
    g = g0
    iters = 0
    while float(np.linalg.norm(g)) > target and iters < max_iters:
        w = w - step * g
        g = surrogate_grad(task, ue, w, pseudo)
        iters += 1
    return w, iters, float(np.linalg.norm(g)) <= target


@dataclass
class FedlRun:
    loss_gaps: np.ndarray        # (rounds + 1,), F(w^t) - F(w*)
    local_iters: np.ndarray      # (rounds, N)
    theta_satisfied: bool
    w_final: np.ndarray

    def to_csv(self, envelope=None) -> str:
        buf = io.StringIO()
        buf.write("round,loss_gap,theta_bound_gap\n")
        for t, gap in enumerate(self.loss_gaps):
            if envelope is not None:
                buf.write(f"{t},{float(gap)!r},{float(envelope[t])!r}\n")
            else:
                buf.write(f"{t},{float(gap)!r},\n")
        return buf.getvalue()


def run_fedl(task: SyntheticTask, eta: float, theta: float,
             rounds: int) -> FedlRun:
    """Synchronous federated loop: local surrogate solves, size-weighted
    aggregation, global-gradient broadcast.  Traces F(w^t) - F(w*)."""
    w_star = task.minimize_global()
    f_star, _ = task.global_loss_grad(w_star)
    sizes = task.sizes
    weights = sizes / sizes.sum()

    w = np.zeros(task.dim)
    f_val, g_glob = task.global_loss_grad(w)
    gaps = [f_val - f_star]
    iters_per_round = []
    theta_ok = True
    for _ in range(rounds):
        locals_w = np.zeros((task.n_ues, task.dim))
        iters = np.zeros(task.n_ues, dtype=int)
        for n in range(task.n_ues):
            w_n, k, ok = local_train(task, n, w, g_glob, eta, theta)
            locals_w[n] = w_n
            iters[n] = k
            theta_ok = theta_ok and ok
        w = weights @ locals_w
        f_val, g_glob = task.global_loss_grad(w)
        gaps.append(f_val - f_star)
        iters_per_round.append(iters)
        if gaps[-1] > 10.0 * gaps[0] + 1e-12:
            raise DivergenceError(
                f"FEDL diverged at eta={eta}, theta={theta}: "
                f"gap {gaps[-1]:.3e} vs initial {gaps[0]:.3e}")
    return FedlRun(loss_gaps=np.array(gaps),
                   local_iters=(np.array(iters_per_round)
                                if iters_per_round else np.zeros((0, task.n_ues), int)),
                   theta_satisfied=theta_ok, w_final=w)


def contraction_envelope(k: FedlConstants, eta: float, gap0: float,
                         rounds: int) -> np.ndarray:
    """(1 - Theta)^t * gap0 for t = 0..rounds."""
    from .learning import theta_cap
    th = theta_cap(eta, k)
    return gap0 * (1.0 - th) ** np.arange(rounds + 1)


def learning_globals_for(task: SyntheticTask, rate_gamma: float = 1.0,
                         rate_c: float = 1.0) -> LearningGlobals:
    """LearningGlobals with the task's measured constants."""
    return LearningGlobals(smoothness=task.smoothness,
                           strong_convexity=task.strong_convexity,
                           rate_gamma=rate_gamma, rate_c=rate_c)
