"""Small dense convex-program solver.

Primal log-barrier interior-point method with damped Newton inner steps and
a geometric barrier schedule.  Programs are self-describing: a smooth
objective, blocks of smooth inequality constraints g(x) <= 0, one linear
equality system, and per-variable lower bounds.  Problem sizes here are tiny
(<= a few hundred variables), so everything is dense.

Also provides a KKT residual evaluator and an exhaustive refining-grid
oracle for cross-checking solutions on instances with <= 4 free variables.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize
from scipy.linalg import LinAlgWarning

from .errors import InfeasibilityError, InvalidParameterError


# ---------------------------------------------------------------------------
# building blocks

class ReciprocalQuadObjective:
    """f(x) = sum_i a_i / x_i + 0.5 * sum_i P_i x_i^2 + q . x + c0.

    Covers every objective in this package: diagonal quadratics (compute
    energy, penalty and proximal terms), reciprocal terms (upload times),
    and linear terms (epigraph times, dual inner products).  Domain requires
    x_i > 0 wherever a_i != 0.
    """

    def __init__(self, recip, quad_diag, lin, const=0.0):
        self.recip = np.asarray(recip, dtype=float)
        self.quad_diag = np.asarray(quad_diag, dtype=float)
        self.lin = np.asarray(lin, dtype=float)
        self.const = float(const)
        self._ridx = np.nonzero(self.recip)[0]

    def value(self, x):
        val = 0.5 * float(self.quad_diag @ (x * x)) + float(self.lin @ x) + self.const
        if self._ridx.size:
            val += float(self.recip[self._ridx] @ (1.0 / x[self._ridx]))
        return val

    def gradient(self, x):
        g = self.quad_diag * x + self.lin
        if self._ridx.size:
            g[self._ridx] -= self.recip[self._ridx] / x[self._ridx] ** 2
        return g

    def hessian(self, x):
        d = self.quad_diag.copy()
        if self._ridx.size:
            d[self._ridx] += 2.0 * self.recip[self._ridx] / x[self._ridx] ** 3
        return np.diag(d)

    def in_domain(self, x):
        return bool(np.all(x[self._ridx] > 0))


class ReciprocalEpigraphBlock:
    """Constraint rows  a_r / x[i_r] + off_r - x[j_r] <= 0.

    The form shared by the compute-time and upload-time epigraph
    constraints.  Requires x[i_r] > 0.
    """

    def __init__(self, a, i_idx, j_idx, offset, dim):
        self.a = np.asarray(a, dtype=float)
        self.i_idx = np.asarray(i_idx, dtype=int)
        self.j_idx = np.asarray(j_idx, dtype=int)
        self.offset = np.asarray(offset, dtype=float)
        self.dim = int(dim)

    @property
    def m(self):
        return self.a.size

    def value(self, x):
        return self.a / x[self.i_idx] + self.offset - x[self.j_idx]

    def jacobian(self, x):
        jac = np.zeros((self.m, self.dim))
        rows = np.arange(self.m)
        jac[rows, self.i_idx] = -self.a / x[self.i_idx] ** 2
        jac[rows, self.j_idx] += -1.0
        return jac

    def hessian_combo(self, x, weights):
        """sum_r weights_r * hess(g_r)(x); per-row Hessians are single-entry."""
        diag = np.zeros(self.dim)
        np.add.at(diag, self.i_idx, weights * 2.0 * self.a / x[self.i_idx] ** 3)
        return np.diag(diag)

    def in_domain(self, x):
        return bool(np.all(x[self.i_idx] > 0))


class DenseConstraintBlock:
    """Generic block wrapping per-constraint callables g(x) -> (val, grad, hess)."""

    def __init__(self, funcs, dim):
        self.funcs = list(funcs)
        self.dim = int(dim)

    @property
    def m(self):
        return len(self.funcs)

    def value(self, x):
        return np.array([f(x)[0] for f in self.funcs])

    def jacobian(self, x):
        return np.array([f(x)[1] for f in self.funcs])

    def hessian_combo(self, x, weights):
        h = np.zeros((self.dim, self.dim))
        for w, f in zip(weights, self.funcs):
            h += w * f(x)[2]
        return h

    def in_domain(self, x):
        return True


class _SlackBlock:
    """Phase-I wrapper: rows g_r(x) - s <= 0 with s the last variable."""

    def __init__(self, inner, dim_aug):
        self.inner = inner
        self.dim_aug = dim_aug

    @property
    def m(self):
        return self.inner.m

    def value(self, x):
        return self.inner.value(x[:-1]) - x[-1]

    def jacobian(self, x):
        jac = np.zeros((self.m, self.dim_aug))
        jac[:, :-1] = self.inner.jacobian(x[:-1])
        jac[:, -1] = -1.0
        return jac

    def hessian_combo(self, x, weights):
        h = np.zeros((self.dim_aug, self.dim_aug))
        h[:-1, :-1] = self.inner.hessian_combo(x[:-1], weights)
        return h

    def in_domain(self, x):
        return self.inner.in_domain(x[:-1])


@dataclass
class ConvexProgram:
    """A smooth convex program: min f(x) s.t. g(x) <= 0, Ax = b, x >= lb."""

    dim: int
    objective: object
    ineq: list = field(default_factory=list)
    eq: tuple | None = None        # (A, b)
    lb: np.ndarray | None = None   # -inf where unbounded
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lb is None:
            self.lb = np.full(self.dim, -np.inf)
        self.lb = np.asarray(self.lb, dtype=float)
        if self.eq is not None:
            a, b = self.eq
            self.eq = (np.asarray(a, dtype=float), np.asarray(b, dtype=float))

    @property
    def n_ineq(self):
        return sum(blk.m for blk in self.ineq)

    def ineq_values(self, x):
        if not self.ineq:
            return np.empty(0)
        return np.concatenate([blk.value(x) for blk in self.ineq])

    def ineq_jacobian(self, x):
        if not self.ineq:
            return np.empty((0, self.dim))
        return np.vstack([blk.jacobian(x) for blk in self.ineq])

    def ineq_hessian_combo(self, x, weights):
        h = np.zeros((self.dim, self.dim))
        pos = 0
        for blk in self.ineq:
            h += blk.hessian_combo(x, weights[pos:pos + blk.m])
            pos += blk.m
        return h

    def in_domain(self, x):
        if hasattr(self.objective, "in_domain") and not self.objective.in_domain(x):
            return False
        return all(blk.in_domain(x) for blk in self.ineq)


@dataclass(frozen=True)
class Multipliers:
    ineq: np.ndarray    # one per inequality row, >= 0
    bounds: np.ndarray  # one per variable (0 where lb = -inf), >= 0
    eq: np.ndarray      # one per equality row, free sign


@dataclass
class SolveReport:
    x_star: np.ndarray
    objective_value: float
    iterations: int
    kkt_residual: float
    status: str                   # converged | max-iter | infeasible
    multipliers: Multipliers | None = None


# ---------------------------------------------------------------------------
# KKT residual

def kkt_residual(program: ConvexProgram, x, multipliers: Multipliers) -> float:
    """Max of scaled stationarity, complementary slackness, and feasibility.

    Stationarity and complementarity are scaled by 1 + |grad f| and
    1 + |f(x)| respectively; feasibility is absolute.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (program.dim,):
        raise InvalidParameterError("x has wrong dimension")
    lam, mu = np.asarray(multipliers.ineq), np.asarray(multipliers.bounds)
    if lam.shape != (program.n_ineq,) or mu.shape != (program.dim,):
        raise InvalidParameterError("multiplier dimensions do not match program")
    if np.any(lam < 0) or np.any(mu < 0):
        raise InvalidParameterError("inequality multipliers must be >= 0")

    grad_f = program.objective.gradient(x)
    stat = grad_f.copy()
    comp = 0.0
    feas = 0.0
    if program.n_ineq:
        g = program.ineq_values(x)
        stat = stat + program.ineq_jacobian(x).T @ lam
        comp = max(comp, float(np.max(np.abs(lam * g))))
        feas = max(feas, float(np.max(np.maximum(g, 0.0))))
    finite = np.isfinite(program.lb)
    if finite.any():
        stat = stat - mu
        slack = x[finite] - program.lb[finite]
        comp = max(comp, float(np.max(np.abs(mu[finite] * slack))))
        feas = max(feas, float(np.max(np.maximum(-slack, 0.0))))
    if program.eq is not None:
        a, b = program.eq
        nu = np.asarray(multipliers.eq)
        if nu.shape != (a.shape[0],):
            raise InvalidParameterError("equality multiplier dimension mismatch")
        stat = stat + a.T @ nu
        feas = max(feas, float(np.max(np.abs(a @ x - b))))
    r_stat = float(np.max(np.abs(stat))) / (1.0 + float(np.max(np.abs(grad_f))))
    r_comp = comp / (1.0 + abs(program.objective.value(x)))
    return max(r_stat, r_comp, feas)


# ---------------------------------------------------------------------------
# barrier solver

def _strictly_feasible(program, x, margin=0.0):
    if not program.in_domain(x):
        return False
    finite = np.isfinite(program.lb)
    if np.any(x[finite] - program.lb[finite] <= margin):
        return False
    if program.n_ineq and np.any(program.ineq_values(x) >= -margin):
        return False
    return True


def _project_eq(program, x):
    if program.eq is None:
        return x
    a, b = program.eq
    r = a @ x - b
    if np.max(np.abs(r)) < 1e-13:
        return x
    return x - a.T @ np.linalg.solve(a @ a.T, r)


def _deep_interior_point(program, margin, x_ref):
    """Chebyshev-style LP: a point on the equality manifold with maximal
    uniform clearance above the lower bounds.  Variables without a lower
    bound are pinned at their reference values so the LP cannot wander
    off along unbounded directions (epigraph variables in particular)."""
    finite = np.isfinite(program.lb)
    n = program.dim
    # variables (x, s); maximize s subject to A x = b, x_i - s >= lb_i + margin_i
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_ub = np.zeros((int(finite.sum()), n + 1))
    a_ub[np.arange(a_ub.shape[0]), np.nonzero(finite)[0]] = -1.0
    a_ub[:, -1] = 1.0
    b_ub = -(program.lb + margin)[finite]
    if program.eq is not None:
        a_eq = np.hstack([program.eq[0], np.zeros((program.eq[0].shape[0], 1))])
        b_eq = program.eq[1]
    else:
        a_eq, b_eq = None, None
    bounds = [(None, None) if finite[i] else (x_ref[i], x_ref[i])
              for i in range(n)] + [(0.0, 1.0)]
    res = scipy.optimize.linprog(
        c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
        bounds=bounds, method="highs")
    if not res.success or res.x[-1] <= 0:
        raise InfeasibilityError("could not reconcile bounds with equality constraints")
    return res.x[:n]


def _restore_feasible(program, x0, feas_tol):
    """Shift x0 to a strictly feasible interior point (bounds, eq, ineq)."""
    x = np.array(x0, dtype=float)
    finite = np.isfinite(program.lb)
    margin = 1e-9 + 1e-7 * np.maximum(1.0, np.abs(np.where(finite, program.lb, 0.0)))
    for _ in range(10):
        x[finite] = np.maximum(x[finite], (program.lb + margin)[finite])
        x = _project_eq(program, x)
        bound_ok = np.all(x[finite] - program.lb[finite] > 0)
        eq_ok = program.eq is None or np.max(np.abs(program.eq[0] @ x - program.eq[1])) <= feas_tol
        if bound_ok and eq_ok and _strictly_feasible(program, x):
            return x
    # clip/project alternation can cycle when x0 hugs the bounds on the
    # equality manifold; blend toward a deep interior point instead
    x_deep = _deep_interior_point(program, margin, np.array(x0, dtype=float))
    x_proj = _project_eq(program, np.array(x0, dtype=float))
    for lam in (0.01, 0.03, 0.1, 0.3, 0.6, 1.0):
        x = (1.0 - lam) * x_proj + lam * x_deep
        if _strictly_feasible(program, x):
            return x
    if _strictly_feasible(program, x_deep):
        return x_deep
    return _phase_one(program, x_deep, feas_tol)


def _phase_one(program, x, feas_tol):
    """min s  s.t.  g(x) <= s, Ax = b, x >= lb, s >= s_floor."""
    if not program.n_ineq:
        raise InfeasibilityError("restoration failed with no inequalities present")
    g0 = program.ineq_values(x) if program.in_domain(x) else None
    if g0 is None:
        raise InfeasibilityError("initial point outside the objective domain")
    dim_aug = program.dim + 1
    s0 = float(np.max(g0)) + 1.0
    scale = max(1.0, abs(s0))
    aug = ConvexProgram(
        dim=dim_aug,
        objective=ReciprocalQuadObjective(
            np.zeros(dim_aug), np.zeros(dim_aug),
            np.concatenate([np.zeros(program.dim), [1.0]])),
        ineq=[_SlackBlock(blk, dim_aug) for blk in program.ineq],
        eq=None if program.eq is None else (
            np.hstack([program.eq[0], np.zeros((program.eq[0].shape[0], 1))]),
            program.eq[1]),
        lb=np.concatenate([program.lb, [-scale]]),
    )
    x_aug = np.concatenate([x, [s0]])
    report = solve(aug, x_aug, tol=1e-6, _allow_restore=False)
    x_new = report.x_star[:-1]
    if report.x_star[-1] >= 0 or not _strictly_feasible(program, x_new):
        raise InfeasibilityError("no strictly feasible point found")
    return x_new


def _polish_active_set(program, x0, mults0, finite, a_eq):
    """Crossover refinement: treat near-active inequalities and bounds as
    equalities and run Newton on the stationarity system.  Returns
    (x, mults) on success, None when the guess is invalid or diverges."""
    g0 = program.ineq_values(x0) if program.n_ineq else np.zeros(0)
    act_g = np.nonzero(mults0.ineq > -g0)[0]
    slack0 = np.where(finite, x0 - program.lb, np.inf)
    act_b = np.nonzero(mults0.bounds > slack0)[0]
    n = program.dim
    k1, k2 = len(act_g), len(act_b)
    p = 0 if a_eq is None else a_eq.shape[0]
    lam = mults0.ineq[act_g].copy()
    mu = mults0.bounds[act_b].copy()
    nu = mults0.eq.copy()
    x = x0.copy()
    e_b = np.zeros((n, k2))
    e_b[act_b, np.arange(k2)] = 1.0

    for _ in range(40):
        if not program.in_domain(x):
            return None
        grad = program.objective.gradient(x)
        hess = program.objective.hessian(x)
        r_stat = grad - e_b @ mu
        jac_act = None
        if k1:
            jac = program.ineq_jacobian(x)
            jac_act = jac[act_g]
            w = np.zeros(program.n_ineq)
            w[act_g] = lam
            hess = hess + program.ineq_hessian_combo(x, w)
            r_stat = r_stat + jac_act.T @ lam
        if p:
            r_stat = r_stat + a_eq.T @ nu
        r_g = program.ineq_values(x)[act_g] if k1 else np.zeros(0)
        r_b = x[act_b] - program.lb[act_b]
        r_eq = a_eq @ x - program.eq[1] if p else np.zeros(0)
        res = np.concatenate([r_stat, r_g, r_b, r_eq])
        if np.linalg.norm(res, np.inf) <= 1e-12 * (1.0 + np.linalg.norm(grad, np.inf)):
            break
        m = n + k1 + k2 + p
        big = np.zeros((m, m))
        big[:n, :n] = hess
        col = n
        if k1:
            big[:n, col:col + k1] = jac_act.T
            big[col:col + k1, :n] = jac_act
            col += k1
        if k2:
            big[:n, col:col + k2] = -e_b
            big[col:col + k2, :n] = e_b.T
            col += k2
        if p:
            big[:n, col:] = a_eq.T
            big[col:, :n] = a_eq
        step = np.linalg.lstsq(big, -res, rcond=None)[0]
        x = x + step[:n]
        col = n
        if k1:
            lam = lam + step[col:col + k1]
            col += k1
        if k2:
            mu = mu + step[col:col + k2]
            col += k2
        if p:
            nu = nu + step[col:]
    else:
        return None

    # validate the guess: dual feasibility and strict primal feasibility
    if (k1 and lam.min() < -1e-12) or (k2 and mu.min() < -1e-12):
        return None
    if not program.in_domain(x):
        return None
    tol_p = 1e-9
    if program.n_ineq:
        g = program.ineq_values(x)
        inact = np.setdiff1d(np.arange(program.n_ineq), act_g)
        if inact.size and g[inact].max() > tol_p:
            return None
    if finite.any():
        if np.min((x - program.lb)[finite]) < -tol_p:
            return None
    lam_full = np.zeros(program.n_ineq)
    lam_full[act_g] = np.maximum(lam, 0.0)
    mu_full = np.zeros(n)
    mu_full[act_b] = np.maximum(mu, 0.0)
    return x, Multipliers(ineq=lam_full, bounds=mu_full, eq=nu)


def _central_multipliers(program, x, t, finite, a_eq):
    """Dual estimates at a barrier center: lam_i = 1/(t (-g_i)), with
    equality multipliers fitted by least squares."""
    lam = np.zeros(program.n_ineq)
    mu_b = np.zeros(program.dim)
    if t is not None and program.n_ineq:
        lam = 1.0 / (t * (-program.ineq_values(x)))
    if t is not None and finite.any():
        mu_b[finite] = 1.0 / (t * (x - program.lb)[finite])
    if a_eq is not None:
        r0 = program.objective.gradient(x) - mu_b
        if program.n_ineq:
            r0 = r0 + program.ineq_jacobian(x).T @ lam
        nu = np.linalg.lstsq(a_eq.T, -r0, rcond=None)[0]
    else:
        nu = np.zeros(0)
    return Multipliers(ineq=lam, bounds=mu_b, eq=nu)


def solve(program: ConvexProgram, x0, tol: float = 1e-8,
          feas_tol: float = 1e-9, max_newton: int = 200,
          hot_t0: float | None = None,
          _allow_restore: bool = True) -> SolveReport:
    """Barrier solve; deterministic given (program, x0, tol).

    max_newton caps the damped-Newton iterations of each centering phase;
    the report's ``iterations`` field counts the grand total.  hot_t0, when
    given, overrides the automatic starting barrier weight — useful when x0
    is already near-optimal (warm starts) and the early low-t phases would
    only re-walk the central path.
    """
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (program.dim,):
        raise InvalidParameterError("x0 has wrong dimension")
    if not _strictly_feasible(program, x) or (
            program.eq is not None
            and np.max(np.abs(program.eq[0] @ x - program.eq[1])) > feas_tol):
        if not _allow_restore:
            raise InfeasibilityError("x0 not strictly feasible")
        x = _restore_feasible(program, x0, feas_tol)

    finite = np.isfinite(program.lb)
    n_barrier = program.n_ineq + int(finite.sum())
    a_eq = program.eq[0] if program.eq is not None else None
    n_iter = 0
    eq_mult = np.zeros(0 if a_eq is None else a_eq.shape[0])

    if n_barrier == 0:
        t = None  # pure (equality-constrained) Newton on f itself
        schedule = [1.0]
    else:
        # balance objective and barrier at the start so the first centering
        # stays close to the analytic center instead of crawling to a boundary
        t0 = n_barrier / max(1e-12, abs(program.objective.value(x)))
        t0 = float(np.clip(t0, 1e-6, 1e6))
        if hot_t0 is not None:
            t0 = float(max(t0, hot_t0))
        schedule = None

    def barrier_grad_hess(x, t):
        val = program.objective.value(x)
        grad = t * program.objective.gradient(x)
        hess = t * program.objective.hessian(x)
        if program.n_ineq:
            g = program.ineq_values(x)
            jac = program.ineq_jacobian(x)
            inv = 1.0 / (-g)
            grad = grad + jac.T @ inv
            hess = hess + (jac.T * inv ** 2) @ jac + program.ineq_hessian_combo(x, inv)
        if finite.any():
            slack = np.where(finite, x - program.lb, 1.0)
            gb = np.zeros_like(x)
            gb[finite] = -1.0 / slack[finite]
            grad = grad + gb
            hb = np.zeros_like(x)
            hb[finite] = 1.0 / slack[finite] ** 2
            hess = hess + np.diag(hb)
        return val, grad, hess

    def barrier_value(x, t):
        val = t * program.objective.value(x)
        if program.n_ineq:
            val -= float(np.sum(np.log(-program.ineq_values(x))))
        if finite.any():
            val -= float(np.sum(np.log((x - program.lb)[finite])))
        return val

    status = "converged"
    t = 1.0 if n_barrier == 0 else t0
    mu_factor = 20.0
    max_phases = 60
    best_resid, best_x, best_mults = np.inf, x.copy(), None
    last_x, last_mults = x.copy(), None
    stale_phases = 0
    for _phase in range(max_phases):
        # center at current t with damped Newton
        for _inner in range(max_newton):
            _, grad, hess = barrier_grad_hess(x, t)
            n = program.dim
            # Jacobi equilibration: the barrier Hessian mixes curvature scales
            # spanning many orders of magnitude, and the raw KKT system can
            # reach condition numbers ~1e20 where dense solves stall
            d = np.sqrt(np.maximum(np.diag(hess), 1e-30))
            d = 1.0 / np.maximum(d, 1e-12 * d.max() if d.max() > 0 else 1.0)
            if a_eq is not None:
                p = a_eq.shape[0]
                a_s = a_eq * d  # scale eq columns
                row = np.linalg.norm(a_s, axis=1)
                row[row == 0] = 1.0
                a_s = a_s / row[:, None]
                kkt = np.zeros((n + p, n + p))
                kkt[:n, :n] = (hess * d).T * d
                kkt[:n, :n] += np.eye(n) * 1e-12
                kkt[:n, n:] = a_s.T
                kkt[n:, :n] = a_s
                rhs = np.concatenate([-grad * d, np.zeros(p)])
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", LinAlgWarning)
                    try:
                        sol = scipy.linalg.solve(kkt, rhs, assume_a="sym")
                    except scipy.linalg.LinAlgError:
                        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
                dx, eq_mult = sol[:n] * d, sol[n:] / row
            else:
                h_s = (hess * d).T * d + np.eye(n) * 1e-12
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", LinAlgWarning)
                    try:
                        dx = scipy.linalg.solve(h_s, -grad * d, assume_a="sym") * d
                    except scipy.linalg.LinAlgError:
                        dx = np.linalg.lstsq(h_s, -grad * d, rcond=None)[0] * d
            dec = float(-grad @ dx)
            if dec / 2 <= 1e-10 * (1.0 + t):
                # includes tiny negative dec from floating-point exhaustion:
                # the phase is centered as far as arithmetic allows
                break
            # backtracking line search, keeping strict feasibility
            phi0 = barrier_value(x, t)
            alpha = 1.0
            while alpha > 1e-13:
                x_new = x + alpha * dx
                if _strictly_feasible(program, x_new) and \
                        barrier_value(x_new, t) <= phi0 - 0.25 * alpha * dec:
                    break
                alpha *= 0.5
            else:
                break  # stalled
            x = x + alpha * dx
            n_iter += 1
        if n_barrier == 0:
            break
        mults = _central_multipliers(program, x, t, finite, a_eq)
        resid = kkt_residual(program, x, mults)
        last_x, last_mults = x.copy(), mults
        if resid <= best_resid:
            best_resid, best_x, best_mults = resid, x.copy(), mults
            stale_phases = 0
        else:
            stale_phases += 1
        if resid <= tol or stale_phases >= 3:
            break
        t *= mu_factor

    if n_barrier == 0:
        mults = _central_multipliers(program, x, None, finite, a_eq)
        resid = kkt_residual(program, x, mults)
    else:
        # return the best-centered iterate seen (late phases can lose
        # accuracy to floating-point exhaustion)
        x, mults, resid = best_x, best_mults, best_resid
        if resid > tol:
            # crossover: pin the active set and polish with plain Newton;
            # classify activity at the last (highest-t) center, where the
            # multiplier/slack separation is sharpest
            polished = _polish_active_set(program, last_x, last_mults,
                                          finite, a_eq)
            if polished is not None:
                x_p, mults_p = polished
                resid_p = kkt_residual(program, x_p, mults_p)
                if resid_p < resid:
                    x, mults, resid = x_p, mults_p, resid_p
    status = "converged" if resid <= max(tol, 1e-8) else "max-iter"
    return SolveReport(x_star=x, objective_value=program.objective.value(x),
                       iterations=n_iter, kkt_residual=resid, status=status,
                       multipliers=mults)


# ---------------------------------------------------------------------------
# grid oracle

def _eliminate_equalities(a, b):
    """Row-reduce Ax = b; return (pivot_cols, free_cols, expr) with
    x[pivot] = expr_const + expr_mat @ x[free]."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    p, n = a.shape
    pivot_cols = []
    row = 0
    for col in range(n):
        if row >= p:
            break
        piv = row + int(np.argmax(np.abs(a[row:, col])))
        if abs(a[piv, col]) < 1e-12:
            continue
        a[[row, piv]] = a[[piv, row]]
        b[[row, piv]] = b[[piv, row]]
        b[row] /= a[row, col]
        a[row] /= a[row, col]
        for r in range(p):
            if r != row and a[r, col] != 0:
                b[r] -= a[r, col] * b[row]
                a[r] -= a[r, col] * a[row]
        pivot_cols.append(col)
        row += 1
    if np.any(np.abs(b[row:]) > 1e-9):
        raise InfeasibilityError("equality system is inconsistent")
    free_cols = [c for c in range(n) if c not in pivot_cols]
    # x[pivot_cols[i]] = b[i] - sum_j a[i, free_j] x[free_j]
    const = b[:row]
    mat = -a[:row][:, free_cols]
    return pivot_cols, free_cols, (const, mat)


def grid_oracle(program: ConvexProgram, box, resolution: float,
                points_per_dim: int = 17):
    """Exhaustive refining-grid search; returns (x_best, value).

    Equalities are handled by eliminating one variable per equality row.
    Each stage scans a full grid and shrinks the box around the incumbent
    (valid under convexity) until the spacing is below `resolution`.
    Refused for more than 4 free variables.
    """
    box = [tuple(map(float, iv)) for iv in box]
    if len(box) != program.dim:
        raise InvalidParameterError("box must give one interval per variable")
    if program.eq is not None:
        pivots, free, (const, mat) = _eliminate_equalities(*program.eq)
    else:
        pivots, free, (const, mat) = [], list(range(program.dim)), \
            (np.zeros(0), np.zeros((0, program.dim)))
    if len(free) > 4:
        raise InvalidParameterError(
            f"grid oracle refused: {len(free)} free variables (max 4)")

    lo = np.array([box[j][0] for j in free])
    hi = np.array([box[j][1] for j in free])
    lo_orig, hi_orig = lo.copy(), hi.copy()
    best_x, best_val = None, np.inf
    feas_slack = 1e-9

    def assemble(free_vals):
        x = np.zeros(program.dim)
        x[free] = free_vals
        if pivots:
            x[pivots] = const + mat @ free_vals
        return x

    def feasible(x):
        for j, (b_lo, b_hi) in enumerate(box):
            if not (b_lo - feas_slack <= x[j] <= b_hi + feas_slack):
                return False
        finite = np.isfinite(program.lb)
        if np.any(x[finite] < program.lb[finite] - feas_slack):
            return False
        if not program.in_domain(x):
            return False
        if program.n_ineq and np.any(program.ineq_values(x) > feas_slack):
            return False
        return True

    first_stage = True
    while True:
        axes = [np.linspace(lo[d], hi[d], points_per_dim) for d in range(len(free))]
        spacing_d = (hi - lo) / (points_per_dim - 1) if free else np.zeros(0)
        spacing = float(spacing_d.max()) if free else 0.0
        stage_best, stage_val = None, np.inf
        grids = np.meshgrid(*axes, indexing="ij") if free else []
        pts = (np.stack([g.ravel() for g in grids], axis=1)
               if free else np.zeros((1, 0)))
        for row in pts:
            x = assemble(row)
            if not feasible(x):
                continue
            val = program.objective.value(x)
            if val < stage_val:
                stage_val, stage_best = val, x
        if stage_best is None:
            if first_stage:
                raise InfeasibilityError("no feasible grid point in the box")
            break
        if stage_val < best_val:
            best_val, best_x = stage_val, stage_best
        if spacing <= resolution or not free:
            break
        # shrink per dimension: a shared width would let the widest (epigraph)
        # axis dominate and freeze the others around a coarse incumbent
        center = stage_best[free]
        lo = np.maximum(center - 3 * spacing_d, lo_orig)
        hi = np.minimum(center + 3 * spacing_d, hi_orig)
        first_stage = False
    if best_x is None:
        raise InfeasibilityError("no feasible grid point found")
    return best_x, best_val
