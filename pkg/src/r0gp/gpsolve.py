"""Geometric programs in standard form and a log-barrier interior-point solver.

A program is convexified with ``x = exp(y)``: the objective and every
posynomial constraint become log-sum-exp functions of ``y``, and monomial
equalities become affine equalities that are eliminated with a null-space
basis. The reduced problem is solved by a primal barrier method with damped
Newton steps, preceded by a phase-I problem when the start ``y = 0`` is not
strictly feasible.

Every variable is additionally confined to ``|y| <= log_bound`` unless the
caller supplied a bound on that side. The box only matters when the
infimum is approached as a variable runs off to 0 or infinity; the solver
then returns a point of the minimizing sequence.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from . import _kernels
from .errors import ContractError
from .posy import Posynomial

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and limits for :func:`solve`.

    ``duality_gap`` is measured in log-objective units, so ``1e-8`` means the
    returned objective is within a relative ``1e-8`` of the optimum.
    """

    duality_gap: float = 1e-8
    max_iterations: int = 200
    mu0: float = 1.0
    mu_factor: float = 10.0
    newton_tol: float = 1e-10
    stationarity_tol: float = 1e-9
    feasibility_tol: float = 1e-9
    log_bound: float = 30.0
    ls_alpha: float = 0.01
    ls_beta: float = 0.5
    max_centering_steps: int = 60
    debug_path: str | None = None

    def __post_init__(self):
        for name in ("duality_gap", "newton_tol", "feasibility_tol", "log_bound", "mu0"):
            if not getattr(self, name) > 0:
                raise ContractError(f"SolverOptions.{name} must be positive")
        if self.mu_factor <= 1:
            raise ContractError("SolverOptions.mu_factor must exceed 1")
        if self.max_iterations < 1:
            raise ContractError("SolverOptions.max_iterations must be >= 1")


class GeometricProgram:
    """minimize ``objective`` s.t. ``f_i <= 1`` and ``g_j == 1``.

    Parameters
    ----------
    objective : Posynomial
    inequality_constraints : sequence of Posynomial
        Each constraint means ``f_i(x) <= 1``.
    equality_constraints : sequence of Monomial
        Each constraint means ``g_j(x) == 1``.
    variables : sequence of str, optional
        Variable order. Defaults to the sorted names referenced anywhere.
    variable_bounds : mapping of str to (lo, hi), optional
        Positive box bounds; either side may be ``None``.
    """

    def __init__(
        self,
        objective: Posynomial,
        inequality_constraints: Sequence[Posynomial] = (),
        equality_constraints: Sequence[Posynomial] = (),
        variables: Sequence[str] | None = None,
        variable_bounds: Mapping[str, tuple] | None = None,
    ):
        if not isinstance(objective, Posynomial):
            raise ContractError("objective must be a Posynomial")
        self.objective = objective
        self.inequality_constraints = tuple(inequality_constraints)
        self.equality_constraints = tuple(equality_constraints)
        for c in self.inequality_constraints:
            if not isinstance(c, Posynomial):
                raise ContractError("inequality constraints must be Posynomials")
        for g in self.equality_constraints:
            if not isinstance(g, Posynomial) or not g.is_monomial:
                raise ContractError("equality constraints must be single monomials")
        referenced = set(objective.variables)
        for p in self.inequality_constraints + self.equality_constraints:
            referenced |= p.variables
        bounds = dict(variable_bounds or {})
        referenced |= set(bounds)
        if variables is None:
            variables = sorted(referenced)
        self.variables = tuple(variables)
        if len(set(self.variables)) != len(self.variables):
            raise ContractError("duplicate variable names")
        missing = referenced - set(self.variables)
        if missing:
            raise ContractError(f"undeclared variables: {sorted(missing)}")
        for name, (lo, hi) in bounds.items():
            if lo is not None and not lo > 0:
                raise ContractError(f"lower bound of {name!r} must be positive")
            if hi is not None and not hi > 0:
                raise ContractError(f"upper bound of {name!r} must be positive")
            if lo is not None and hi is not None and lo > hi:
                raise ContractError(f"empty bounds for {name!r}")
        self.variable_bounds = bounds

    def bound_rows(self):
        """``(variable, side, log_value)`` for every user-supplied bound, in order."""
        rows = []
        for name in self.variables:
            lo, hi = self.variable_bounds.get(name, (None, None))
            if lo is not None:
                rows.append((name, "lower", math.log(lo)))
            if hi is not None:
                rows.append((name, "upper", math.log(hi)))
        return rows

    def __repr__(self):
        return (
            f"GeometricProgram({len(self.variables)} variables, "
            f"{len(self.inequality_constraints)} inequalities, "
            f"{len(self.equality_constraints)} equalities)"
        )


@dataclass
class GpSolution:
    status: str
    x: dict
    objective_value: float
    kkt_residual: float
    iterations: int
    phase1_iterations: int = 0
    phase1_slack: float | None = None
    duals: np.ndarray | None = None
    constraint_labels: list = field(default_factory=list)
    at_log_bound: list = field(default_factory=list)

    @property
    def optimal(self):
        return self.status == OPTIMAL

    def stats(self):
        return {
            "status": self.status,
            "objective_value": self.objective_value,
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
            "phase1_iterations": self.phase1_iterations,
            "phase1_slack": self.phase1_slack,
            "at_log_bound": list(self.at_log_bound),
        }


# ---------------------------------------------------------------------------
# compiled representation
# ---------------------------------------------------------------------------


@dataclass
class _Compiled:
    names: tuple
    A0: np.ndarray
    b0: np.ndarray
    A: np.ndarray
    b: np.ndarray
    starts: np.ndarray
    labels: list
    G: np.ndarray
    h: np.ndarray


def _stack(posys, index, n):
    As, bs, starts = [], [], [0]
    for p in posys:
        A, b = p.to_arrays(index, n)
        As.append(A)
        bs.append(b)
        starts.append(starts[-1] + len(b))
    if As:
        return np.vstack(As), np.concatenate(bs), np.array(starts, dtype=np.int64)
    return np.zeros((0, n)), np.zeros(0), np.zeros(1, dtype=np.int64)


def _compile(gp: GeometricProgram, log_bound: float | None):
    names = gp.variables
    n = len(names)
    index = {v: i for i, v in enumerate(names)}
    A0, b0 = gp.objective.to_arrays(index, n)
    A, b, starts = _stack(gp.inequality_constraints, index, n)
    labels = [("inequality", i) for i in range(len(gp.inequality_constraints))]

    extra_A, extra_b = [], []
    for name, side, logv in gp.bound_rows():
        row = np.zeros(n)
        if side == "lower":  # lo / x <= 1
            row[index[name]] = -1.0
            extra_b.append(logv)
        else:  # x / hi <= 1
            row[index[name]] = 1.0
            extra_b.append(-logv)
        extra_A.append(row)
        labels.append(("bound", name, side))
    if log_bound is not None:
        for name in names:
            lo, hi = gp.variable_bounds.get(name, (None, None))
            for side, have in (("lower", lo), ("upper", hi)):
                if have is None:
                    row = np.zeros(n)
                    row[index[name]] = -1.0 if side == "lower" else 1.0
                    extra_A.append(row)
                    extra_b.append(-log_bound)
                    labels.append(("log_box", name, side))
    if extra_A:
        A = np.vstack([A, np.array(extra_A)])
        b = np.concatenate([b, np.array(extra_b)])
        starts = np.concatenate([starts, starts[-1] + np.arange(1, len(extra_A) + 1)]).astype(np.int64)

    G = np.zeros((len(gp.equality_constraints), n))
    h = np.zeros(len(gp.equality_constraints))
    for j, g in enumerate(gp.equality_constraints):
        Ag, bg = g.to_arrays(index, n)
        G[j] = Ag[0]
        h[j] = -bg[0]
    return _Compiled(names, A0, b0, A, b, starts, labels, G, h)


def _lse_all(A, b, starts, x):
    z = A @ x + b
    vals, p = _kernels.segment_lse(np.ascontiguousarray(z), starts)
    J = np.add.reduceat(p[:, None] * A, starts[:-1], axis=0) if len(vals) else np.zeros((0, A.shape[1]))
    return vals, p, J


def _objective(A0, b0, x):
    z = A0 @ x + b0
    if len(z) == 1:
        return float(z[0]), A0[0].copy(), np.zeros((A0.shape[1], A0.shape[1]))
    imax = int(np.argmax(z))
    e = np.exp(z - z[imax])
    rest = e.sum() - e[imax]
    p = e / (1.0 + rest)
    g = A0.T @ p
    H = (A0.T * p) @ A0 - np.outer(g, g)
    return float(z[imax] + math.log1p(rest)), g, H


class _Barrier:
    """Barrier method on ``min lse0(A0 x + b0)`` s.t. ``lse_i(A x + b) <= 0``."""

    def __init__(self, A0, b0, A, b, starts, opts: SolverOptions, history=None, phase=""):
        self.A0, self.b0, self.A, self.b, self.starts = A0, b0, A, b, starts
        self.opts = opts
        self.m = len(starts) - 1
        self.seg = np.repeat(np.arange(self.m), np.diff(starts))
        self.history = history
        self.phase = phase
        self.iterations = 0

    def constraint_values(self, x):
        if self.m == 0:
            return np.zeros(0)
        return _kernels.segment_lse(np.ascontiguousarray(self.A @ x + self.b), self.starts)[0]

    def merit(self, x, mu):
        f = self.constraint_values(x)
        if np.any(f >= 0):
            return math.inf
        return _objective(self.A0, self.b0, x)[0] - mu * float(np.sum(np.log(-f)))

    def derivatives(self, x, mu):
        f0, g0, H0 = _objective(self.A0, self.b0, x)
        if self.m == 0:
            return f0, g0, H0, np.zeros(0), np.zeros((0, len(x)))
        f, p, J = _lse_all(self.A, self.b, self.starts, x)
        inv = 1.0 / (-f)
        g = g0 + mu * (J.T @ inv)
        w = p * inv[self.seg]
        H = H0 + mu * ((self.A.T * w) @ self.A + (J.T * (inv * inv - inv)) @ J)
        return f0, g, H, f, J

    def newton_direction(self, g, H):
        # Jacobi scaling: near an open infimum the Hessian is badly scaled, not singular
        d = np.sqrt(np.maximum(np.diag(H), 1e-300))
        Hs = H / d[:, None] / d[None, :]
        gs = g / d
        try:
            c = scipy.linalg.cho_factor(Hs, check_finite=False)
            return scipy.linalg.cho_solve(c, -gs, check_finite=False) / d
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            return np.linalg.lstsq(Hs + 1e-12 * np.eye(len(g)), -gs, rcond=None)[0] / d

    def center(self, x, mu, stop=None):
        """Newton centering at ``mu``. Returns (x, status) with status in {"ok", "max_iter", "stop"}."""
        opts = self.opts
        gprev = math.inf
        for _ in range(opts.max_centering_steps):
            if self.iterations >= opts.max_iterations:
                return x, "max_iter"
            f0, g, H, f, _ = self.derivatives(x, mu)
            dx = self.newton_direction(g, H)
            lam2 = float(-g @ dx)
            gnorm = float(np.max(np.abs(g), initial=0.0))
            if not np.isfinite(lam2):
                return x, "ok"
            if lam2 / mu <= 2.0 * opts.newton_tol and (gnorm <= opts.stationarity_tol or gnorm > 0.5 * gprev):
                return x, "ok"
            if lam2 <= 1e-15 * max(1.0, abs(f0)):
                return x, "ok"  # predicted decrease is below roundoff of the merit
            gprev = gnorm
            t = 1.0
            if lam2 / mu < 0.25:
                # quadratic region: merit differences drown in roundoff, only keep feasibility
                while np.any(self.constraint_values(x + t * dx) >= 0) and t >= 1e-14:
                    t *= opts.ls_beta
            else:
                phi = self.merit(x, mu)
                while True:
                    phin = self.merit(x + t * dx, mu)
                    if phin <= phi - opts.ls_alpha * t * lam2:
                        break
                    t *= opts.ls_beta
                    if t < 1e-14:
                        break
            self.iterations += 1
            if self.history is not None:
                self.history.append({"phase": self.phase, "mu": mu, "lambda2": lam2, "step": t,
                                     "objective": f0, "grad_norm": gnorm})
            if t < 1e-14:
                return x, "ok"  # no further progress possible at this precision
            x = x + t * dx
            if stop is not None and stop(x):
                return x, "stop"
        return x, "ok"

    def run(self, x, gap, stop=None, stop_centered=None):
        mu = self.opts.mu0
        status = "ok"
        m = max(self.m, 1)
        while True:
            x, status = self.center(x, mu, stop)
            if status != "ok":
                break
            if stop_centered is not None and stop_centered(x):
                status = "stop"
                break
            if m * mu < gap:
                break
            mu /= self.opts.mu_factor
        return x, mu, status


def _reduce(comp: _Compiled):
    """Affine elimination of the equalities: ``y = y_p + Z u``."""
    n = len(comp.names)
    if comp.G.shape[0] == 0:
        return np.zeros(n), np.eye(n), True
    # Pivoted elimination keeps free variables as exact coordinates; a rotated
    # null-space basis would smear roundoff from large |y| into every variable.
    G, h = comp.G, comp.h
    _, R, piv = scipy.linalg.qr(G, pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > 1e-12 * max(1.0, diag.max(initial=0.0))))
    basic, free = piv[:rank], piv[rank:]
    GB, GN = G[:, basic], G[:, free]
    y_p = np.zeros(n)
    y_p[basic] = np.linalg.lstsq(GB, h, rcond=None)[0]
    Z = np.zeros((n, len(free)))
    Z[free, np.arange(len(free))] = 1.0
    if len(free):
        Z[basic] = -np.linalg.lstsq(GB, GN, rcond=None)[0]
    consistent = np.max(np.abs(G @ y_p - h)) <= 1e-9 * (1.0 + np.max(np.abs(h)))
    return y_p, Z, bool(consistent)


def _kkt(comp: _Compiled, y, lam, Z=None):
    """Max-norm KKT residual of the log-space problem at ``y`` with multipliers ``lam``."""
    _, g0, _ = _objective(comp.A0, comp.b0, y)
    if len(comp.starts) > 1:
        f, _, J = _lse_all(comp.A, comp.b, comp.starts, y)
    else:
        f, J = np.zeros(0), np.zeros((0, len(y)))
    lam = np.asarray(lam, dtype=float)
    r = g0 + J.T @ lam
    if comp.G.shape[0]:
        if Z is None:
            Z = scipy.linalg.null_space(comp.G)
        stat = Z.T @ r
    else:
        stat = r
    parts = [np.max(np.abs(stat)) if stat.size else 0.0]
    if f.size:
        parts.append(np.max(np.abs(lam * f)))
        parts.append(max(0.0, float(np.max(f))))
        parts.append(max(0.0, float(-np.min(lam))))
    if comp.G.shape[0]:
        parts.append(float(np.max(np.abs(comp.G @ y - comp.h))))
    return float(max(parts))


def _refine_duals(comp: _Compiled, y, Z):
    """Multipliers minimizing the stationarity and complementarity residuals at ``y``.

    At small barrier weights the estimate ``mu / -f_i`` inherits the
    relative roundoff of tiny slacks; a non-negative least-squares fit at the
    final point does not.
    """
    _, g0, _ = _objective(comp.A0, comp.b0, y)
    f, _, J = _lse_all(comp.A, comp.b, comp.starts, y)
    M = np.vstack([Z.T @ J.T, np.diag(f)])
    rhs = np.concatenate([-(Z.T @ g0), np.zeros(len(f))])
    lam, _ = scipy.optimize.nnls(M, rhs, maxiter=50 * M.shape[1])
    return lam


def _to_x(names, y):
    return {name: float(math.exp(v)) for name, v in zip(names, y)}


def solve(gp: GeometricProgram, opts: SolverOptions | None = None) -> GpSolution:
    """Solve ``gp`` and return a :class:`GpSolution`.

    Status is ``optimal``, ``infeasible`` (no strictly feasible point with
    margin ``opts.feasibility_tol`` in log units, or inconsistent
    equalities) or ``max_iterations`` (best iterate returned).
    """
    opts = opts or SolverOptions()
    comp = _compile(gp, opts.log_bound)
    names = comp.names
    history = [] if opts.debug_path else None
    y_p, Z, consistent = _reduce(comp)

    def fail(status, y=None, it=0, it1=0, slack=None):
        y = y_p if y is None else y
        sol = GpSolution(status, _to_x(names, y), float(gp.objective.eval(_to_x(names, y))),
                         math.inf, it, it1, slack, None, comp.labels)
        _dump(opts, comp, history, sol)
        return sol

    if not consistent:
        return fail(INFEASIBLE)

    # reduced data in u
    A0r, b0r = comp.A0 @ Z, comp.A0 @ y_p + comp.b0
    Ar, br = comp.A @ Z, comp.A @ y_p + comp.b
    k = Z.shape[1]
    u = np.zeros(k)

    phase1_iters = 0
    phase1_slack = None
    m = len(comp.starts) - 1
    f_init = (_kernels.segment_lse(np.ascontiguousarray(Ar @ u + br), comp.starts)[0]
              if m else np.zeros(0))
    if m and np.max(f_init) >= -opts.feasibility_tol:
        # phase I: min s  s.t.  f_i(u) - s <= 0
        A1 = np.hstack([Ar, -np.ones((Ar.shape[0], 1))])
        A10 = np.zeros((1, k + 1))
        A10[0, -1] = 1.0
        b10 = np.zeros(1)
        x1 = np.concatenate([u, [float(np.max(f_init)) + 1.0]])
        bar1 = _Barrier(A10, b10, A1, br, comp.starts, opts, history, "phase1")
        gap1 = min(opts.duality_gap, opts.feasibility_tol) * 0.1
        x1, _, st = bar1.run(x1, gap1, stop=lambda x: x[-1] < -0.5,
                             stop_centered=lambda x: x[-1] < -opts.feasibility_tol)
        phase1_iters = bar1.iterations
        f1 = bar1.constraint_values(np.concatenate([x1[:-1], [0.0]]))
        phase1_slack = float(np.max(f1))
        if st == "max_iter" and phase1_slack >= -opts.feasibility_tol:
            return fail(MAX_ITERATIONS, y_p + Z @ x1[:-1], phase1_iters, phase1_iters, phase1_slack)
        if phase1_slack >= -opts.feasibility_tol:
            return fail(INFEASIBLE, y_p + Z @ x1[:-1], phase1_iters, phase1_iters, phase1_slack)
        u = x1[:-1]

    budget = opts.max_iterations - phase1_iters
    if budget < 1:
        return fail(MAX_ITERATIONS, y_p + Z @ u, phase1_iters, phase1_iters, phase1_slack)
    opts2 = _replace(opts, max_iterations=budget)
    bar = _Barrier(A0r, b0r, Ar, br, comp.starts, opts2, history, "phase2")
    u, mu, st = bar.run(u, opts.duality_gap)
    y = y_p + Z @ u
    f = bar.constraint_values(u)
    lam = mu / (-f) if m else np.zeros(0)
    kkt = _kkt(comp, y, lam, Z)
    if m and kkt > 1e-9:
        lam_ls = _refine_duals(comp, y, Z)
        kkt_ls = _kkt(comp, y, lam_ls, Z)
        if kkt_ls < kkt:
            lam, kkt = lam_ls, kkt_ls
    status = OPTIMAL if st == "ok" else MAX_ITERATIONS
    x = _to_x(names, y)
    at_box = []
    for label, fi in zip(comp.labels, f):
        if label[0] == "log_box" and fi > -1e-3 * opts.log_bound:
            at_box.append(label[1])
    sol = GpSolution(
        status=status,
        x=x,
        objective_value=float(gp.objective.eval(x)),
        kkt_residual=kkt,
        iterations=phase1_iters + bar.iterations,
        phase1_iterations=phase1_iters,
        phase1_slack=phase1_slack,
        duals=lam,
        constraint_labels=comp.labels,
        at_log_bound=at_box,
    )
    _dump(opts, comp, history, sol)
    return sol


def _replace(opts, **kw):
    from dataclasses import replace

    return replace(opts, **kw)


def check_kkt(gp: GeometricProgram, x: Mapping[str, float], duals, include_log_box=False,
              log_bound: float = SolverOptions.log_bound) -> float:
    """Max-norm KKT residual of the convexified program at ``x``.

    ``duals`` holds one non-negative multiplier per inequality row, in the
    order: inequality constraints, then user variable bounds (lower before
    upper, variables in declaration order), then the artificial log-space
    box rows when ``include_log_box`` is set. A mapping with keys
    ``"inequality"`` and ``"bounds"`` is also accepted.
    """
    comp = _compile(gp, log_bound if include_log_box else None)
    y = np.array([math.log(x[name]) for name in comp.names])
    if isinstance(duals, Mapping):
        lam = list(duals.get("inequality", ())) + list(duals.get("bounds", ()))
    else:
        lam = list(duals) if duals is not None else []
    m = len(comp.starts) - 1
    if len(lam) != m:
        raise ContractError(f"expected {m} multipliers, got {len(lam)}")
    return _kkt(comp, y, np.array(lam, dtype=float))


def _dump(opts, comp, history, sol):
    if not opts.debug_path:
        return
    record = {
        "variables": list(comp.names),
        "objective": {"A": comp.A0.tolist(), "b": comp.b0.tolist()},
        "constraints": {"A": comp.A.tolist(), "b": comp.b.tolist(), "starts": comp.starts.tolist(),
                        "labels": [list(l) for l in comp.labels]},
        "equalities": {"G": comp.G.tolist(), "h": comp.h.tolist()},
        "iterates": history or [],
        "result": sol.stats() | {"x": sol.x},
    }
    with open(opts.debug_path, "w") as fh:
        json.dump(record, fh, indent=1, default=float)
