"""Resource allocation as geometric programs.

A :class:`ResourceModel` describes how the linearized dynamics ``(F, V)``
depend on a vector of positive resource variables ``theta``. Every entry of
``F`` and of the off-diagonal part of ``V`` is a posynomial in ``theta``.
Each diagonal decay rate is either a monomial or a *decrement*
``dbar - Delta(theta)`` with ``Delta`` a posynomial; the latter covers
interventions that raise a recovery rate.

Minimizing cost under an ``R0`` ceiling, minimizing ``R0`` under a budget
and minimizing the spectral abscissa under a budget all become geometric
programs in ``(r, w, theta)`` (or ``(lam, w, theta)``).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import matca
from .epimod import SeirModel
from .errors import ContractError, InfeasibleError, SolverError
from .gpsolve import GeometricProgram, SolverOptions, solve
from .posy import Monomial, Posynomial, constant, variable
from .r0core import LinearizedEpidemic, r0_eigen

__all__ = [
    "Decrement",
    "ResourceModel",
    "PharmaBounds",
    "PharmaModel",
    "AllocationResult",
    "r0_of_theta",
    "build_p_constraint",
    "solve_r0_constrained",
    "solve_budget_constrained",
    "solve_abscissa_budget",
    "vaccine_cost",
    "antidote_cost",
    "default_intervention",
    "build_pharma_model",
    "TAU_LADDER",
]

#: Fallback ``tau`` values tried, in order, after the requested one.
TAU_LADDER = (1e-6, 1e-4)
BOUND_RTOL = 1e-9
_RESERVED = ("r", "lam")


@dataclass(frozen=True)
class Decrement:
    """Diagonal decay ``dbar - delta(theta)`` with ``dbar > 0`` constant."""

    dbar: float
    delta: Posynomial

    def __post_init__(self):
        if not (self.dbar > 0 and math.isfinite(self.dbar)):
            raise ContractError("decrement constant must be positive")
        if not isinstance(self.delta, Posynomial):
            raise ContractError("decrement must subtract a Posynomial")

    def eval(self, theta):
        return self.dbar - self.delta.eval(theta)


def _as_expr(e, what):
    if e is None:
        return None
    if isinstance(e, Posynomial):
        return e
    v = float(e)
    if v == 0.0:
        return None
    if not (v > 0 and math.isfinite(v)):
        raise ContractError(f"{what} entries must be posynomials or non-negative constants")
    return constant(v)


def _as_diag(e, i):
    if isinstance(e, Decrement):
        return e
    if isinstance(e, Posynomial):
        if not e.is_monomial:
            raise ContractError(f"V_d[{i}] must be a monomial or a Decrement")
        return e
    v = float(e)
    if not (v > 0 and math.isfinite(v)):
        raise ContractError(f"diagonal decay required: V_d[{i}] = {v}")
    return constant(v)


def _eval_expr(e, theta):
    return 0.0 if e is None else e.eval(theta)


def _log_corners(names, bounds, limit=4096):
    """Vertices of the bound box over ``names`` (deterministic sample above ``limit``)."""
    names = sorted(names)
    if 2 ** len(names) <= limit:
        for pick in itertools.product((0, 1), repeat=len(names)):
            yield {n: bounds[n][p] for n, p in zip(names, pick)}
    else:
        rng = np.random.default_rng(0)
        for _ in range(limit):
            yield {n: bounds[n][int(rng.integers(2))] for n in names}


@dataclass(frozen=True)
class ResourceModel:
    """Linearized dynamics parameterized by resource variables.

    Parameters
    ----------
    theta_names : sequence of str
        Resource variable names.
    F_expr, Vod_expr : n x n nested sequences
        Posynomials in ``theta``, non-negative constants, or ``None`` / 0
        for structural zeros. The diagonal of ``Vod_expr`` must be empty.
    Vd_expr : sequence of length n
        Monomial, positive constant or :class:`Decrement` per diagonal entry.
    cost_expr : Posynomial
        Posynomial part of the cost; the true cost is
        ``cost_expr(theta) - cost_offset``.
    cost_offset : float
    constraint_exprs : sequence of Posynomial
        Extra constraints ``h(theta) <= 1``.
    theta_bounds : mapping of name to (lo, hi)
        Mandatory positive bounds on every resource.
    null_theta : mapping, optional
        The zero-cost (no intervention) allocation, if known.
    default_shift : float, optional
        Diagonal shift used by the abscissa baseline.
    """

    theta_names: tuple
    F_expr: tuple
    Vod_expr: tuple
    Vd_expr: tuple
    cost_expr: Posynomial = field(default_factory=lambda: constant(1.0))
    cost_offset: float = 1.0
    constraint_exprs: tuple = ()
    theta_bounds: Mapping = field(default_factory=dict)
    null_theta: Mapping | None = None
    default_shift: float | None = None

    def __post_init__(self):
        names = tuple(str(t) for t in self.theta_names)
        if len(set(names)) != len(names):
            raise ContractError("duplicate resource names")
        for t in names:
            if t in _RESERVED or t.startswith("w["):
                raise ContractError(f"resource name {t!r} is reserved")
        n = len(self.Vd_expr)
        if n < 1:
            raise ContractError("model needs at least one compartment")
        F = tuple(tuple(_as_expr(e, "F") for e in row) for row in self.F_expr)
        Vod = tuple(tuple(_as_expr(e, "V_od") for e in row) for row in self.Vod_expr)
        if len(F) != n or any(len(r) != n for r in F) or len(Vod) != n or any(len(r) != n for r in Vod):
            raise ContractError(f"F and V_od must be {n} x {n}")
        if any(Vod[i][i] is not None for i in range(n)):
            raise ContractError("V_od must have an empty diagonal")
        Vd = tuple(_as_diag(e, i) for i, e in enumerate(self.Vd_expr))
        bounds = {}
        for t in names:
            if t not in self.theta_bounds:
                raise ContractError(f"resource {t!r} needs bounds")
            lo, hi = (float(v) for v in self.theta_bounds[t])
            if not (0 < lo <= hi and math.isfinite(hi)):
                raise ContractError(f"invalid bounds for {t!r}: ({lo}, {hi})")
            bounds[t] = (lo, hi)
        if not isinstance(self.cost_expr, Posynomial):
            raise ContractError("cost_expr must be a Posynomial")
        cons = tuple(self.constraint_exprs)
        used = set(self.cost_expr.variables)
        for e in itertools.chain(itertools.chain.from_iterable(F), itertools.chain.from_iterable(Vod), cons):
            if e is not None:
                used |= e.variables
        for d in Vd:
            used |= (d.delta if isinstance(d, Decrement) else d).variables
        unknown = used - set(names)
        if unknown:
            raise ContractError(f"expressions use undeclared resources {sorted(unknown)}")
        object.__setattr__(self, "theta_names", names)
        object.__setattr__(self, "F_expr", F)
        object.__setattr__(self, "Vod_expr", Vod)
        object.__setattr__(self, "Vd_expr", Vd)
        object.__setattr__(self, "constraint_exprs", cons)
        object.__setattr__(self, "theta_bounds", bounds)
        object.__setattr__(self, "cost_offset", float(self.cost_offset))
        self._validate_decrements()
        self._spot_check_hurwitz()

    # -- validation ---------------------------------------------------------
    def _validate_decrements(self):
        # log(delta) is convex in log(theta), so its maximum over the box is at a vertex
        for i, d in enumerate(self.Vd_expr):
            if not isinstance(d, Decrement):
                continue
            worst = max(d.delta.eval(c) for c in _log_corners(d.delta.variables, self.theta_bounds))
            if d.dbar - worst <= 0:
                raise ContractError(f"decrement V_d[{i}] is not positive over the resource bounds")

    def _spot_check_hurwitz(self, samples=8):
        rng = np.random.default_rng(12345)
        pts = [{t: lo for t, (lo, hi) in self.theta_bounds.items()},
               {t: hi for t, (lo, hi) in self.theta_bounds.items()}]
        for _ in range(samples):
            pts.append({t: math.exp(rng.uniform(math.log(lo), math.log(hi)))
                        for t, (lo, hi) in self.theta_bounds.items()})
        for th in pts:
            _, V = self.instantiate(th, check=False)
            if not matca.is_hurwitz(V):
                raise ContractError(f"V(theta) is not Hurwitz at theta={th}")

    # -- evaluation ---------------------------------------------------------
    @property
    def n(self):
        return len(self.Vd_expr)

    @property
    def k(self):
        return len(self.theta_names)

    def cost(self, theta):
        return self.cost_expr.eval(theta) - self.cost_offset

    def kappa(self, c_max):
        return float(c_max) + self.cost_offset

    def budget_row(self, c_max):
        """Posynomial form ``cost_expr / (c_max + cost_offset) <= 1`` of ``cost <= c_max``."""
        kap = self.kappa(c_max)
        if not kap > 0:
            raise ContractError("c_max + cost_offset must be positive")
        return self.cost_expr / kap

    def check_theta(self, theta, rtol=BOUND_RTOL):
        missing = [t for t in self.theta_names if t not in theta]
        if missing:
            raise ContractError(f"theta is missing {missing}")
        for t, (lo, hi) in self.theta_bounds.items():
            v = float(theta[t])
            if not (lo * (1 - rtol) <= v <= hi * (1 + rtol)):
                raise ContractError(f"theta[{t!r}] = {v} outside [{lo}, {hi}]")
        for j, h in enumerate(self.constraint_exprs):
            if h.eval(theta) > 1 + rtol:
                raise ContractError(f"resource constraint {j} violated")

    def instantiate(self, theta, check=True):
        """Numeric ``(F, V)`` at ``theta``."""
        if check:
            self.check_theta(theta)
        n = self.n
        F = np.array([[_eval_expr(e, theta) for e in row] for row in self.F_expr])
        V = np.array([[_eval_expr(e, theta) for e in row] for row in self.Vod_expr])
        for i, d in enumerate(self.Vd_expr):
            V[i, i] = -d.eval(theta)
        return F.reshape(n, n), V.reshape(n, n)

    def linearized(self, theta):
        F, V = self.instantiate(theta)
        if not matca.is_hurwitz(V):
            raise ContractError("V(theta) is not Hurwitz at the given theta")
        return LinearizedEpidemic(F, V)

    @classmethod
    def constant_model(cls, F, V):
        """Resource-free model with the fixed matrices ``F`` and ``V``."""
        F = matca.as_square_matrix(F, "F")
        V = matca.as_square_matrix(V, "V")
        lin = LinearizedEpidemic(F, V)
        n = lin.n
        Vod, Vd = lin.V_od, lin.V_d
        if np.any(Vd <= 0):
            raise ContractError("diagonal decay required")
        return cls(
            theta_names=(),
            F_expr=tuple(tuple(float(v) for v in row) for row in F),
            Vod_expr=tuple(tuple(float(Vod[i, j]) if i != j else None for j in range(n)) for i in range(n)),
            Vd_expr=tuple(float(v) for v in Vd),
            null_theta={},
        )


def r0_of_theta(model: ResourceModel, theta: Mapping[str, float]) -> float:
    """``R0`` of the instantiated model at the feasible allocation ``theta``."""
    return r0_eigen(model.linearized(theta))


def _w(n):
    return [variable(f"w[{i}]") for i in range(n)]


def build_p_constraint(model: ResourceModel, r=None) -> list:
    """Posynomial rows ``p_i(r, w, theta) <= 1`` that certify ``R0(theta) <= r``.

    For a monomial decay ``d_i`` the row is
    ``[(F + r V_od) w]_i / (r d_i w_i)``; for a decrement
    ``dbar_i - Delta_i`` the subtracted part moves to the numerator:
    ``([(F + r V_od) w]_i + r Delta_i w_i) / (r dbar_i w_i)``.
    Rows that are identically zero are dropped. Pass ``r`` to use another
    monomial in place of the variable ``r``.
    """
    if r is None:
        r = variable("r")
    n = model.n
    w = _w(n)
    rows = []
    for i in range(n):
        d = model.Vd_expr[i]
        denom_const = d.dbar if isinstance(d, Decrement) else None
        den = constant(denom_const) if denom_const is not None else d
        terms = []
        for j in range(n):
            f, v = model.F_expr[i][j], model.Vod_expr[i][j]
            if f is not None:
                terms.append(f * w[j] / (den * w[i] * r))
            if v is not None:
                terms.append(v * w[j] / (den * w[i]))
        if isinstance(d, Decrement):
            terms.append(d.delta / den)
        if terms:
            rows.append(Posynomial(terms))
    return rows


def _variables(lead, model):
    return [lead] + [f"w[{i}]" for i in range(model.n)] + list(model.theta_names)


def _split_constant_rows(rows):
    """Drop rows without variables that hold; report any that are violated."""
    kept, violated = [], False
    for p in rows:
        if p.variables:
            kept.append(p)
        elif p.eval({}) > 1 + BOUND_RTOL:
            violated = True
    return kept, violated


@dataclass
class AllocationResult:
    """Outcome of an allocation solve.

    ``r_star`` is the certified ``R0`` bound from the program for the
    ``R0``-based problems and the eigenvalue ``R0`` at ``theta_star`` for
    the abscissa baseline, whose own optimum is ``abscissa_star``.
    """

    theta_star: dict
    r_star: float
    cost_star: float
    w_star: np.ndarray
    status: str
    tau_used: float | None = None
    abscissa_star: float | None = None
    solver_stats: dict = field(default_factory=dict)

    @property
    def optimal(self):
        return self.status == "optimal"

    def to_dict(self):
        def clean(v):
            if v is None:
                return None
            v = float(v)
            return v if math.isfinite(v) else None

        out = {
            "theta_star": {k: float(v) for k, v in self.theta_star.items()},
            "r_star": clean(self.r_star),
            "cost_star": clean(self.cost_star),
            "status": self.status,
            "tau_used": clean(self.tau_used),
            "solver_stats": self.solver_stats,
            "w_star": [float(v) for v in np.asarray(self.w_star).ravel()],
        }
        if self.abscissa_star is not None:
            out["abscissa_star"] = clean(self.abscissa_star)
        return out


def _infeasible(stats, tau=None):
    return AllocationResult({}, math.nan, math.nan, np.empty(0), "infeasible", tau, solver_stats=stats)


def _unpack(model, sol):
    theta = {t: sol.x[t] for t in model.theta_names}
    w = np.array([sol.x[f"w[{i}]"] for i in range(model.n)])
    return theta, w


def _opts(opts, scale=1.0):
    opts = opts or SolverOptions()
    if scale > 1:
        # cost errors scale with cost_offset; tighten the log-gap accordingly
        from dataclasses import replace
        opts = replace(opts, duality_gap=opts.duality_gap / scale)
    return opts


def solve_r0_constrained(model: ResourceModel, r_max: float, tau: float = 0.0,
                         opts: SolverOptions | None = None, retry: bool = True) -> AllocationResult:
    """Cheapest allocation whose ``R0`` bound is at most ``r_max + tau``.

    The program is tried with the given ``tau`` and, when phase I reports it
    infeasible and ``retry`` is set, again with each value of
    :data:`TAU_LADDER` above ``tau``. ``tau_used`` records the value that
    succeeded.
    """
    if not r_max > 0:
        raise ContractError("r_max must be positive")
    if not tau >= 0:
        raise ContractError("tau must be non-negative")
    opts = _opts(opts, max(1.0, model.cost_offset))
    taus = [tau] + ([t for t in TAU_LADDER if t > tau] if retry else [])
    base, violated = _split_constant_rows(build_p_constraint(model) + list(model.constraint_exprs))
    if violated:
        return _infeasible({"status": "infeasible", "reason": "constant constraint violated"}, tau)
    stats = {}
    for t in taus:
        gp = GeometricProgram(
            objective=model.cost_expr,
            inequality_constraints=base + [variable("r") / (r_max + t)],
            equality_constraints=[variable("w[0]")],
            variables=_variables("r", model),
            variable_bounds=model.theta_bounds,
        )
        sol = solve(gp, opts)
        stats = sol.stats()
        if sol.status == "infeasible":
            continue
        if sol.status != "optimal":
            raise SolverError(f"R0-constrained allocation finished with status {sol.status}")
        theta, w = _unpack(model, sol)
        return AllocationResult(theta, sol.x["r"], model.cost(theta), w, "optimal", t, solver_stats=stats)
    return _infeasible(stats, taus[-1])


def _null_result(model, stats_note):
    glob = model.null_theta
    lin = model.linearized(glob)
    from .r0core import r0_gp
    r, sol = r0_gp(lin, return_solution=True)
    w = np.array([sol.x[f"w[{i}]"] for i in range(model.n)])
    stats = sol.stats()
    stats["note"] = stats_note
    return AllocationResult(dict(glob), r, model.cost(glob), w, "optimal", solver_stats=stats)


def _null_within(model, c_max):
    # a budget this small leaves no strictly feasible interior for phase I
    return model.null_theta is not None and model.cost(model.null_theta) <= c_max


def solve_budget_constrained(model: ResourceModel, c_max: float,
                             opts: SolverOptions | None = None) -> AllocationResult:
    """Allocation minimizing the ``R0`` bound subject to ``cost(theta) <= c_max``.

    ``c_max = 0`` is accepted when the model knows its zero-cost allocation;
    that allocation is then returned directly.
    """
    if c_max == 0 and model.null_theta is not None:
        return _null_result(model, "zero budget: no-intervention allocation")
    if not c_max > 0:
        raise ContractError("c_max must be positive")
    rows, violated = _split_constant_rows(
        build_p_constraint(model) + list(model.constraint_exprs) + [model.budget_row(c_max)])
    if violated:
        raise InfeasibleError("budget below the model's minimum cost")
    gp = GeometricProgram(
        objective=variable("r"),
        inequality_constraints=rows,
        equality_constraints=[variable("w[0]")],
        variables=_variables("r", model),
        variable_bounds=model.theta_bounds,
    )
    sol = solve(gp, _opts(opts))
    if sol.status == "infeasible":
        if _null_within(model, c_max):
            return _null_result(model, "budget below solver resolution: no-intervention allocation")
        return _infeasible(sol.stats())
    if sol.status != "optimal":
        raise SolverError(f"budget-constrained allocation finished with status {sol.status}")
    theta, w = _unpack(model, sol)
    return AllocationResult(theta, sol.x["r"], model.cost(theta), w, "optimal", solver_stats=sol.stats())


def _shifted_diagonal(model, s):
    """Posynomial ``s - V_d[i](theta)`` for each row, or ``None`` when zero."""
    out = []
    for i, d in enumerate(model.Vd_expr):
        if isinstance(d, Decrement):
            base, extra = d.dbar, d.delta
        elif not d.variables:
            base, extra = d.coefficient, None
        else:
            raise ContractError(f"V_d[{i}] depends on theta as a monomial; the shift cannot absorb it")
        gap = s - base
        if gap < -1e-12 * max(1.0, abs(s)):
            raise ContractError(f"shift {s} is below the diagonal magnitude {base} of row {i}")
        if gap > 1e-12 * max(1.0, abs(s)):
            extra = constant(gap) if extra is None else extra + gap
        out.append(extra)
    return out


def solve_abscissa_budget(model: ResourceModel, c_max: float, shift: float | None = None,
                          opts: SolverOptions | None = None) -> AllocationResult:
    """Allocation minimizing the spectral abscissa of ``F + V`` under a budget.

    With ``J = F + V`` and a shift ``s`` large enough for ``J + s I`` to be
    non-negative, the abscissa is ``rho(J + s I) - s`` and ``rho`` is the
    optimal ``lam`` of ``min lam s.t. (J + s I) w <= lam w``.
    """
    s = model.default_shift if shift is None else float(shift)
    if s is None:
        consts = [d.dbar if isinstance(d, Decrement) else d.coefficient for d in model.Vd_expr]
        s = max(consts)
    diag = _shifted_diagonal(model, s)
    if c_max == 0 and model.null_theta is not None:
        theta = dict(model.null_theta)
        F, V = model.instantiate(theta)
        res = _null_result(model, "zero budget: no-intervention allocation")
        res.abscissa_star = matca.spectral_abscissa(F + V)
        return res
    if not c_max > 0:
        raise ContractError("c_max must be positive")
    lam = variable("lam")
    n = model.n
    w = _w(n)
    rows = []
    for i in range(n):
        terms = []
        for j in range(n):
            for e in (model.F_expr[i][j], model.Vod_expr[i][j]):
                if e is not None:
                    terms.append(e * w[j] / (lam * w[i]))
        if diag[i] is not None:
            terms.append(diag[i] / lam)
        if terms:
            rows.append(Posynomial(terms))
    rows, violated = _split_constant_rows(rows + list(model.constraint_exprs) + [model.budget_row(c_max)])
    if violated:
        raise InfeasibleError("budget below the model's minimum cost")
    gp = GeometricProgram(
        objective=lam,
        inequality_constraints=rows,
        equality_constraints=[w[0]],
        variables=_variables("lam", model),
        variable_bounds=model.theta_bounds,
    )
    sol = solve(gp, _opts(opts))
    if sol.status == "infeasible":
        if _null_within(model, c_max):
            res = _null_result(model, "budget below solver resolution: no-intervention allocation")
            F, V = model.instantiate(model.null_theta)
            res.abscissa_star = matca.spectral_abscissa(F + V)
            return res
        return _infeasible(sol.stats())
    if sol.status != "optimal":
        raise SolverError(f"abscissa allocation finished with status {sol.status}")
    theta, wv = _unpack(model, sol)
    r0 = r0_of_theta(model, theta)
    return AllocationResult(theta, r0, model.cost(theta), wv, "optimal",
                            abscissa_star=sol.x["lam"] - s, solver_stats=sol.stats())


# ---------------------------------------------------------------------------
# pharmaceutical intervention model
# ---------------------------------------------------------------------------


def _check_range(x, lo, hi, what, rtol=1e-12):
    if not (lo > 0 and lo <= hi):
        raise ContractError(f"{what}: need 0 < lo <= hi, got ({lo}, {hi})")
    if not (lo * (1 - rtol) <= x <= hi * (1 + rtol)):
        raise ContractError(f"{what} = {x} outside [{lo}, {hi}]")


def vaccine_cost(beta, beta_lo, beta_hi):
    """Normalized vaccine cost: 0 at ``beta_hi`` (none), 1 at ``beta_lo`` (maximal)."""
    _check_range(beta, beta_lo, beta_hi, "beta")
    if beta_lo == beta_hi:
        return 0.0
    return (1 / beta - 1 / beta_hi) / (1 / beta_lo - 1 / beta_hi)


def antidote_cost(delta, delta_lo, delta_hi, delta_tilde):
    """Normalized antidote cost: 0 at ``delta_lo`` (none), 1 at ``delta_hi`` (maximal)."""
    _check_range(delta, delta_lo, delta_hi, "delta")
    if not delta_tilde > delta_hi:
        raise ContractError("delta_tilde must exceed delta_hi")
    if delta_lo == delta_hi:
        return 0.0
    a, b = 1 / (delta_tilde - delta_lo), 1 / (delta_tilde - delta_hi)
    return (1 / (delta_tilde - delta) - a) / (b - a)


@dataclass(frozen=True)
class PharmaBounds:
    """Per-group intervention ranges; scalars broadcast over groups."""

    beta_lo: np.ndarray
    beta_hi: np.ndarray
    delta_lo: np.ndarray
    delta_hi: np.ndarray
    delta_tilde: np.ndarray

    def broadcast(self, n):
        vals = {}
        for name in ("beta_lo", "beta_hi", "delta_lo", "delta_hi", "delta_tilde"):
            v = np.asarray(getattr(self, name), dtype=float)
            v = np.full(n, float(v)) if v.ndim == 0 else v
            if v.shape != (n,) or np.any(~np.isfinite(v)) or np.any(v <= 0):
                raise ContractError(f"{name} must be {n} positive values")
            vals[name] = v
        if np.any(vals["beta_lo"] > vals["beta_hi"]) or np.any(vals["delta_lo"] > vals["delta_hi"]):
            raise ContractError("intervention bounds must satisfy lo <= hi")
        if np.any(vals["delta_tilde"] <= vals["delta_hi"]):
            raise ContractError("delta_tilde must exceed delta_hi")
        return PharmaBounds(**vals)


def default_intervention(seir: SeirModel, beta_reduction=0.1, delta_boost=2.0, delta_tilde=2.0):
    """Ranges ``beta in [0.1 beta, beta]``, ``delta in [delta, 2 delta]`` and ``delta_tilde = 2``."""
    return PharmaBounds(
        beta_lo=beta_reduction * seir.beta,
        beta_hi=seir.beta.copy(),
        delta_lo=seir.delta.copy(),
        delta_hi=delta_boost * seir.delta,
        delta_tilde=np.full(seir.n, float(delta_tilde)),
    )


@dataclass(frozen=True)
class PharmaModel(ResourceModel):
    """Vaccine/antidote model on a multigroup SEIR system.

    Resources are ``beta[i]`` (transmission rate after vaccination) and
    ``eta[i] = delta_tilde[i] - delta[i]``. Groups with degenerate bounds
    keep their single value and contribute no resource.
    """

    seir: SeirModel | None = None
    bounds: PharmaBounds | None = None
    default_budget: float | None = None

    def rates(self, theta):
        """Per-group ``(beta, delta)`` at ``theta``."""
        b = self.bounds
        beta = np.array([theta.get(f"beta[{i}]", b.beta_hi[i]) for i in range(self.seir.n)], dtype=float)
        delta = np.array([b.delta_tilde[i] - theta[f"eta[{i}]"] if f"eta[{i}]" in theta else b.delta_lo[i]
                          for i in range(self.seir.n)], dtype=float)
        return beta, delta

    def post_intervention(self, theta):
        beta, delta = self.rates(theta)
        return self.seir.with_rates(beta=beta, delta=delta)

    def spending(self, theta):
        """``(vaccine, antidote)`` totals of the normalized costs."""
        beta, delta = self.rates(theta)
        b = self.bounds
        vac = sum(vaccine_cost(beta[i], b.beta_lo[i], b.beta_hi[i]) for i in range(self.seir.n))
        anti = sum(antidote_cost(delta[i], b.delta_lo[i], b.delta_hi[i], b.delta_tilde[i])
                   for i in range(self.seir.n))
        return float(vac), float(anti)

    def theta_from_rates(self, beta, delta):
        th = {}
        for i in range(self.seir.n):
            if f"beta[{i}]" in self.theta_bounds:
                th[f"beta[{i}]"] = float(beta[i])
            if f"eta[{i}]" in self.theta_bounds:
                th[f"eta[{i}]"] = float(self.bounds.delta_tilde[i] - delta[i])
        return th

    @property
    def full_theta(self):
        """Most aggressive allocation (every resource at maximum investment)."""
        return self.theta_from_rates(self.bounds.beta_lo, self.bounds.delta_hi)

    @property
    def max_cost(self):
        return self.cost(self.full_theta)


def build_pharma_model(seir: SeirModel, intervention: PharmaBounds | None = None,
                       c_max: float | None = None) -> PharmaModel:
    """Resource model of ``seir`` under vaccines (lower ``beta``) and antidotes (raise ``delta``).

    The state is ``x = (e, z)``. The cost posynomial is
    ``sum_i beta_i^-1 / Db_i + eta_i^-1 / De_i`` and the offset collects
    the constant parts, so ``cost(theta) = sum_i f_i + g_i`` and the budget
    row ``cost_expr / (c_max + offset) <= 1`` is exact.
    """
    n = seir.n
    b = (intervention or default_intervention(seir)).broadcast(n)
    sa = seir.s0[:, None] * seir.A
    names, bounds, null = [], {}, {}
    cost_terms, offset = [], 0.0
    beta_expr, eta_expr = [], []
    for i in range(n):
        if b.beta_lo[i] < b.beta_hi[i]:
            t = f"beta[{i}]"
            names.append(t)
            bounds[t] = (b.beta_lo[i], b.beta_hi[i])
            null[t] = b.beta_hi[i]
            D = 1 / b.beta_lo[i] - 1 / b.beta_hi[i]
            cost_terms.append(variable(t) ** -1 / D)
            offset += (1 / b.beta_hi[i]) / D
            beta_expr.append(variable(t))
        else:
            beta_expr.append(constant(b.beta_hi[i]))
    for i in range(n):
        lo, hi = b.delta_tilde[i] - b.delta_hi[i], b.delta_tilde[i] - b.delta_lo[i]
        if lo < hi:
            t = f"eta[{i}]"
            names.append(t)
            bounds[t] = (lo, hi)
            null[t] = hi
            D = 1 / lo - 1 / hi
            cost_terms.append(variable(t) ** -1 / D)
            offset += (1 / hi) / D
            eta_expr.append(variable(t))
        else:
            eta_expr.append(None)
    if cost_terms:
        cost = Posynomial(cost_terms)
    else:
        cost, offset = constant(1.0), 1.0
    N = 2 * n
    F = [[None] * N for _ in range(N)]
    Vod = [[None] * N for _ in range(N)]
    Vd = [None] * N
    for i in range(n):
        for j in range(n):
            if sa[i, j] > 0:
                F[i][n + j] = beta_expr[i] * sa[i, j]
        Vod[n + i][i] = float(seir.gamma[i])
        Vd[i] = float(seir.gamma[i])
        Vd[n + i] = Decrement(float(b.delta_tilde[i]), eta_expr[i]) if eta_expr[i] is not None else float(b.delta_lo[i])
    return PharmaModel(
        theta_names=tuple(names),
        F_expr=tuple(tuple(r) for r in F),
        Vod_expr=tuple(tuple(r) for r in Vod),
        Vd_expr=tuple(Vd),
        cost_expr=cost,
        cost_offset=offset,
        theta_bounds=bounds,
        null_theta=null,
        default_shift=float(np.max(b.delta_tilde)),
        seir=seir,
        bounds=b,
        default_budget=c_max,
    )
