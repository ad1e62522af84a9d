"""Three equivalent computations of the basic reproduction number.

* :func:`r0_eigen` -- spectral radius of the next-generation matrix ``-F V^{-1}``.
* :func:`r0_bisection` -- smallest ``r`` for which ``F + r V`` is Hurwitz.
* :func:`r0_gp` -- optimal value of the geometric program
  ``min r  s.t.  diag(r V_d w)^{-1} (F + r V_od) w <= 1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matca
from .errors import ContractError, InfeasibleError, SolverError
from .gpsolve import GeometricProgram, SolverOptions, solve
from .posy import Monomial, Posynomial, variable

__all__ = [
    "LinearizedEpidemic",
    "r0_eigen",
    "r0_bisection",
    "r0_gp",
    "r0_gp_program",
    "r0_all",
]


@dataclass(frozen=True)
class LinearizedEpidemic:
    """Linearized infected-subsystem dynamics ``x' = (F + V) x``.

    ``F`` (new infections) must be non-negative and ``V`` (other
    transitions) Metzler and Hurwitz. ``V = V_od - diag(V_d)``.
    """

    F: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        F = matca.as_square_matrix(self.F, "F")
        V = matca.as_square_matrix(self.V, "V")
        if F.shape != V.shape:
            raise ContractError(f"F and V shapes differ: {F.shape} vs {V.shape}")
        if not matca.is_nonnegative(F):
            raise ContractError("F must be element-wise non-negative")
        if not matca.is_metzler(V):
            raise ContractError("V must be Metzler")
        if not matca.is_hurwitz(V):
            raise ContractError("V must be Hurwitz")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "V", V)

    @property
    def n(self):
        return self.F.shape[0]

    @property
    def V_od(self):
        return matca.off_diagonal(self.V)

    @property
    def V_d(self):
        return -np.diag(self.V).copy()

    @property
    def next_generation_matrix(self):
        # -F V^{-1} = (solve(V^T, -F^T))^T, non-negative for Metzler-Hurwitz V
        return np.linalg.solve(self.V.T, -self.F.T).T

    @property
    def jacobian(self):
        return self.F + self.V


def r0_eigen(lin: LinearizedEpidemic) -> float:
    """``rho(-F V^{-1})`` evaluated on the non-negative next-generation matrix."""
    return matca.spectral_radius(lin.next_generation_matrix)


def r0_bisection(lin: LinearizedEpidemic, tol: float = 1e-9, hurwitz_tol: float = matca.HURWITZ_TOL) -> float:
    """Infimum of ``r > 0`` with ``F + r V`` Hurwitz, to absolute accuracy ``tol``."""
    if not tol > 0:
        raise ContractError("tol must be positive")

    def stable(r):
        return matca.is_hurwitz(lin.F + r * lin.V, hurwitz_tol)

    lo = tol
    if stable(lo):
        return lo
    hi = 1.0
    for _ in range(60):
        if stable(hi):
            break
        lo = hi
        hi *= 2.0
    else:
        raise SolverError("no stabilizing r found within 60 doublings; check that V is Metzler-Hurwitz")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if stable(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _check_decay(V_d):
    if np.any(V_d <= 0):
        idx = np.flatnonzero(V_d <= 0).tolist()
        raise ContractError(f"diagonal decay required: V_d is zero at rows {idx}")


def r0_gp_program(lin: LinearizedEpidemic) -> GeometricProgram:
    """The geometric program whose optimal value is ``R0``.

    Variables are ``r`` and ``w[0..n-1]`` with the scale fixed by
    ``w[0] == 1``. Rows whose posynomial is identically zero are dropped.
    """
    V_d = lin.V_d
    _check_decay(V_d)
    V_od = lin.V_od
    n = lin.n
    r = variable("r")
    w = [variable(f"w[{i}]") for i in range(n)]
    rows = []
    for i in range(n):
        terms = []
        for j in range(n):
            if lin.F[i, j] > 0:
                terms.append(lin.F[i, j] / V_d[i] * w[j] / (w[i] * r))
            if V_od[i, j] > 0:
                terms.append(V_od[i, j] / V_d[i] * w[j] / w[i])
        if terms:
            rows.append(Posynomial(terms))
    return GeometricProgram(
        objective=r,
        inequality_constraints=rows,
        equality_constraints=[w[0]],
        variables=["r"] + [f"w[{i}]" for i in range(n)],
    )


def r0_gp(lin: LinearizedEpidemic, opts: SolverOptions | None = None, return_solution: bool = False):
    """``R0`` as the optimal value of :func:`r0_gp_program`.

    Raises
    ------
    ContractError
        If some diagonal entry of ``V_d`` is zero.
    InfeasibleError, SolverError
        If the solver does not reach ``optimal``.
    """
    gp = r0_gp_program(lin)
    sol = solve(gp, opts)
    if sol.status == "infeasible":
        raise InfeasibleError("R0 program reported infeasible")
    if sol.status != "optimal":
        raise SolverError(f"R0 program finished with status {sol.status}")
    if return_solution:
        return sol.x["r"], sol
    return sol.x["r"]


def r0_all(lin: LinearizedEpidemic, methods=("eigen", "bisect", "gp"), opts: SolverOptions | None = None) -> dict:
    """R0 by each requested method, keyed by method name."""
    out = {}
    for m in methods:
        if m == "eigen":
            out[m] = r0_eigen(lin)
        elif m == "bisect":
            out[m] = r0_bisection(lin)
        elif m == "gp":
            out[m] = r0_gp(lin, opts)
        else:
            raise ContractError(f"unknown method {m!r}")
    return out
