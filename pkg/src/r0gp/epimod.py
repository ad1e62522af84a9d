"""Multigroup SEIR model, its linearization, simulation and trajectory metrics.

State layout everywhere is ``(s, e, z, r)``, each a length-``n`` block, with
``e`` (exposed) and ``z`` (infectious) the infected compartments::

    s_i' = -beta_i s_i sum_j a_ij z_j
    e_i' =  beta_i s_i sum_j a_ij z_j - gamma_i e_i
    z_i' =  gamma_i e_i - delta_i z_i
    r_i' =  delta_i z_i
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels, matca
from .errors import ContractError, StepSizeError
from .r0core import LinearizedEpidemic, r0_eigen

DEFAULT_DT = 0.05
DEFAULT_T_MAX = 5000.0
DEFAULT_FLOOR_FRACTION = 1e-6
DEFAULT_SEED_FRACTION = 1e-4


def _positive_vector(v, n, name):
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ContractError(f"{name} must have length {n}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ContractError(f"{name} must be positive and finite")
    return arr


@dataclass(frozen=True)
class SeirModel:
    """Multigroup SEIR parameters.

    Scalars for ``beta``, ``gamma`` and ``delta`` are broadcast to all
    groups. ``A`` is the non-negative contact matrix (already scaled) and
    ``s0`` the susceptible population of each group at the disease-free
    equilibrium.
    """

    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    A: np.ndarray
    s0: np.ndarray

    def __post_init__(self):
        A = matca.as_square_matrix(self.A, "A")
        if not matca.is_nonnegative(A):
            raise ContractError("contact matrix A must be non-negative")
        n = A.shape[0]
        object.__setattr__(self, "A", A)
        for name in ("beta", "gamma", "delta", "s0"):
            object.__setattr__(self, name, _positive_vector(getattr(self, name), n, name))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def population(self):
        return float(self.s0.sum())

    def with_rates(self, beta=None, gamma=None, delta=None):
        return replace(
            self,
            beta=self.beta if beta is None else beta,
            gamma=self.gamma if gamma is None else gamma,
            delta=self.delta if delta is None else delta,
        )

    def linearize(self):
        return linearize(self)

    def r0(self):
        return r0_eigen(linearize(self))

    def jacobian(self):
        lin = linearize(self)
        return lin.F + lin.V

    def rhs(self, state):
        """Time derivative of a full ``(s, e, z, r)`` state vector."""
        n = self.n
        y = np.asarray(state, dtype=float)
        s, e, z = y[:n], y[n:2 * n], y[2 * n:3 * n]
        inf = self.beta * s * (self.A @ z)
        return np.concatenate((-inf, inf - self.gamma * e, self.gamma * e - self.delta * z, self.delta * z))


def linearize(m: SeirModel) -> LinearizedEpidemic:
    """``F`` and ``V`` of the infected subsystem ``(e, z)`` at the disease-free equilibrium."""
    n = m.n
    F = np.zeros((2 * n, 2 * n))
    F[:n, n:] = (m.beta * m.s0)[:, None] * m.A
    V = np.zeros((2 * n, 2 * n))
    V[:n, :n] = -np.diag(m.gamma)
    V[n:, :n] = np.diag(m.gamma)
    V[n:, n:] = -np.diag(m.delta)
    return LinearizedEpidemic(F, V)


def seeded_state(m: SeirModel, fraction: float = DEFAULT_SEED_FRACTION):
    """``e = fraction * s0``, ``s = s0 - e``, ``z = r = 0``."""
    e = fraction * m.s0
    return np.concatenate((m.s0 - e, e, np.zeros(m.n), np.zeros(m.n)))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    converged: bool
    n: int = field(default=0)

    def __post_init__(self):
        if not self.n:
            self.n = self.states.shape[1] // 4

    def block(self, name):
        k = "sezr".index(name)
        return self.states[:, k * self.n:(k + 1) * self.n]

    @property
    def s(self):
        return self.block("s")

    @property
    def e(self):
        return self.block("e")

    @property
    def z(self):
        return self.block("z")

    @property
    def r(self):
        return self.block("r")

    @property
    def infected(self):
        """Total active infections ``sum(e + z)`` at each time."""
        return self.e.sum(axis=1) + self.z.sum(axis=1)

    @property
    def total_population(self):
        return self.states.sum(axis=1)

    def to_csv(self, path, stride=1):
        header = ["t"] + [f"{c}[{i}]" for c in "sezr" for i in range(self.n)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t, row in zip(self.times[::stride], self.states[::stride]):
                writer.writerow([f"{t:.6g}"] + [f"{v:.10g}" for v in row])


def simulate(m: SeirModel, init=None, dt=DEFAULT_DT, t_max=DEFAULT_T_MAX, infection_floor=None,
             neg_tol=1e-6) -> Trajectory:
    """Integrate the SEIR equations with fixed-step RK4.

    Stops at ``t_max`` or as soon as total infections are below
    ``infection_floor`` (default ``1e-6`` of the population) and not
    increasing; ``converged`` records which.

    Raises
    ------
    StepSizeError
        If a compartment drops below ``-neg_tol``.
    """
    if not dt > 0:
        raise ContractError("dt must be positive")
    y0 = seeded_state(m) if init is None else np.asarray(init, dtype=float)
    if y0.shape != (4 * m.n,):
        raise ContractError(f"initial state must have length {4 * m.n}")
    if np.any(y0 < 0):
        raise ContractError("initial state must be non-negative")
    if infection_floor is None:
        infection_floor = DEFAULT_FLOOR_FRACTION * float(y0.sum())
    max_steps = int(np.ceil(t_max / dt - 1e-9))
    states, steps, status = _kernels.rk4_seir(
        m.beta, m.gamma, m.delta, np.ascontiguousarray(m.A), np.ascontiguousarray(y0),
        float(dt), max_steps, float(infection_floor), float(neg_tol),
    )
    if status == 2:
        raise StepSizeError(f"negative state at t={steps * dt:g}; reduce dt (currently {dt:g})")
    times = dt * np.arange(steps + 1)
    return Trajectory(times, states, converged=status == 1, n=m.n)


@dataclass(frozen=True)
class TrajectoryMetrics:
    peak_infections: float
    cumulative_infections: float
    peak_time: float
    provisional: bool


def trajectory_metrics(t: Trajectory) -> TrajectoryMetrics:
    """Peak of ``sum(e + z)`` and total ever infected.

    Total ever infected is the population minus the final susceptibles
    minus any recovered present at the start. Metrics of an unconverged
    trajectory are flagged ``provisional``.
    """
    inf = t.infected
    k = int(np.argmax(inf))
    total = float(t.states[0].sum())
    cumulative = total - float(t.s[-1].sum()) - float(t.r[0].sum())
    return TrajectoryMetrics(float(inf[k]), cumulative, float(t.times[k]), not t.converged)


def has_interior_peak(t: Trajectory, rtol=1e-9):
    """Whether active infections rise above their initial value before falling."""
    inf = t.infected
    return bool(inf.max() > inf[0] * (1 + rtol) and inf[-1] < inf.max())


# ---------------------------------------------------------------------------
# assumption checks for general compartmental models
# ---------------------------------------------------------------------------


@dataclass
class ConditionResult:
    passed: bool
    counterexamples: list = field(default_factory=list)


@dataclass
class AssumptionReport:
    conditions: dict
    equilibrium: ConditionResult | None = None
    transition_block_hurwitz: ConditionResult | None = None

    @property
    def passed(self):
        ok = all(c.passed for c in self.conditions.values())
        if self.equilibrium is not None:
            ok = ok and self.equilibrium.passed
        return ok


def _fd_jacobian(fun, x0, h=1e-6):
    x0 = np.asarray(x0, dtype=float)
    f0 = np.asarray(fun(x0), dtype=float)
    J = np.empty((f0.size, x0.size))
    for k in range(x0.size):
        step = h * max(1.0, abs(x0[k]))
        xp, xm = x0.copy(), x0.copy()
        xp[k] += step
        xm[k] -= step
        J[:, k] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2 * step)
    return J


def validate_assumptions(f, v, g, x_samples, y_samples, y_star=None, tol=1e-9, max_witnesses=5):
    """Sample-based check of the regularity conditions on ``(f, v, g)``.

    ``f(x, y)`` are new-infection rates, ``v(x, y)`` the other infected
    transitions and ``g(x, y)`` the non-infected dynamics. Conditions:

    * ``nonnegative_f``: ``f >= 0``;
    * ``zero_at_disease_free``: ``f(0, y) = v(0, y) = 0``;
    * ``empty_infected_compartment``: ``x_i = 0`` implies ``v_i >= 0``;
    * ``empty_uninfected_compartment``: ``y_j = 0`` implies ``g_j >= 0``.

    With ``y_star`` the disease-free equilibrium is also checked:
    ``g(0, y*) = 0`` and the Jacobian of ``(v, g)`` at ``(0, y*)`` Hurwitz,
    using central finite differences. ``transition_block_hurwitz`` reports
    the ``D_x v`` block alone, which is what the linearization needs.
    """
    x_samples = np.atleast_2d(np.asarray(x_samples, dtype=float))
    y_samples = np.atleast_2d(np.asarray(y_samples, dtype=float))
    nx, ny = x_samples.shape[1], y_samples.shape[1]
    res = {k: ConditionResult(True) for k in (
        "nonnegative_f", "zero_at_disease_free", "empty_infected_compartment", "empty_uninfected_compartment")}

    def fail(key, witness):
        res[key].passed = False
        if len(res[key].counterexamples) < max_witnesses:
            res[key].counterexamples.append(witness)

    zero = np.zeros(nx)
    for x, y in zip(x_samples, y_samples):
        fx = np.asarray(f(x, y), dtype=float)
        scale = tol * max(1.0, float(np.max(np.abs(fx), initial=0.0)))
        if np.any(fx < -scale):
            fail("nonnegative_f", {"x": x.tolist(), "y": y.tolist(), "f": fx.tolist()})
        f0, v0 = np.asarray(f(zero, y)), np.asarray(v(zero, y))
        if np.any(np.abs(f0) > tol) or np.any(np.abs(v0) > tol):
            fail("zero_at_disease_free", {"y": y.tolist(), "f": f0.tolist(), "v": v0.tolist()})
        for i in range(nx):
            xi = x.copy()
            xi[i] = 0.0
            vi = float(np.asarray(v(xi, y))[i])
            if vi < -tol:
                fail("empty_infected_compartment", {"x": xi.tolist(), "y": y.tolist(), "i": i, "v_i": vi})
        for j in range(ny):
            yj = y.copy()
            yj[j] = 0.0
            gj = float(np.asarray(g(x, yj))[j])
            if gj < -tol:
                fail("empty_uninfected_compartment", {"x": x.tolist(), "y": yj.tolist(), "j": j, "g_j": gj})

    report = AssumptionReport(res)
    if y_star is not None:
        y_star = np.asarray(y_star, dtype=float)
        g0 = np.asarray(g(zero, y_star), dtype=float)

        def vg(xy):
            x, y = xy[:nx], xy[nx:]
            return np.concatenate((np.asarray(v(x, y)), np.asarray(g(x, y))))

        J = _fd_jacobian(vg, np.concatenate((zero, y_star)))
        witnesses = []
        eq_ok = bool(np.all(np.abs(g0) <= tol * max(1.0, float(np.abs(y_star).max()))))
        if not eq_ok:
            witnesses.append({"g(0, y*)": g0.tolist()})
        absc = matca.spectral_abscissa(J)
        hurwitz = absc < -matca.HURWITZ_TOL
        if not hurwitz:
            witnesses.append({"spectral_abscissa": absc})
        report.equilibrium = ConditionResult(eq_ok and hurwitz, witnesses)
        absc_v = matca.spectral_abscissa(J[:nx, :nx])
        report.transition_block_hurwitz = ConditionResult(
            absc_v < -matca.HURWITZ_TOL, [] if absc_v < -matca.HURWITZ_TOL else [{"spectral_abscissa": absc_v}])
    return report


def seir_fields(m: SeirModel):
    """``(f, v, g)`` of the SEIR model with ``x = (e, z)`` and ``y = (s, r)``."""
    n = m.n

    def f(x, y):
        z, s = x[n:], y[:n]
        return np.concatenate((m.beta * s * (m.A @ z), np.zeros(n)))

    def v(x, y):
        e, z = x[:n], x[n:]
        return np.concatenate((-m.gamma * e, m.gamma * e - m.delta * z))

    def g(x, y):
        z, s = x[n:], y[:n]
        return np.concatenate((-m.beta * s * (m.A @ z), m.delta * z))

    return f, v, g
