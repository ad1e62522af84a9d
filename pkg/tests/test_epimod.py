import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from helpers import two_group_seir
from r0gp import matca
from r0gp.epimod import (
    SeirModel,
    Trajectory,
    has_interior_peak,
    linearize,
    seeded_state,
    seir_fields,
    simulate,
    trajectory_metrics,
    validate_assumptions,
)
from r0gp.errors import ContractError, StepSizeError
from r0gp.r0core import r0_eigen


def one_group(beta=0.1, gamma=0.2, delta=0.1, s0=1000.0, r0=2.5):
    # a11 chosen so that beta * s0 * a11 / delta = r0
    return SeirModel(beta, gamma, delta, [[r0 * delta / (beta * s0)]], s0)


def test_linearize_blocks():
    m = two_group_seir()
    lin = linearize(m)
    n = m.n
    np.testing.assert_allclose(lin.F[:n, n:], np.diag(m.beta * m.s0) @ m.A)
    assert np.all(lin.F[n:] == 0) and np.all(lin.F[:, :n] == 0)
    np.testing.assert_allclose(lin.V[:n, :n], -np.diag(m.gamma))
    np.testing.assert_allclose(lin.V[n:, :n], np.diag(m.gamma))
    np.testing.assert_allclose(lin.V[n:, n:], -np.diag(m.delta))
    assert matca.is_metzler(lin.V) and matca.is_hurwitz(lin.V)


def test_one_group_r0():
    assert one_group().r0() == pytest.approx(2.5, rel=1e-12)
    m = SeirModel(0.3, 0.7, 0.2, [[4e-4]], 2500.0)
    assert m.r0() == pytest.approx(0.3 * 2500 * 4e-4 / 0.2, rel=1e-12)


@pytest.mark.parametrize("c", [0.01, 0.5, 3.0, 100.0])
def test_gamma_scaling_leaves_r0(c):
    m = two_group_seir()
    assert m.with_rates(gamma=c * m.gamma).r0() == pytest.approx(m.r0(), rel=1e-10)


@pytest.mark.parametrize(
    "kw",
    [
        {"beta": -0.1},
        {"gamma": 0.0},
        {"A": [[-1.0]]},
        {"s0": [1.0, 2.0]},
    ],
)
def test_seir_model_validation(kw):
    base = dict(beta=0.1, gamma=0.2, delta=0.1, A=[[1e-3]], s0=1000.0)
    base.update(kw)
    with pytest.raises(ContractError):
        SeirModel(**base)


def test_disease_free_is_constant():
    m = two_group_seir()
    y0 = np.concatenate((m.s0, np.zeros(2 * m.n), np.zeros(m.n)))
    t = simulate(m, init=y0, t_max=10.0)
    assert t.converged
    np.testing.assert_array_equal(t.states, np.tile(y0, (len(t.times), 1)))
    met = trajectory_metrics(t)
    assert met.peak_infections == 0 and met.cumulative_infections == 0


def test_low_r0_monotone_decay():
    # contact scale calibrated to R0 = 2.5 at (0.1, 0.2, 0.1)
    m = SeirModel(0.05, 0.2, 0.2, [[2.5e-3]], 1000.0)
    assert m.r0() == pytest.approx(0.625)
    t = simulate(m)
    assert t.converged
    inf = t.infected
    assert np.all(np.diff(inf) <= 1e-12 * inf[0])
    assert not has_interior_peak(t)


def test_high_r0_peak_matches_reference_integration():
    m = one_group()
    t = simulate(m, t_max=400.0)
    assert has_interior_peak(t)
    ref = solve_ivp(lambda _, y: m.rhs(y), (0, t.times[-1]), seeded_state(m), method="DOP853",
                    rtol=1e-10, atol=1e-12, dense_output=True)
    Y = ref.sol(t.times).T
    np.testing.assert_allclose(t.states, Y, rtol=1e-6, atol=1e-6 * m.population)
    k = int(np.argmax(t.infected))
    assert 0 < k < len(t.times) - 1


def test_conservation_and_nonnegativity():
    m = two_group_seir()
    t = simulate(m)
    tot = t.total_population
    assert np.max(np.abs(tot - tot[0])) <= 1e-6 * tot[0]
    assert t.states.min() >= -1e-9


def test_step_size_error():
    m = SeirModel(5.0, 50.0, 50.0, [[1e-2]], 1000.0)
    with pytest.raises(StepSizeError, match="dt"):
        simulate(m, dt=1.0, t_max=50.0)


def test_simulate_validation():
    m = one_group()
    with pytest.raises(ContractError):
        simulate(m, dt=0.0)
    with pytest.raises(ContractError):
        simulate(m, init=np.zeros(3))
    with pytest.raises(ContractError):
        simulate(m, init=-np.ones(4))


def test_unconverged_metrics_are_provisional():
    t = simulate(one_group(), t_max=5.0)
    assert not t.converged
    assert trajectory_metrics(t).provisional


THRESHOLD_CASES = [
    (r0, frac)
    for r0 in np.r_[np.linspace(0.3, 0.94, 5), np.linspace(1.06, 4.0, 6)]
    for frac in (1.0, 0.6)
    if abs(r0 * (frac - 1e-4) - 1) >= 0.05  # effective R0 away from the threshold
]


@pytest.mark.parametrize("r0, s_frac", THRESHOLD_CASES)
def test_threshold_interior_peak(r0, s_frac):
    m = one_group(r0=r0)
    e0 = 1e-4 * m.s0
    s_init = s_frac * m.s0 - e0
    y0 = np.concatenate((s_init, e0, [0.0], m.s0 - s_init - e0))
    eff = r0 * s_init[0] / m.s0[0]
    assert has_interior_peak(simulate(m, init=y0)) == (eff > 1)


def test_early_growth_matches_abscissa():
    m = one_group()
    e = 1e-8 * m.s0
    y0 = np.concatenate((m.s0 - e, e, [0.0], [0.0]))
    t = simulate(m, init=y0, t_max=120.0, infection_floor=0.0)
    mask = (t.times >= 60) & (t.times <= 120)
    slope = np.polyfit(t.times[mask], np.log(t.infected[mask]), 1)[0]
    absc = matca.spectral_abscissa(m.jacobian())
    assert slope == pytest.approx(absc, rel=0.05)


def test_final_size_bound_subcritical():
    m = one_group(r0=0.625)
    t = simulate(m, infection_floor=1e-9)
    e0 = float(seeded_state(m)[1])
    r0 = 0.625
    cum = trajectory_metrics(t).cumulative_infections
    assert cum < e0 * r0 / (1 - r0) + e0
    # 1-group final-size relation: ln(s_inf / s_init) = R0 (s_inf - s0) / s0
    s_init = m.s0[0] - e0
    s_inf = brentq(lambda s: math.log(s / s_init) - r0 * (s - m.s0[0]) / m.s0[0], 1e-9, s_init)
    assert cum == pytest.approx(m.s0[0] - s_inf, rel=1e-3)


def test_metrics_monotone():
    t = simulate(two_group_seir())
    met = trajectory_metrics(t)
    k = int(np.argmax(t.infected))
    at_peak = t.states[0].sum() - t.s[k].sum()
    assert met.cumulative_infections >= at_peak >= 0
    assert met.peak_time == t.times[k]


def test_csv_export(tmp_path):
    t = simulate(two_group_seir(), t_max=2.0)
    p = tmp_path / "traj.csv"
    t.to_csv(p, stride=10)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,s[0],s[1],e[0],e[1],z[0],z[1],r[0],r[1]"
    assert len(lines) == 1 + len(t.times[::10])
    row = np.array(lines[2].split(","), dtype=float)
    np.testing.assert_allclose(row[1:], t.states[10], rtol=1e-9)


def test_trajectory_blocks():
    s = np.arange(8.0)[None]
    t = Trajectory(np.zeros(1), s, True)
    assert t.n == 2
    np.testing.assert_array_equal(t.z, [[4.0, 5.0]])
    assert t.infected[0] == 2 + 3 + 4 + 5


def _samples(rng, m, k=100):
    xs = rng.uniform(0, 1e3, (k, 2 * m.n))
    ys = rng.uniform(0, 1e6, (k, 2 * m.n))
    return xs, ys


def test_seir_fields_pass_assumptions():
    m = two_group_seir()
    f, v, g = seir_fields(m)
    xs, ys = _samples(np.random.default_rng(0), m)
    y_star = np.concatenate((m.s0, np.zeros(m.n)))
    rep = validate_assumptions(f, v, g, xs, ys, y_star=y_star)
    assert all(c.passed for c in rep.conditions.values())
    assert rep.transition_block_hurwitz.passed
    # s and r directions are neutral at the disease-free state
    assert not rep.equilibrium.passed
    for x in xs[:5]:
        assert np.all(v(np.zeros_like(x), ys[0]) == 0)


def test_fields_match_rhs():
    m = two_group_seir()
    f, v, g = seir_fields(m)
    rng = np.random.default_rng(1)
    y = rng.uniform(0, 1e3, 4 * m.n)
    n = m.n
    x, yy = y[n:3 * n], np.concatenate((y[:n], y[3 * n:]))
    d = m.rhs(y)
    np.testing.assert_allclose(np.asarray(f(x, yy)) + np.asarray(v(x, yy)), d[n:3 * n])
    np.testing.assert_allclose(g(x, yy), np.concatenate((d[:n], d[3 * n:])))


def test_sign_error_witness():
    m = two_group_seir()
    f, v, g = seir_fields(m)
    xs, ys = _samples(np.random.default_rng(2), m)
    rep = validate_assumptions(lambda x, y: -f(x, y), v, g, xs, ys)
    res = rep.conditions["nonnegative_f"]
    assert not res.passed and res.counterexamples
    assert min(res.counterexamples[0]["f"]) < 0
    assert not rep.passed


def test_stable_equilibrium_check():
    # x' = -x, y' = 1 - y: equilibrium y* = 1, Jacobian diag(-1, -1)
    f = lambda x, y: np.zeros(1)
    v = lambda x, y: -x
    g = lambda x, y: 1.0 - y
    rep = validate_assumptions(f, v, g, [[0.5]], [[0.3]], y_star=[1.0])
    assert rep.passed and rep.equilibrium.passed
    rep = validate_assumptions(f, v, g, [[0.5]], [[0.3]], y_star=[2.0])
    assert not rep.equilibrium.passed


def test_r0_from_linearize_consistent():
    m = two_group_seir()
    assert m.r0() == r0_eigen(m.linearize())
