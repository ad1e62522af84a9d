import json
import math

import numpy as np
import pytest
from scipy.special import logsumexp

from r0gp.errors import ContractError
from r0gp.gpsolve import GeometricProgram, SolverOptions, check_kkt, solve
from r0gp.posy import Monomial, Posynomial, constant, variable

x1, x2, x = variable("x1"), variable("x2"), variable("x")


def chained():
    return GeometricProgram(x1, [x2 / x1, x2**-1])


def test_chained_lower_bounds():
    sol = solve(chained())
    assert sol.status == "optimal"
    assert sol.x["x1"] == pytest.approx(1.0, rel=1e-7)
    assert sol.x["x2"] == pytest.approx(1.0, rel=1e-7)
    assert sol.objective_value == pytest.approx(1.0, rel=1e-7)
    assert sol.kkt_residual <= 1e-6


def test_open_infimum_reaches_tolerance_floor():
    sol = solve(GeometricProgram(x, [2 * x]))
    assert sol.status == "optimal"
    assert sol.objective_value <= 1e-6
    assert "x" in sol.at_log_bound


def test_contradictory_bounds_infeasible():
    sol = solve(GeometricProgram(constant(1.0), [x, 2 * x**-1]))
    assert sol.status == "infeasible"
    assert sol.phase1_slack > 0


def test_inconsistent_equalities_infeasible():
    gp = GeometricProgram(x, [], [x, 2 * x])
    assert solve(gp).status == "infeasible"


def test_equality_elimination():
    # min x + y  s.t.  x*y == 4  ->  x = y = 2
    y = variable("y")
    sol = solve(GeometricProgram(x + y, [], [x * y / 4]))
    assert sol.optimal
    assert sol.objective_value == pytest.approx(4.0, rel=1e-7)
    assert sol.x["x"] * sol.x["y"] == pytest.approx(4.0, rel=1e-8)


def test_variable_bounds():
    sol = solve(GeometricProgram(x**-1, [], variable_bounds={"x": (0.5, 3.0)}))
    assert sol.optimal
    assert sol.x["x"] == pytest.approx(3.0, rel=1e-7)
    assert ("bound", "x", "upper") in sol.constraint_labels


def test_max_iterations_status():
    sol = solve(chained(), SolverOptions(max_iterations=2))
    assert sol.status == "max_iterations"
    assert all(v > 0 for v in sol.x.values())


def test_deterministic():
    gp = GeometricProgram(x1 + x2**2, [x1**-1 * x2**-1 * 0.5 + 0.1 * x1])
    a, b = solve(gp), solve(gp)
    assert a.x == b.x and a.iterations == b.iterations


def test_debug_dump(tmp_path):
    path = tmp_path / "trace.json"
    solve(chained(), SolverOptions(debug_path=str(path)))
    rec = json.loads(path.read_text())
    assert rec["variables"] == ["x1", "x2"]
    assert rec["result"]["status"] == "optimal"
    assert rec["iterates"]


@pytest.mark.parametrize(
    "kw",
    [{"duality_gap": 0.0}, {"mu_factor": 1.0}, {"max_iterations": 0}, {"feasibility_tol": -1.0}],
)
def test_solver_options_validated(kw):
    with pytest.raises(ContractError):
        SolverOptions(**kw)


def test_program_validation():
    with pytest.raises(ContractError):
        GeometricProgram(x, [], [x + x1])
    with pytest.raises(ContractError):
        GeometricProgram(x, [x1], variables=["x"])
    with pytest.raises(ContractError):
        GeometricProgram(x, variable_bounds={"x": (2.0, 1.0)})


def test_check_kkt_textbook_duals():
    # log space: min y1  s.t.  y2 - y1 <= 0, -y2 <= 0; multipliers (1, 1)
    assert check_kkt(chained(), {"x1": 1.0, "x2": 1.0}, [1.0, 1.0]) <= 1e-8


def test_check_kkt_detects_non_optimal_point():
    sol = solve(chained())
    assert check_kkt(chained(), sol.x, sol.duals, include_log_box=True) <= 1e-6
    assert check_kkt(chained(), {"x1": 2.0, "x2": 1.5}, sol.duals, include_log_box=True) > 1e-3


def test_check_kkt_trivial_program():
    assert check_kkt(GeometricProgram(constant(3.0)), {}, []) == 0.0


def test_check_kkt_dual_count():
    with pytest.raises(ContractError):
        check_kkt(chained(), {"x1": 1.0, "x2": 1.0}, [1.0])


def test_optimal_solution_satisfies_constraints():
    rng = np.random.default_rng(11)
    for _ in range(20):
        gp, _ = random_gp(rng)
        sol = solve(gp)
        assert sol.optimal
        assert all(v > 0 for v in sol.x.values())
        for c in gp.inequality_constraints:
            assert c.eval(sol.x) <= 1 + 1e-8
        assert sol.kkt_residual <= 1e-6


# -- brute-force oracle -------------------------------------------------------

BOX = 2.0


def random_gp(rng):
    """Feasible-by-construction GP: x = 1 satisfies every constraint; log-box |y| <= 2."""
    nv = int(rng.integers(1, 7))
    names = [f"x{i}" for i in range(nv)]

    def posy(k, total):
        cs = rng.uniform(0.1, 1, k)
        cs *= total / cs.sum()
        return Posynomial([Monomial(c, {n: rng.uniform(-2, 2) for n in names if rng.uniform() < 0.7}) for c in cs])

    obj = posy(int(rng.integers(1, 4)), 1.0)
    cons = [posy(int(rng.integers(1, 4)), rng.uniform(0.3, 0.9)) for _ in range(int(rng.integers(0, 9)))]
    bounds = {n: (math.exp(-BOX), math.exp(BOX)) for n in names}
    return GeometricProgram(obj, cons, variables=names, variable_bounds=bounds), names


def _lse(p, names, Y):
    A, b = p.to_arrays({n: i for i, n in enumerate(names)})
    return logsumexp(Y @ A.T + b, axis=1)


def grid_refine(fun, nv, feasible=None, pts=3, max_iter=1500, tol=1e-10):
    """Pattern search on a 3^d log-space grid that grows on success and halves on failure."""
    center = np.zeros(nv)
    best = fun(center[None])[0]
    half = BOX
    for _ in range(max_iter):
        if half < tol:
            break
        axes = [np.clip(np.linspace(c - half, c + half, pts), -BOX, BOX) for c in center]
        Y = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, nv)
        val = fun(Y)
        if feasible is not None:
            val = np.where(feasible(Y), val, np.inf)
        k = int(np.argmin(val))
        if val[k] < best - 1e-15 * abs(best):
            best, center, half = val[k], Y[k], min(2 * half, BOX)
        else:
            half *= 0.5
    return best


def test_matches_grid_refinement_oracle():
    """Solver objective is bracketed by two brute-force grid searches.

    Upper: best feasible grid point of the log-space program. Lower: grid
    minimum over the box of the partial Lagrangian, which by weak duality
    bounds the optimum from below for any non-negative multipliers.
    """
    rng = np.random.default_rng(0)
    for _ in range(30):
        gp, names = random_gp(rng)
        sol = solve(gp)
        assert sol.optimal
        p = math.log(sol.objective_value)
        cons = gp.inequality_constraints
        lam = sol.duals[: len(cons)]

        def lagr(Y):
            v = _lse(gp.objective, names, Y)
            for li, c in zip(lam, cons):
                v = v + li * _lse(c, names, Y)
            return v

        def feas(Y):
            ok = np.ones(len(Y), bool)
            for c in cons:
                ok &= _lse(c, names, Y) <= 0
            return ok

        lower = grid_refine(lagr, len(names))
        upper = grid_refine(lambda Y: _lse(gp.objective, names, Y), len(names), feas, max_iter=300)
        assert p <= upper + 2e-8  # within the duality gap
        assert abs(math.exp(lower) - sol.objective_value) <= 1e-4 * sol.objective_value
