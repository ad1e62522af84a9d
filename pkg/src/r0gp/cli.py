"""Command-line front end: ``r0gp <subcommand> [options]``.

Every subcommand accepts ``--config file.json``; keys are option names with
underscores (``r_max``, ``t_max``, ...) and explicit flags take precedence.
Errors are reported as one JSON object on stderr and mapped to exit codes
0 (success), 2 (infeasible), 3 (solver failure) and 4 (bad input).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__, matca
from .alloc import (
    PharmaBounds,
    ResourceModel,
    build_pharma_model,
    r0_of_theta,
    solve_abscissa_budget,
    solve_budget_constrained,
    solve_r0_constrained,
)
from .dataio import (
    MobilityData,
    SweepSpec,
    build_contact_matrix,
    calibrate_alpha,
    generate_sweep,
    load_mobility,
    synth_mobility,
)
from .epimod import SeirModel, simulate, trajectory_metrics
from .errors import ContractError, InfeasibleError, R0GPError
from .gpsolve import SolverOptions
from .r0core import LinearizedEpidemic, r0_all

EXIT_OK, EXIT_INFEASIBLE, EXIT_SOLVER, EXIT_INPUT = 0, 2, 3, 4

#: Named rate triples ``(beta, gamma, delta)`` for budget curves.
NAMED_TRIPLES = {
    "low": (0.05, 0.2, 0.2),
    "mid": (0.1, 0.2, 0.1),
    "high": (0.15, 0.2, 0.075),
}
DEFAULT_BUDGETS = (0.05, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0)
CALIBRATION_RATES = (0.1, 0.2, 0.1)

SWEEP_COLUMNS = [
    "model_id", "beta", "gamma", "delta", "r0_pre", "abscissa_pre",
    "r0_r0min", "r0_absmin", "abscissa_r0min", "abscissa_absmin",
    "peak_r0min", "peak_absmin", "cumulative_r0min", "cumulative_absmin",
    "vaccine_r0min", "antidote_r0min", "vaccine_absmin", "antidote_absmin",
    "converged_r0min", "converged_absmin",
]
CURVE_COLUMNS = [
    "triple", "beta", "gamma", "delta", "budget",
    "r0_r0min", "r0_absmin", "abscissa_r0min", "abscissa_absmin",
    "vaccine_r0min", "antidote_r0min", "vaccine_absmin", "antidote_absmin",
    "vaccine_share_r0min", "vaccine_share_absmin",
]


# ---------------------------------------------------------------------------
# model loading
# ---------------------------------------------------------------------------


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _mobility_from_spec(spec):
    if "mobility_csv" in spec:
        return load_mobility(spec["mobility_csv"], spec["populations_csv"])
    return synth_mobility(int(spec.get("n", 5)), int(spec.get("seed", 0)), spec.get("mobility", "gravity"))


def _alpha_from_spec(spec, mob):
    if "alpha" in spec:
        return float(spec["alpha"])
    cal = spec.get("calibrate", {})
    return calibrate_alpha(mob, tuple(cal.get("rates", CALIBRATION_RATES)), target_r0=float(cal.get("target_r0", 2.5)))


def load_model(spec):
    """Model from a JSON document (dict) or path.

    ``kind`` is ``linear`` (``F``, ``V`` matrices or ``F_csv``/``V_csv``
    paths), ``seir`` (``beta``, ``gamma``, ``delta``, ``A``, ``s0``) or
    ``synthetic`` (``n``, ``seed``, ``rates``, optional ``alpha`` or
    ``calibrate``). Returns a :class:`LinearizedEpidemic` or a
    :class:`SeirModel`.
    """
    if isinstance(spec, str):
        spec = _load_json(spec)
    kind = spec.get("kind")
    if kind == "linear":
        F = matca.read_matrix_csv(spec["F_csv"]) if "F_csv" in spec else spec["F"]
        V = matca.read_matrix_csv(spec["V_csv"]) if "V_csv" in spec else spec["V"]
        return LinearizedEpidemic(np.asarray(F, float), np.asarray(V, float))
    if kind == "seir":
        A = matca.read_matrix_csv(spec["A_csv"]) if "A_csv" in spec else spec["A"]
        return SeirModel(spec["beta"], spec["gamma"], spec["delta"], A, spec["s0"])
    if kind == "synthetic":
        mob = _mobility_from_spec(spec)
        alpha = _alpha_from_spec(spec, mob)
        b, g, d = spec.get("rates", CALIBRATION_RATES)
        return SeirModel(b, g, d, build_contact_matrix(mob, alpha), mob.populations)
    raise ContractError(f"unknown model kind {kind!r}; expected linear, seir or synthetic")


def _resource_model(model, spec):
    if isinstance(model, LinearizedEpidemic):
        return ResourceModel.constant_model(model.F, model.V)
    iv = spec.get("intervention") if isinstance(spec, dict) else None
    bounds = PharmaBounds(**iv) if iv else None
    return build_pharma_model(model, bounds)


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------


def _num(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_csv(path, columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([row[c] if isinstance(row[c], str) else _num(row[c]) for c in columns])
    if path in (None, "-"):
        sys.stdout.write(buf.getvalue())
    else:
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())


def compare_allocations(seir: SeirModel, budget: float, dt=0.05, t_max=5000.0, simulate_runs=True):
    """R0-minimizing and abscissa-minimizing allocations of one model, side by side."""
    pm = build_pharma_model(seir, c_max=budget)
    out = {"r0_pre": seir.r0(), "abscissa_pre": matca.spectral_abscissa(seir.jacobian())}
    for tag, solver in (("r0min", solve_budget_constrained), ("absmin", solve_abscissa_budget)):
        res = solver(pm, budget)
        if not res.optimal:
            raise InfeasibleError(f"{tag} allocation reported {res.status}")
        post = pm.post_intervention(res.theta_star)
        F, V = pm.instantiate(res.theta_star)
        vac, anti = pm.spending(res.theta_star)
        out[f"r0_{tag}"] = r0_of_theta(pm, res.theta_star)
        out[f"abscissa_{tag}"] = matca.spectral_abscissa(F + V)
        out[f"vaccine_{tag}"] = vac
        out[f"antidote_{tag}"] = anti
        out[f"kkt_{tag}"] = res.solver_stats.get("kkt_residual", 0.0)
        if simulate_runs:
            traj = simulate(post, dt=dt, t_max=t_max)
            met = trajectory_metrics(traj)
            pop = traj.total_population
            out[f"peak_{tag}"] = met.peak_infections
            out[f"cumulative_{tag}"] = met.cumulative_infections
            out[f"converged_{tag}"] = traj.converged
            out[f"conservation_{tag}"] = float(np.max(np.abs(pop / pop[0] - 1)))
    return out


def _sweep_task(args):
    idx, (b, g, d), A, s0, budget, dt, t_max = args
    row = {"model_id": idx, "beta": b, "gamma": g, "delta": d}
    row.update(compare_allocations(SeirModel(b, g, d, A, s0), budget, dt, t_max))
    return row


def sweep_rows(mob: MobilityData, alpha: float, triples, budget=0.1, workers=1, dt=0.05, t_max=5000.0):
    """One comparison row per rate triple, in input order."""
    A = build_contact_matrix(mob, alpha)
    tasks = [(i, tuple(t), A, mob.populations, budget, dt, t_max) for i, t in enumerate(triples)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_sweep_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [_sweep_task(t) for t in tasks]


def summarize_sweep(rows, tie_rtol=1e-6):
    """Compare the two allocations across sweep rows.

    A model counts as a win for the R0-minimizing allocation only when its
    peak (or cumulative) infection count is lower by more than ``tie_rtol``
    relative; differences inside that band are ties. Fractions are wins over
    all models in the group, so ties never count toward a majority.
    """
    both = [r for r in rows if r["r0_r0min"] > 1 and r["r0_absmin"] > 1]
    rest = [r for r in rows if not (r["r0_r0min"] > 1 and r["r0_absmin"] > 1)]

    def tally(rs, key):
        won = tied = lost = 0
        for r in rs:
            a, b = r[f"{key}_r0min"], r[f"{key}_absmin"]
            d = (b - a) / max(abs(a), abs(b), 1e-300)
            if d > tie_rtol:
                won += 1
            elif d < -tie_rtol:
                lost += 1
            else:
                tied += 1
        return won, tied, lost

    out = {"models": len(rows), "both_above_one": len(both), "tie_rtol": tie_rtol}
    for name, rs, key in (("peak", both, "peak"), ("cumulative", both, "cumulative"),
                          ("other_cumulative", rest, "cumulative")):
        won, tied, lost = tally(rs, key)
        out[f"{name}_fraction"] = won / len(rs) if rs else math.nan
        out[f"{name}_wins_ties_losses"] = [won, tied, lost]
    return out


def budget_curve_rows(mob: MobilityData, alpha: float, triples=None, budgets=DEFAULT_BUDGETS):
    """Allocation spending of both methods across a budget grid for named triples."""
    triples = NAMED_TRIPLES if triples is None else triples
    A = build_contact_matrix(mob, alpha)
    rows = []
    for name, (b, g, d) in triples.items():
        seir = SeirModel(b, g, d, A, mob.populations)
        for c in budgets:
            res = compare_allocations(seir, float(c), simulate_runs=False)
            row = {"triple": name, "beta": b, "gamma": g, "delta": d, "budget": float(c)}
            row.update(res)
            for tag in ("r0min", "absmin"):
                spent = row[f"vaccine_{tag}"] + row[f"antidote_{tag}"]
                row[f"vaccine_share_{tag}"] = row[f"vaccine_{tag}"] / spent if spent > 0 else math.nan
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _emit(doc, path=None):
    text = json.dumps(doc, indent=2, sort_keys=True)
    if path in (None, "-"):
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _model_arg(a):
    if a.model is not None:
        spec = a.model if isinstance(a.model, dict) else _load_json(a.model)
        return load_model(spec), spec
    if a.F is not None and a.V is not None:
        spec = {"kind": "linear", "F_csv": a.F, "V_csv": a.V}
        return load_model(spec), spec
    raise ContractError("a model is required: --model file.json or --F/--V CSV files")


def _solver_opts(a):
    kw = {}
    if a.gap is not None:
        kw["duality_gap"] = float(a.gap)
    if a.max_iterations is not None:
        kw["max_iterations"] = int(a.max_iterations)
    return SolverOptions(**kw)


def cmd_r0(a):
    model, _ = _model_arg(a)
    lin = model.linearize() if isinstance(model, SeirModel) else model
    methods = ("eigen", "bisect", "gp") if a.method in (None, "all") else (a.method,)
    vals = r0_all(lin, methods, _solver_opts(a))
    spread = max(vals.values()) - min(vals.values())
    ref = max(abs(v) for v in vals.values())
    _emit({"r0": vals, "max_relative_spread": spread / ref if ref > 0 else 0.0}, a.out)
    return EXIT_OK


def cmd_allocate(a):
    model, spec = _model_arg(a)
    if (a.budget is None) == (a.r_max is None):
        raise ContractError("give exactly one of --budget or --r-max")
    rm = _resource_model(model, spec)
    opts = _solver_opts(a)
    if a.budget is not None:
        if a.objective == "abscissa":
            res = solve_abscissa_budget(rm, float(a.budget), a.shift, opts)
        else:
            res = solve_budget_constrained(rm, float(a.budget), opts)
    else:
        res = solve_r0_constrained(rm, float(a.r_max), float(a.tau or 0.0), opts, retry=not a.no_retry)
    doc = res.to_dict()
    if res.optimal and hasattr(rm, "spending") and rm.seir is not None:
        vac, anti = rm.spending(res.theta_star)
        doc["spending"] = {"vaccine": vac, "antidote": anti}
    _emit(doc, a.out)
    return EXIT_OK if res.optimal else EXIT_INFEASIBLE


def cmd_simulate(a):
    model, spec = _model_arg(a)
    if not isinstance(model, SeirModel):
        raise ContractError("simulate needs a seir or synthetic model")
    if a.theta is not None:
        theta = _load_json(a.theta)
        theta = theta.get("theta_star", theta)
        model = _resource_model(model, spec).post_intervention(theta)
    traj = simulate(model, dt=float(a.dt or 0.05), t_max=float(a.t_max or 5000.0))
    if a.trajectory:
        traj.to_csv(a.trajectory, stride=int(a.stride or 1))
    met = trajectory_metrics(traj)
    _emit({
        "peak_infections": met.peak_infections,
        "cumulative_infections": met.cumulative_infections,
        "peak_time": met.peak_time,
        "converged": traj.converged,
        "provisional": met.provisional,
        "r0": model.r0(),
        "t_end": float(traj.times[-1]),
    }, a.out)
    return EXIT_OK


def _mobility_args(a):
    if a.mobility is not None:
        if a.populations is None:
            raise ContractError("--mobility needs --populations")
        return load_mobility(a.mobility, a.populations)
    return synth_mobility(int(a.n if a.n is not None else 5), int(a.seed or 0), a.kind or "gravity")


def cmd_calibrate(a):
    mob = _mobility_args(a)
    rates = tuple(a.rates) if a.rates else CALIBRATION_RATES
    target = float(a.target if a.target is not None else 2.5)
    alpha = calibrate_alpha(mob, rates, target_r0=target)
    achieved = SeirModel(*rates, build_contact_matrix(mob, alpha), mob.populations).r0()
    _emit({"alpha": alpha, "target_r0": target, "achieved_r0": achieved, "rates": list(rates), "n": mob.n}, a.out)
    return EXIT_OK


def _grid(v, default):
    if v is None:
        return default
    lo, hi, k = v
    return (float(lo), float(hi), int(k))


def cmd_sweep(a):
    mob = _mobility_args(a)
    alpha = calibrate_alpha(mob, CALIBRATION_RATES, target_r0=float(a.target if a.target is not None else 2.5))
    spec = SweepSpec.linear(_grid(a.beta, (0.025, 0.5, 20)), _grid(a.gamma, (0.05, 0.5, 10)),
                            _grid(a.delta, (0.05, 0.5, 10)))
    rows = sweep_rows(mob, alpha, generate_sweep(spec), float(a.budget if a.budget is not None else 0.1),
                      int(a.workers or 1), float(a.dt or 0.05), float(a.t_max or 5000.0))
    _write_csv(a.out, SWEEP_COLUMNS, rows)
    summary = summarize_sweep(rows)
    summary["alpha"] = alpha
    print(json.dumps(summary, sort_keys=True), file=sys.stderr if a.out in (None, "-") else sys.stdout)
    return EXIT_OK


def cmd_budget_curve(a):
    mob = _mobility_args(a)
    alpha = calibrate_alpha(mob, CALIBRATION_RATES, target_r0=float(a.target if a.target is not None else 2.5))
    names = a.triples or list(NAMED_TRIPLES)
    unknown = [t for t in names if t not in NAMED_TRIPLES]
    if unknown:
        raise ContractError(f"unknown triples {unknown}; choose from {list(NAMED_TRIPLES)}")
    budgets = [float(b) for b in a.budgets] if a.budgets else DEFAULT_BUDGETS
    rows = budget_curve_rows(mob, alpha, {t: NAMED_TRIPLES[t] for t in names}, budgets)
    _write_csv(a.out, CURVE_COLUMNS, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _common(p):
    p.add_argument("--config", help="JSON file with default option values")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--gap", type=float, help="GP duality-gap tolerance")
    p.add_argument("--max-iterations", type=int, help="GP Newton step limit")


def _model_opts(p):
    p.add_argument("--model", help="model JSON (kind linear, seir or synthetic)")
    p.add_argument("--F", help="CSV of F (with --V)")
    p.add_argument("--V", help="CSV of V (with --F)")


def _mobility_opts(p):
    p.add_argument("--n", type=int, help="groups in the synthetic mobility model (default 5)")
    p.add_argument("--seed", type=int, help="seed of the synthetic mobility model (default 0)")
    p.add_argument("--kind", choices=["gravity", "uniform-noise"], help="synthetic mobility generator")
    p.add_argument("--mobility", help="CSV of visit fractions P (instead of synthetic)")
    p.add_argument("--populations", help="CSV of group populations (with --mobility)")
    p.add_argument("--target", type=float, help="calibration target R0 (default 2.5)")


def build_parser():
    parser = argparse.ArgumentParser(prog="r0gp", description="R0 computation and resource allocation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("r0", help="R0 by eigenvalue, bisection and/or geometric program")
    _common(p)
    _model_opts(p)
    p.add_argument("--method", choices=["eigen", "bisect", "gp", "all"])
    p.set_defaults(func=cmd_r0)

    p = sub.add_parser("allocate", help="R0-constrained, budget-constrained or abscissa allocation")
    _common(p)
    _model_opts(p)
    p.add_argument("--budget", type=float)
    p.add_argument("--r-max", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--no-retry", action="store_const", const=True,
                   help="report infeasibility at the given tau instead of relaxing it")
    p.add_argument("--objective", choices=["r0", "abscissa"])
    p.add_argument("--shift", type=float, help="diagonal shift for the abscissa program")
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("simulate", help="integrate the SEIR dynamics, optionally after an allocation")
    _common(p)
    _model_opts(p)
    p.add_argument("--theta", help="allocation JSON whose theta_star is applied")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--trajectory", help="trajectory CSV path")
    p.add_argument("--stride", type=int, help="write every k-th time step")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="contact scale alpha for a target R0")
    _common(p)
    _mobility_opts(p)
    p.add_argument("--rates", type=float, nargs=3, metavar=("BETA", "GAMMA", "DELTA"))
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sweep", help="compare R0- and abscissa-minimizing allocations over a rate grid")
    _common(p)
    _mobility_opts(p)
    for name in ("beta", "gamma", "delta"):
        p.add_argument(f"--{name}", type=float, nargs=3, metavar=("LO", "HI", "COUNT"))
    p.add_argument("--budget", type=float, help="budget c_max (default 0.1)")
    p.add_argument("--workers", type=int, help="worker processes (default 1)")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-max", type=float)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("budget-curve", help="spending split of both methods across budgets")
    _common(p)
    _mobility_opts(p)
    p.add_argument("--triples", nargs="+", help=f"named rate triples among {list(NAMED_TRIPLES)}")
    p.add_argument("--budgets", type=float, nargs="+")
    p.set_defaults(func=cmd_budget_curve)
    return parser


def _apply_config(args):
    if not getattr(args, "config", None):
        return args
    cfg = _load_json(args.config)
    if not isinstance(cfg, dict):
        raise ContractError("config must be a JSON object")
    for key, value in cfg.items():
        key = key.replace("-", "_")
        if key in ("func", "command", "config"):
            continue
        if not hasattr(args, key):
            raise ContractError(f"unknown config key {key!r} for {args.command}")
        if getattr(args, key) is None:
            setattr(args, key, value)
    return args


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        return args.func(args)
    except R0GPError as exc:
        code = exc.exit_code
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        code = EXIT_INPUT
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(err), file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
