"""Compare the compiled and pure-Python kernels.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel is timed on the same inputs under both backends and the
results are checked for agreement. Without a compiled build only the
Python timings are reported.
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from r0gp import _kernels
from r0gp.dataio import build_contact_matrix, calibrate_alpha, synth_mobility
from r0gp.epimod import SeirModel, seeded_state


def _best(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def rk4_case(n=5, steps=20000):
    mob = synth_mobility(n, seed=0)
    alpha = calibrate_alpha(mob, (0.1, 0.2, 0.1))
    m = SeirModel(0.1, 0.2, 0.1, build_contact_matrix(mob, alpha), mob.populations)
    y0 = seeded_state(m)
    args = (m.beta, m.gamma, m.delta, np.ascontiguousarray(m.A), y0, 0.05, steps, 0.0, 1e-6)
    return args


def lse_case(segments=200, width=20, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.normal(scale=5.0, size=segments * width)
    starts = np.arange(0, segments * width + 1, width, dtype=np.int64)
    return z, starts


def run(repeat=5):
    report = {"backend": _kernels.BACKEND, "cases": []}
    backends = {"python": _kernels.python_backend}
    if _kernels.compiled_backend is not None:
        backends["cython"] = _kernels.compiled_backend

    cases = [
        ("rk4_seir n=5, 20000 steps", "rk4_seir", rk4_case(5, 20000), 1),
        ("rk4_seir n=20, 5000 steps", "rk4_seir", rk4_case(20, 5000), 1),
        ("segment_lse 200x20", "segment_lse", lse_case(), 200),
    ]
    for label, name, args, inner in cases:
        row = {"case": label}
        outs = {}
        for bname, mod in backends.items():
            fn = getattr(mod, name)

            def call(fn=fn):
                for _ in range(inner):
                    r = fn(*args)
                return r

            t, out = _best(call, repeat)
            row[f"{bname}_s"] = t / inner
            outs[bname] = out[0]
        if len(outs) == 2:
            a, b = outs["python"], outs["cython"]
            row["max_abs_diff"] = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
            row["speedup"] = row["python_s"] / row["cython_s"]
        report["cases"].append(row)
    return report


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--json", help="write the report to this file")
    a = p.parse_args(argv)
    rep = run(a.repeat)
    print(f"active backend: {rep['backend']}")
    for row in rep["cases"]:
        line = f"{row['case']:<28} python {row['python_s'] * 1e3:9.3f} ms"
        if "cython_s" in row:
            line += f"   cython {row['cython_s'] * 1e3:9.3f} ms   x{row['speedup']:7.1f}   diff {row['max_abs_diff']:.1e}"
        print(line)
    if a.json:
        with open(a.json, "w") as fh:
            json.dump(rep, fh, indent=2)


if __name__ == "__main__":
    main()
