"""Compare the compiled and pure-Python simplex kernels.

Usage: python3 benchmarks/bench_simplex.py [--repeat N] [--csv PATH]

Each case is solved with both kernels; objectives must agree and the table
reports the median wall time and the speed-up of the compiled kernel.
"""

import argparse
import csv
import sys
import time

import numpy as np

from iegs_attack.bilevel import PoolEntry, RDParams, build_master
from iegs_attack.instance import bundled_fixture
from iegs_attack.milp import KERNEL, Model
from iegs_attack.milp.compact import compact_for
from iegs_attack.milp.simplex import solve_lp


def random_lp(seed: int, n: int, m: int) -> Model:
    rng = np.random.default_rng(seed)
    mod = Model(f"random-{n}x{m}")
    x = mod.add_vars("x", n, lb=0.0, ub=10.0)
    mod.add_rows(rng.uniform(0, 1, (m, n)), x, "<=", rng.uniform(n / 4, n / 2, m))
    mod.set_objective(x, rng.uniform(0, 1, n), maximize=True)
    return mod


def cases():
    out = [("random 40x30", random_lp(1, 40, 30)), ("random 120x80", random_lp(2, 120, 80))]
    for name in ("two-bus", "mini-iegs"):
        cb = compact_for(bundled_fixture(name))
        out.append((f"{name} operator LP", cb.lower_lp(cb.pad_x(np.zeros(cb.n_base)), cb.all_z()[-1])))
        zs = cb.possible_z()
        pool = [PoolEntry(zs[1], "mu", 0.0), PoolEntry(zs[-1], "nu", 1.0)]
        # rho well above every operator dual keeps the penalized block feasible
        mp = build_master(cb, pool, RDParams(rho=1e4))
        out.append((f"{name} master relaxation", mp.model))
    return out


def timed(model, kernel, repeat):
    times, obj = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        sol = solve_lp(model, kernel=kernel)
        times.append(time.perf_counter() - t0)
        obj = sol.objective
    return float(np.median(times)), obj


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--csv", help="also write the table to this file")
    args = ap.parse_args(argv)
    if KERNEL != "cython":
        print("compiled kernel not built; reinstall with Cython available", file=sys.stderr)
        return 1
    rows = []
    for name, model in cases():
        tc, oc = timed(model, "cython", args.repeat)
        tp, op = timed(model, "python", args.repeat)
        if not np.isclose(oc, op, rtol=1e-9, atol=1e-9):
            print(f"{name}: objectives differ ({oc} vs {op})", file=sys.stderr)
            return 1
        rows.append((name, model.n_rows, model.n_vars, tc, tp, tp / tc))
    header = ("case", "rows", "cols", "compiled_s", "python_s", "speedup")
    print(f"{header[0]:<28}{header[1]:>6}{header[2]:>6}{header[3]:>12}{header[4]:>12}{header[5]:>9}")
    for r in rows:
        print(f"{r[0]:<28}{r[1]:>6}{r[2]:>6}{r[3]:>12.5f}{r[4]:>12.5f}{r[5]:>8.1f}x")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
