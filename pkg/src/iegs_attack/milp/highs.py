"""HiGHS backend through scipy.optimize (linprog for LPs, milp for MILPs).

HiGHS is re-entrant, so distinct models may be solved concurrently.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .model import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, Model, Solution

CONCURRENT_SAFE = True


def solve_lp_highs(model: Model, lb=None, ub=None) -> Solution:
    c, A, senses, b, mlb, mub, _ = model.arrays()
    lb = mlb if lb is None else lb
    ub = mub if ub is None else ub
    sign = -1.0 if model.maximize else 1.0
    le = np.flatnonzero(senses == "<=")
    ge = np.flatnonzero(senses == ">=")
    eq = np.flatnonzero(senses == "==")
    A = A.tocsr()
    ub_rows = np.concatenate([le, ge])
    A_ub = A[ub_rows] if ub_rows.size else None
    if A_ub is not None and ge.size:
        scale = np.concatenate([np.ones(le.size), -np.ones(ge.size)])
        A_ub = A_ub.multiply(scale[:, None]).tocsr()
    b_ub = np.concatenate([b[le], -b[ge]]) if ub_rows.size else None
    res = linprog(
        sign * c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A[eq] if eq.size else None,
        b_eq=b[eq] if eq.size else None,
        bounds=np.column_stack([lb, ub]) if len(lb) else None,
        method="highs",
        options={"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9},
    )
    if res.status == 2:
        return Solution(INFEASIBLE, backend="highs")
    if res.status == 3:
        return Solution(UNBOUNDED, backend="highs")
    if res.status != 0:
        return Solution(ITERATION_LIMIT, backend="highs", info={"message": res.message})
    duals = np.zeros(model.n_rows)
    if ub_rows.size:
        m = res.ineqlin.marginals
        duals[le] = m[: le.size]
        duals[ge] = -m[le.size :]
    if eq.size:
        duals[eq] = res.eqlin.marginals
    x = res.x
    duals = sign * duals
    reduced = c - A.T @ duals
    return Solution(
        OPTIMAL,
        x,
        model.objective_value(x),
        duals,
        reduced,
        iterations=int(getattr(res, "nit", 0)),
        backend="highs",
    )


def solve_milp_highs(model: Model, gap: float = 1e-9, time_limit: float | None = None, max_nodes=None) -> Solution:
    c, A, senses, b, lb, ub, binary = model.arrays()
    sign = -1.0 if model.maximize else 1.0
    lo = np.where(senses == "<=", -np.inf, b)
    hi = np.where(senses == ">=", np.inf, b)
    options = {"mip_rel_gap": gap, "presolve": True}
    if time_limit is not None:
        options["time_limit"] = time_limit
    if max_nodes is not None:
        options["node_limit"] = int(max_nodes)
    cons = [LinearConstraint(A, lo, hi)] if model.n_rows else []
    res = milp(
        sign * c,
        constraints=cons,
        integrality=binary.astype(int),
        bounds=Bounds(lb, ub),
        options=options,
    )
    if res.status == 2:
        return Solution(INFEASIBLE, backend="highs")
    if res.status == 3:
        return Solution(UNBOUNDED, backend="highs")
    if res.x is None:
        return Solution(ITERATION_LIMIT if res.status == 1 else INFEASIBLE, backend="highs",
                        info={"message": res.message})
    x = np.array(res.x)
    x[binary] = np.round(x[binary])
    status = OPTIMAL if res.status == 0 else ITERATION_LIMIT
    bound = getattr(res, "mip_dual_bound", None)
    return Solution(
        status,
        x,
        model.objective_value(x),
        nodes=int(getattr(res, "mip_node_count", 0) or 0),
        bound=float(sign * bound) if bound is not None else float("nan"),
        backend="highs",
    )
