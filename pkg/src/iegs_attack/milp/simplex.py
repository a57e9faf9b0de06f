"""Dense bounded-variable primal simplex (two phases).

Every row becomes an equality with a bounded slack column, ``A x + s = b``;
``<=`` rows get ``s >= 0``, ``>=`` rows ``s <= 0`` and equalities ``s = 0``.
Rows whose starting residual cannot be absorbed by the slack get an
artificial column.  The tableau ``B^-1 [A | I | art]`` is kept dense with the
reduced-cost row appended as its last row.
"""

from __future__ import annotations

import os

import numpy as np

from .model import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, Model, Solution

if os.environ.get("IEGS_ATTACK_PURE_PYTHON") == "1":
    from . import _kernel_py as _kernel_mod
else:
    try:
        from . import _kernel as _kernel_mod  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        from . import _kernel_py as _kernel_mod

from . import _kernel_py

KERNEL = "cython" if _kernel_mod is not _kernel_py else "python"

AT_LOWER, AT_UPPER, FREE_ZERO, BASIC = 1, 2, 3, 0


def _kernel_for(name: str | None):
    if name is None:
        return _kernel_mod
    if name == "python":
        return _kernel_py
    if name == "cython":
        if KERNEL != "cython":
            raise RuntimeError("compiled simplex kernel is not available")
        return _kernel_mod
    raise ValueError(f"unknown kernel {name!r}")


def solve_lp(
    model: Model,
    lb: np.ndarray | None = None,
    ub: np.ndarray | None = None,
    tol: float = 1e-9,
    max_iter: int = 50_000,
    bland_after: int = 50,
    kernel: str | None = None,
) -> Solution:
    """Solve the continuous relaxation of ``model``.

    ``lb``/``ub`` override the model bounds (used by branch and bound).
    Duals follow ``d(objective)/d(rhs)`` in the model's own sense.
    """
    run = _kernel_for(kernel).run_simplex
    c, A_sp, senses, b, mlb, mub, _ = model.arrays()
    lb = mlb if lb is None else np.asarray(lb, dtype=float)
    ub = mub if ub is None else np.asarray(ub, dtype=float)
    if np.any(lb > ub + 1e-12):
        return Solution(INFEASIBLE, backend="bundled")
    sign = -1.0 if model.maximize else 1.0
    cmin = sign * c
    A = A_sp.toarray()
    m, n = A.shape

    if m == 0:
        x = np.zeros(n)
        for j in range(n):
            if cmin[j] > 0:
                x[j] = lb[j]
            elif cmin[j] < 0:
                x[j] = ub[j]
            else:
                x[j] = lb[j] if np.isfinite(lb[j]) else (ub[j] if np.isfinite(ub[j]) else 0.0)
            if not np.isfinite(x[j]):
                return Solution(UNBOUNDED, backend="bundled")
        return Solution(
            OPTIMAL, x, model.objective_value(x), np.zeros(0), sign * cmin, backend="bundled"
        )

    slo = np.where(senses == ">=", -np.inf, 0.0)
    sup = np.where(senses == "<=", np.inf, 0.0)

    state = np.empty(n + m, dtype=np.int8)
    xval = np.zeros(n)
    for j in range(n):
        if np.isfinite(lb[j]):
            state[j], xval[j] = AT_LOWER, lb[j]
        elif np.isfinite(ub[j]):
            state[j], xval[j] = AT_UPPER, ub[j]
        else:
            state[j], xval[j] = FREE_ZERO, 0.0
    resid = b - A @ xval

    art_rows = []
    basis = np.empty(m, dtype=np.int64)
    rowsign = np.ones(m)
    for i in range(m):
        if slo[i] - 1e-12 <= resid[i] <= sup[i] + 1e-12:
            basis[i] = n + i
            state[n + i] = BASIC
        else:
            state[n + i] = AT_LOWER if senses[i] != ">=" else AT_UPPER
            art_rows.append(i)
            rowsign[i] = 1.0 if resid[i] > 0 else -1.0
    na = len(art_rows)
    ncol = n + m + na
    T = np.zeros((m + 1, ncol))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    for k, i in enumerate(art_rows):
        T[i, n + m + k] = rowsign[i]
        basis[i] = n + m + k
    T[:m] *= rowsign[:, None]
    xb = np.abs(resid).astype(float)
    for i in range(m):
        if basis[i] < n + m:
            xb[i] = resid[i]
    lo = np.concatenate([lb, slo, np.zeros(na)])
    up = np.concatenate([ub, sup, np.full(na, np.inf)])
    state = np.concatenate([state, np.full(na, BASIC, dtype=np.int8)])

    iters = 0
    if na:
        cost1 = np.zeros(ncol)
        cost1[n + m :] = 1.0
        T[m] = cost1 - cost1[basis] @ T[:m]
        st, it = run(T, basis, state, lo, up, xb, max_iter, tol, bland_after)
        iters += it
        if st == 2:
            return Solution(ITERATION_LIMIT, iterations=iters, backend="bundled")
        infeas = float(np.sum(xb[basis >= n + m]))
        scale = 1.0 + float(np.max(np.abs(b)))
        if infeas > 1e-8 * scale:
            return Solution(INFEASIBLE, iterations=iters, backend="bundled")
        up[n + m :] = 0.0
        for k in range(na):
            if state[n + m + k] != BASIC:
                state[n + m + k] = AT_LOWER

    cost2 = np.concatenate([cmin, np.zeros(m + na)])
    T[m] = cost2 - cost2[basis] @ T[:m]
    st, it = run(T, basis, state, lo, up, xb, max_iter - iters, tol, bland_after)
    iters += it
    if st == 1:
        return Solution(UNBOUNDED, iterations=iters, backend="bundled")
    if st == 2:
        return Solution(ITERATION_LIMIT, iterations=iters, backend="bundled")

    # recover a clean point and duals from the original columns
    full = np.zeros((m, ncol))
    full[:, :n] = A
    full[:, n : n + m] = np.eye(m)
    for k, i in enumerate(art_rows):
        full[i, n + m + k] = rowsign[i]
    vals = np.empty(ncol)
    for j in range(ncol):
        s = state[j]
        vals[j] = lo[j] if s == AT_LOWER else up[j] if s == AT_UPPER else 0.0
    B = full[:, basis]
    nb = np.ones(ncol, dtype=bool)
    nb[basis] = False
    try:
        xb_ref = np.linalg.solve(B, b - full[:, nb] @ vals[nb])
        y = np.linalg.solve(B.T, cost2[basis])
    except np.linalg.LinAlgError:
        xb_ref = xb.copy()
        y = np.linalg.lstsq(B.T, cost2[basis], rcond=None)[0]
    vals[basis] = xb_ref
    # snap basics that drifted a hair outside their bounds
    vals = np.minimum(np.maximum(vals, lo), up)
    x = vals[:n]
    reduced = cmin - A.T @ y
    return Solution(
        OPTIMAL,
        x,
        model.objective_value(x),
        sign * y,
        sign * reduced,
        iterations=iters,
        backend="bundled",
        info={"kernel": KERNEL if kernel is None else kernel},
    )
