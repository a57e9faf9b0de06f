"""Best-first branch and bound over binary columns."""

from __future__ import annotations

import heapq
import itertools

import numpy as np

from .model import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, Model, Solution
from .simplex import solve_lp

INT_TOL = 1e-6


def _branch_column(x: np.ndarray, cols: np.ndarray) -> int:
    """Most fractional binary; ties go to the lowest column index."""
    frac = x[cols] - np.floor(x[cols])
    score = np.minimum(frac, 1.0 - frac)
    best = float(np.max(score)) if cols.size else 0.0
    if best <= INT_TOL:
        return -1
    return int(cols[np.flatnonzero(score >= best - 1e-12)[0]])


def solve_milp(
    model: Model,
    gap: float = 1e-9,
    max_nodes: int = 200_000,
    max_iter: int = 50_000,
    kernel: str | None = None,
) -> Solution:
    """Exact best-first branch and bound.

    Until the first incumbent is found the search plunges depth-first; after
    that the open node with the best bound is expanded.  ``gap`` is relative
    to ``1 + |incumbent|``.
    """
    sense = -1.0 if model.maximize else 1.0
    lb0 = np.array(model.lb, dtype=float)
    ub0 = np.array(model.ub, dtype=float)
    bins = np.flatnonzero(np.array(model.binary, dtype=bool))

    counter = itertools.count()
    root = solve_lp(model, lb0, ub0, max_iter=max_iter, kernel=kernel)
    total_iter = root.iterations
    if root.status in (INFEASIBLE, UNBOUNDED, ITERATION_LIMIT):
        root.backend = "bundled"
        return root

    best_x = None
    best_obj = np.inf  # minimisation form
    open_nodes: list = []
    heapq.heappush(open_nodes, (sense * root.objective, 0, next(counter), lb0, ub0, root))
    nodes = 0
    while open_nodes:
        if best_x is None:
            # plunge: deepest, then most recent
            k = max(range(len(open_nodes)), key=lambda i: (open_nodes[i][1], open_nodes[i][2]))
            node = open_nodes.pop(k)
            heapq.heapify(open_nodes)
        else:
            node = heapq.heappop(open_nodes)
        bound, depth, _, lb, ub, sol = node
        if bound >= best_obj - gap * (1.0 + abs(best_obj)):
            continue
        nodes += 1
        if nodes > max_nodes:
            open_nodes.append(node)
            break
        j = _branch_column(sol.x, bins)
        if j < 0:
            fixed_lb, fixed_ub = lb.copy(), ub.copy()
            r = np.round(sol.x[bins])
            fixed_lb[bins] = r
            fixed_ub[bins] = r
            clean = solve_lp(model, fixed_lb, fixed_ub, max_iter=max_iter, kernel=kernel)
            total_iter += clean.iterations
            cand = clean if clean.status == OPTIMAL else sol
            val = sense * cand.objective
            if val < best_obj:
                best_obj = val
                best_x = cand.x.copy()
                best_x[bins] = r
            continue
        for v in (0.0, 1.0) if sol.x[j] < 0.5 else (1.0, 0.0):
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = v
            child = solve_lp(model, clb, cub, max_iter=max_iter, kernel=kernel)
            total_iter += child.iterations
            if child.status != OPTIMAL:
                continue
            cb = sense * child.objective
            if cb >= best_obj - gap * (1.0 + abs(best_obj)):
                continue
            heapq.heappush(open_nodes, (cb, depth + 1, next(counter), clb, cub, child))

    remaining = min((n[0] for n in open_nodes), default=np.inf)
    if best_x is None:
        status = ITERATION_LIMIT if open_nodes else INFEASIBLE
        return Solution(status, iterations=total_iter, nodes=nodes, backend="bundled")
    status = ITERATION_LIMIT if open_nodes and remaining < best_obj - gap * (1.0 + abs(best_obj)) else OPTIMAL
    bound = min(remaining, best_obj)
    return Solution(
        status,
        best_x,
        model.objective_value(best_x),
        iterations=total_iter,
        nodes=nodes,
        bound=sense * bound,
        backend="bundled",
    )
