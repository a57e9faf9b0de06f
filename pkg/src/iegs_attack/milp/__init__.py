"""Optimization kit: model builder, bundled simplex / branch and bound, HiGHS backend,
compact bilevel assembly and duality helpers."""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    INFEASIBLE,
    ITERATION_LIMIT,
    OPTIMAL,
    UNBOUNDED,
    Model,
    ModelError,
    Solution,
    dual_objective,
)
from .simplex import KERNEL, solve_lp

BACKENDS = ("bundled", "highs")


@dataclass(frozen=True)
class SolveParams:
    backend: str = "bundled"
    gap: float = 1e-9
    max_nodes: int = 200_000
    max_iter: int = 50_000
    time_limit: float | None = None


def solve(model: Model, params: SolveParams | None = None, **overrides) -> Solution:
    """Solve an LP or MILP with the configured backend.

    Infeasible / unbounded / capped runs are reported through
    ``Solution.status``; nothing is silently defaulted.
    """
    if params is None:
        params = SolveParams(**overrides)
    elif overrides:
        params = SolveParams(**{**params.__dict__, **overrides})
    if params.backend == "bundled":
        if model.is_mip():
            from .bnb import solve_milp

            return solve_milp(model, gap=params.gap, max_nodes=params.max_nodes, max_iter=params.max_iter)
        return solve_lp(model, max_iter=params.max_iter)
    if params.backend == "highs":
        from .highs import solve_lp_highs, solve_milp_highs

        if model.is_mip():
            return solve_milp_highs(model, gap=params.gap, time_limit=params.time_limit, max_nodes=None)
        return solve_lp_highs(model)
    raise ValueError(f"unknown backend {params.backend!r}; choose from {BACKENDS}")


__all__ = [
    "BACKENDS",
    "INFEASIBLE",
    "ITERATION_LIMIT",
    "KERNEL",
    "Model",
    "ModelError",
    "OPTIMAL",
    "Solution",
    "SolveParams",
    "UNBOUNDED",
    "dual_objective",
    "solve",
    "solve_lp",
]
