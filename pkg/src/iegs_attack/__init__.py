"""Worst-case stealthy load redistribution attacks on integrated electricity-gas
systems, with an operator that re-commits units in response."""

__version__ = "0.1.0"

from .bilevel import (  # noqa: E402
    RDParams,
    SolveReport,
    build_master,
    solve_kkt_r,
    solve_model4,
    solve_om,
    solve_sp1,
    solve_sp2,
    solve_urd,
)
from .instance import IEGSInstance, bundled_fixture, load_instance, validate  # noqa: E402
from .milp.compact import CompactBilevel, assemble_compact, compact_for  # noqa: E402
from .oracle import brute_force_bilevel, classify_z, evaluate_dispatch, evaluate_realized_cost  # noqa: E402
from .stealth import AttackVector, attack_region, derive_falsified  # noqa: E402

__all__ = [
    "AttackVector",
    "CompactBilevel",
    "IEGSInstance",
    "RDParams",
    "SolveReport",
    "assemble_compact",
    "attack_region",
    "brute_force_bilevel",
    "build_master",
    "bundled_fixture",
    "classify_z",
    "compact_for",
    "derive_falsified",
    "evaluate_dispatch",
    "evaluate_realized_cost",
    "load_instance",
    "solve_kkt_r",
    "solve_model4",
    "solve_om",
    "solve_sp1",
    "solve_sp2",
    "solve_urd",
    "validate",
]
