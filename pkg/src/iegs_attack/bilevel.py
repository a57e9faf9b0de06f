"""Worst-case load-redistribution attack against an operator that re-commits units.

The attacker maximizes the operator's optimal cost ``c'y`` over the attack
region; the operator answers with a dispatch MILP (commitment ``z`` binary).
The main solver is a column-and-constraint generation loop:

* the master problem (MP) holds one optimality block per commitment vector
  seen so far and gives an upper bound,
* SP1 evaluates the operator MILP at the master's attack, giving a lower bound,
* SP2 decides whether a commitment is dispatchable for every attack; if so
  its block is an exact KKT system, otherwise a penalized relaxation whose
  slack absorbs infeasibility.

Also here: the monolithic enumerated reformulation (KKT-R), the fixed-commitment
baseline, and the loop variant that skips SP2 (U-R&D).
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .milp import SolveParams, solve
from .milp.compact import CompactBilevel
from .milp.duality import (
    AUDIT_TOL,
    ComplementarityPair,
    KKTBlock,
    add_kkt_block,
    audit_pairs,
    equality_row_pairs,
    linearize_complementarity,
    row_slack_bounds,
)
from .milp.model import Model

CONVERGED = "converged"
ITERATION_LIMIT = "iteration-limit"
MP_INFEASIBLE = "mp-infeasible"
STALLED = "stalled"

LOG_FIELDS = ("k", "epoch", "ub", "lb", "mp_value", "sp1_value", "z", "gamma_f", "classification", "rho", "seconds")


class RDError(RuntimeError):
    """Modeling error inside the decomposition (should not happen on valid input)."""


class CapError(ValueError):
    """Enumeration refused because the commitment dimension is too large."""


@dataclass
class RDParams:
    rho: float = 30.0
    big_m: float = 1e2
    big_m_cap: float = 1e6
    epsilon: float = 1e-4
    max_iter: int = 100
    backend: str = "bundled"
    gap: float = 1e-9
    max_nodes: int = 200_000
    rho_escalations: int = 4
    kkt_r_cap: int = 12
    time_limit: float | None = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not self.rho > 0 or not self.big_m > 0:
            raise ValueError("rho and big_m must be > 0")

    def solver(self) -> SolveParams:
        return SolveParams(backend=self.backend, gap=self.gap, max_nodes=self.max_nodes, time_limit=self.time_limit)


@dataclass
class PoolEntry:
    z: tuple[int, ...]
    kind: str  # "mu" or "nu"
    gamma_f: float


@dataclass
class RDState:
    k: int = 0
    epoch: int = 0
    lb: float = -np.inf
    ub: float = np.inf
    rho: float = 30.0
    pool: list[PoolEntry] = field(default_factory=list)
    log: list[dict] = field(default_factory=list)

    @property
    def mu_pool(self) -> list[tuple[int, ...]]:
        return [e.z for e in self.pool if e.kind == "mu"]

    @property
    def nu_pool(self) -> list[tuple[int, ...]]:
        return [e.z for e in self.pool if e.kind == "nu"]

    @property
    def k_mu(self) -> int:
        return len(self.mu_pool)

    @property
    def k_nu(self) -> int:
        return len(self.nu_pool)

    def seen(self, z) -> bool:
        return any(e.z == tuple(z) for e in self.pool)


@dataclass
class Diagnostics:
    big_m_hits: list[str] = field(default_factory=list)
    big_m_doubled: bool = False
    unsound: bool = False
    rho_flags: list[str] = field(default_factory=list)
    rho_final: float = 0.0
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "big_m_hits": list(self.big_m_hits),
            "big_m_doubled": self.big_m_doubled,
            "unsound": self.unsound,
            "rho_flags": list(self.rho_flags),
            "rho_final": float(self.rho_final),
            "notes": list(self.notes),
        }


@dataclass
class SolveReport:
    method: str
    status: str
    objective: float
    x: np.ndarray
    y: np.ndarray | None
    z: tuple[int, ...] | None
    iterations: int
    log: list[dict]
    n_mu: int
    n_nu: int
    classification: dict[tuple[int, ...], str]
    diagnostics: Diagnostics
    seconds: float
    x_names: list[str] = field(default_factory=list)
    y_names: list[str] = field(default_factory=list)
    z_names: list[str] = field(default_factory=list)
    upper_bound: float = np.nan
    suboptimal_warning: bool = False

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def to_dict(self, timings: bool = False) -> dict:
        out = {
            "method": self.method,
            "status": self.status,
            "objective": _num(self.objective),
            "upper_bound": _num(self.upper_bound),
            "iterations": self.iterations,
            "attack": {n: float(v) for n, v in zip(self.x_names, self.x)},
            "response": {
                "z": {n: int(v) for n, v in zip(self.z_names, self.z)} if self.z is not None else None,
                "y": {n: float(v) for n, v in zip(self.y_names, self.y)} if self.y is not None else None,
            },
            "classification": {
                "mu_found": self.n_mu,
                "nu_found": self.n_nu,
                "members": [{"z": "".join(map(str, z)), "kind": k} for z, k in self.classification.items()],
            },
            "diagnostics": self.diagnostics.to_dict(),
            "suboptimal_warning": self.suboptimal_warning,
        }
        if timings:
            out["seconds"] = self.seconds
        return out

    def iterations_csv(self, timings: bool = False) -> str:
        return log_to_csv(self.log, timings)


def _num(v):
    v = float(v)
    return v if np.isfinite(v) else None


def log_to_csv(log: list[dict], timings: bool = False) -> str:
    fields = [f for f in LOG_FIELDS if timings or f != "seconds"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in log:
        w.writerow([_fmt(row.get(f)) for f in fields])
    return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "inf" if v == np.inf else "-inf" if v == -np.inf else f"{v:.10g}"
    return str(v)


# ---------------------------------------------------------------------------
# big-M bookkeeping


def _sample_points(compact: CompactBilevel) -> list[np.ndarray]:
    """Region vertices (or box corners when enumeration is capped) plus the origin."""
    from .stealth import region_vertices

    pts = [np.zeros(compact.n)]
    try:
        verts = region_vertices(compact.instance)
    except ValueError:
        lo, hi = compact.x_lo[: compact.n_base], compact.x_hi[: compact.n_base]
        verts = [lo, hi]
    pts += [compact.pad_x(v) for v in verts]
    return pts


class MCache:
    """Per-commitment dual magnitudes observed on sample attacks."""

    def __init__(self, compact: CompactBilevel, params: RDParams):
        self.compact = compact
        self.params = params
        self.samples = _sample_points(compact)
        self.scale = 1.0
        self._duals: dict[tuple, float] = {}
        self._floor: float | None = None

    def add_sample(self, x):
        self.samples.append(np.asarray(x, dtype=float).copy())
        self._duals.clear()

    def max_dual(self, z) -> float:
        z = tuple(int(v) for v in z)
        if z not in self._duals:
            best = 0.0
            for x in self.samples:
                sol = solve(self.compact.lower_lp(x, z), self.params.solver())
                if sol.optimal and sol.duals is not None:
                    best = max(best, float(np.max(np.abs(sol.duals), initial=0.0)))
            self._duals[z] = best
        return self._duals[z]

    def penalty_floor(self) -> float:
        """Smallest uniform bound t with ``E'v = -c, 0 <= v <= t`` solvable.

        Below it the penalized operator problem is unbounded for every z.
        """
        if self._floor is None:
            E, c = self.compact.E, self.compact.c
            m = Model("penalty-floor")
            v = m.add_vars("v", E.shape[0], lb=0.0)
            t = m.add_var("t", 0.0)
            m.add_rows(E.T, v, "==", -c, "stationarity")
            for i in v:
                m.add_row([i, t], [1.0, -1.0], "<=", 0.0, "cap")
            m.set_objective([t], [1.0])
            sol = solve(m, self.params.solver())
            self._floor = float(sol.objective) if sol.optimal else 0.0
        return self._floor

    def m_dual(self, z) -> float:
        m = max(self.params.big_m, 10.0 * self.max_dual(z)) * self.scale
        return min(m, self.params.big_m_cap)

    @property
    def big_m(self) -> float:
        return self.params.big_m * self.scale


# ---------------------------------------------------------------------------
# master problem


@dataclass
class Master:
    model: Model
    x: np.ndarray
    y0: np.ndarray
    z0: np.ndarray
    blocks: list[KKTBlock]


def build_master(compact: CompactBilevel, pool: list[PoolEntry], params: RDParams, rho: float | None = None,
                 mcache: MCache | None = None) -> Master:
    """MP: ``max c'y0`` over the attack region, one copy of the operator's
    constraints, and one cut per pooled commitment.  Families with an empty
    pool contribute nothing."""
    mcache = mcache or MCache(compact, params)
    rho = params.rho if rho is None else rho
    m = Model("master")
    x = m.add_vars("x", compact.n, lb=compact.x_lo, ub=compact.x_hi)
    for j in np.flatnonzero(compact.x_integer):
        m.binary[int(x[j])] = True
    m.add_rows(compact.A, x, "<=", compact.a, "region")
    y0 = m.add_vars("y0", compact.q, lb=-np.inf, ub=np.inf)
    z0 = m.add_vars("z0", compact.r, binary=True)
    for j, v in compact.z_fixed.items():
        m.fix(int(z0[j]), v)
    m.add_rows(np.hstack([compact.E, compact.F, compact.D]), np.concatenate([y0, z0, x]), "<=", compact.d, "lower-copy")
    blocks = []
    for i, e in enumerate(pool):
        name = f"{e.kind}{i}"
        blk = add_kkt_block(m, compact, x, e.z, e.kind, name, mcache.m_dual(e.z), mcache.big_m,
                            params.big_m_cap, rho=rho)
        cols = [*y0, *blk.y]
        coefs = [*compact.c, *(-compact.c)]
        if blk.s is not None:
            cols += list(blk.s)
            coefs += list(-blk.rho)
        m.add_row(cols, coefs, "<=", 0.0, f"{name}.cut")
        blocks.append(blk)
    m.set_objective(y0, compact.c, maximize=True)
    return Master(m, x, y0, z0, blocks)


def _audit_blocks(blocks: list[KKTBlock], v: np.ndarray) -> list[str]:
    out = []
    for b in blocks:
        for h in audit_pairs(b.pairs, v, b.name):
            if b.kind == "nu" and h.which == "dual":
                continue  # v <= rho is the model, not a big-M guess
            out.append(f"{h.block}:{h.which}={h.value:.6g}/M={h.bound:.6g}")
    return out


# ---------------------------------------------------------------------------
# subproblems


@dataclass
class SP1Result:
    value: float
    z: tuple[int, ...]
    y: np.ndarray


def solve_sp1(compact: CompactBilevel, x, params: RDParams | None = None) -> SP1Result:
    """Operator MILP at a fixed attack."""
    params = params or RDParams()
    x = np.asarray(x, dtype=float)
    if x.shape[0] == compact.n_base and compact.n != compact.n_base:
        x = _complete_x(compact, x, params)
    sol = solve(compact.lower_milp(x), params.solver())
    if not sol.optimal:
        raise RDError(f"operator problem {sol.status} at attack {np.round(x, 9).tolist()}")
    z = tuple(int(round(v)) for v in sol.x[compact.q :])
    return SP1Result(float(sol.objective), z, sol.x[: compact.q].copy())


def _complete_x(compact: CompactBilevel, x_base, params: RDParams) -> np.ndarray:
    """Fill auxiliary upper-level columns for a given load-delta vector."""
    m = Model("complete-x")
    x = m.add_vars("x", compact.n, lb=compact.x_lo, ub=compact.x_hi)
    for j in np.flatnonzero(compact.x_integer):
        m.binary[int(x[j])] = True
    for j in range(compact.n_base):
        m.fix(int(x[j]), float(x_base[j]))
    m.add_rows(compact.A, x, "<=", compact.a, "region")
    m.set_objective([], [])
    sol = solve(m, params.solver())
    if not sol.optimal:
        raise RDError("load deltas are outside the attack region")
    return sol.x


@dataclass
class SP2Model:
    model: Model
    x: np.ndarray
    pi: np.ndarray
    kappa: np.ndarray
    pairs: list[ComplementarityPair]


def build_sp2(compact: CompactBilevel, z, big_m: float = 1e2, big_m_cap: float = 1e6, scale: float = 1.0) -> SP2Model:
    """Max-min total row violation at commitment ``z`` as one MILP.

    Dualizing the inner slack LP turns the objective into ``(Fz - d)'pi + pi'D x``;
    with stationarity ``D'pi = A'kappa`` and complementarity between ``kappa``
    and the region slack the bilinear term equals ``a'kappa``.
    """
    z = np.asarray(z, dtype=float)
    A, a = compact.base_region()
    nb = compact.n_base
    D = compact.D[:, :nb]
    p, q = compact.E.shape
    mr = A.shape[0]
    m = Model("sp2")
    x = m.add_vars("x", nb, lb=compact.x_lo[:nb], ub=compact.x_hi[:nb])
    pi = m.add_vars("pi", p, lb=0.0, ub=1.0)
    k_max = max(big_m, 2.0 * float(np.abs(D).sum(axis=0).max(initial=0.0)) + 1.0) * scale
    k_max = min(k_max, big_m_cap)
    kappa = m.add_vars("kappa", mr, lb=0.0, ub=k_max)
    m.add_rows(A, x, "<=", a, "region")
    m.add_rows(compact.E.T, pi, "==", np.zeros(q), "stationarity-y")
    m.add_rows(np.hstack([D.T, -A.T]), np.concatenate([pi, kappa]), "==", np.zeros(nb), "stationarity-x")
    pair = equality_row_pairs(A, a)
    lo, hi = compact.x_lo[:nb], compact.x_hi[:nb]
    slack_max = a - np.minimum(A * lo, A * hi).sum(axis=1)
    pairs = []
    for i in range(mr):
        if pair[i] >= 0:
            continue
        nz = np.flatnonzero(A[i])
        ms = min(max(slack_max[i], big_m) * scale, big_m_cap)
        pairs.append(
            ComplementarityPair(int(kappa[i]), x[nz], -A[i, nz], float(a[i]), float(k_max), float(ms),
                                tag=f"kappa{i}", exact_slack=bool(ms >= slack_max[i]))
        )
    linearize_complementarity(m, pairs, "sp2")
    m.set_objective(np.concatenate([pi, kappa]), np.concatenate([compact.F @ z - compact.d, a]), maximize=True)
    return SP2Model(m, x, pi, kappa, pairs)


@dataclass
class SP2Result:
    value: float
    x: np.ndarray
    audit: list[str]
    feasible_everywhere: bool


def solve_sp2(compact: CompactBilevel, z, params: RDParams | None = None, tol: float = 1e-7) -> SP2Result:
    """``Gamma_f(z)``: zero iff ``z`` admits a dispatch for every attack."""
    params = params or RDParams()
    scale, flags = 1.0, []
    for attempt in range(2):
        sp = build_sp2(compact, z, params.big_m, params.big_m_cap, scale)
        sol = solve(sp.model, params.solver())
        if not sol.optimal:
            raise RDError(f"SP2 {sol.status} at z = {tuple(z)}")
        hits = [f"{h.block}:{h.which}" for h in audit_pairs(sp.pairs, sol.x)]
        if not hits:
            break
        flags += hits
        if attempt == 0:
            scale = 2.0
    val = max(float(sol.objective), 0.0)
    return SP2Result(val, sol.x[sp.x].copy(), flags, val <= tol)


def build_sp2_kkt(compact: CompactBilevel, z, big_m: float = 1e2, big_m_cap: float = 1e6) -> Model:
    """Direct single-level form of the max-min slack problem (optimality
    conditions of the inner LP in ``y, s``); larger than :func:`build_sp2`."""
    z = np.asarray(z, dtype=float)
    A, a = compact.base_region()
    nb = compact.n_base
    E, D = compact.E, compact.D[:, :nb]
    p, q = E.shape
    h = compact.d - compact.F @ z
    lo, hi = compact.x_lo[:nb], compact.x_hi[:nb]
    smax, viol = row_slack_bounds(E, D, compact.F, compact.d, z, compact.y_lo, compact.y_hi, lo, hi)
    m = Model("sp2-kkt")
    x = m.add_vars("x", nb, lb=lo, ub=hi)
    y = m.add_vars("y", q, lb=-np.inf, ub=np.inf)
    s = m.add_vars("s", p, lb=0.0, ub=viol)
    pi = m.add_vars("pi", p, lb=0.0, ub=1.0)
    m.add_rows(A, x, "<=", a, "region")
    m.add_rows(np.hstack([E, D, -np.eye(p)]), np.concatenate([y, x, s]), "<=", h, "primal")
    m.add_rows(E.T, pi, "==", np.zeros(q), "stationarity")
    pairs = []
    for i in range(p):
        ye, xd = np.flatnonzero(E[i]), np.flatnonzero(D[i])
        cols = np.array([*y[ye], *x[xd], s[i]], dtype=np.int64)
        coefs = -np.array([*E[i, ye], *D[i, xd], -1.0])
        ms = min(max(smax[i] + viol[i], big_m), big_m_cap)
        pairs.append(ComplementarityPair(int(pi[i]), cols, coefs, float(h[i]), 1.0, float(ms), tag=f"row{i}"))
        # (1 - pi_i) s_i = 0
        b = m.add_var(f"pen.b[{i}]", binary=True)
        m.add_row([s[i], b], [1.0, -max(viol[i], 0.0)], "<=", 0.0, "pen")
        m.add_row([pi[i], b], [-1.0, 1.0], "<=", 0.0, "pen")
    linearize_complementarity(m, pairs, "cmp")
    m.set_objective(s, np.ones(p), maximize=True)
    return m


def sp2_size_table(compact: CompactBilevel) -> dict[str, dict[str, int]]:
    """Variable / constraint counts of the two single-level forms of SP2.

    Closed-form counts (excluding big-M binaries and their rows) for the
    dualized form: ``m + n + p`` variables, ``3m + n + 2p + q`` constraints;
    for the direct form: ``n + 2p + q`` variables, ``m + 6p + q`` constraints.
    """
    A, _ = compact.base_region()
    n, m = compact.n_base, A.shape[0]
    p, q = compact.p, compact.q
    return {
        "dualized": {"variables": m + n + p, "constraints": 3 * m + n + 2 * p + q},
        "direct-kkt": {"variables": n + 2 * p + q, "constraints": m + 6 * p + q},
    }


# ---------------------------------------------------------------------------
# main loop


def _region_is_point(compact: CompactBilevel) -> bool:
    nb = compact.n_base
    return bool(np.all(compact.x_hi[:nb] - compact.x_lo[:nb] <= 1e-12))


def _report(method, status, state: RDState, best, compact, diag, t0, classification=None, suboptimal=False):
    x, sp1 = best if best is not None else (np.zeros(compact.n), None)
    return SolveReport(
        method=method,
        status=status,
        objective=state.lb,
        x=np.asarray(x)[: compact.n_base].copy(),
        y=None if sp1 is None else sp1.y,
        z=None if sp1 is None else sp1.z,
        iterations=state.k,
        log=state.log,
        n_mu=state.k_mu,
        n_nu=state.k_nu,
        classification=classification if classification is not None else {e.z: e.kind for e in state.pool},
        diagnostics=diag,
        seconds=time.perf_counter() - t0,
        x_names=list(compact.x_names[: compact.n_base]),
        y_names=list(compact.y_names),
        z_names=list(compact.z_names),
        upper_bound=state.ub,
        suboptimal_warning=suboptimal,
    )


def _solve_master(compact, state, params, mcache, diag) -> tuple[Master, object]:
    """Solve MP; on a big-M audit hit double every heuristic M once and re-solve."""
    while True:
        mp = build_master(compact, state.pool, params, state.rho, mcache)
        sol = solve(mp.model, params.solver())
        if not sol.optimal:
            return mp, sol
        hits = _audit_blocks(mp.blocks, sol.x)
        if not hits:
            return mp, sol
        diag.big_m_hits += hits
        if diag.big_m_doubled:
            diag.unsound = True
            return mp, sol
        diag.big_m_doubled = True
        mcache.scale *= 2.0


def _escalate(state: RDState, params: RDParams, diag: Diagnostics, reason: str) -> bool:
    """Multiply rho by 10 and open a new bound epoch.  False once the cap is hit."""
    if len(diag.rho_flags) >= params.rho_escalations:
        diag.notes.append(f"rho escalation cap reached ({reason})")
        diag.unsound = True
        return False
    state.rho *= 10.0
    state.epoch += 1
    state.ub = np.inf
    diag.rho_flags.append(f"{reason}: rho -> {state.rho:g}")
    return True


def _rho_covers_duals(compact, z, state, params, mcache, diag) -> None:
    """Shadow-price audit for a new penalized member: rho > 1.01 * max |dual|."""
    need = 1.01 * max(mcache.max_dual(z), mcache.penalty_floor())
    while state.rho <= need:
        if not _escalate(state, params, diag, f"dual bound {need / 1.01:.6g} at z={''.join(map(str, z))}"):
            return


def _binding_penalized_slack(mp: Master, sol, compact) -> bool:
    v = sol.x
    lhs = float(compact.c @ v[mp.y0])
    for b in mp.blocks:
        if b.kind != "nu":
            continue
        val = b.value(v, compact.c)
        if abs(lhs - val) <= 1e-6 * (1 + abs(val)) and b.slack_total(v) > 1e-7:
            return True
    return False


def _run_loop(compact: CompactBilevel, params: RDParams, method: str, classify: bool) -> SolveReport:
    t0 = time.perf_counter()
    state = RDState(rho=params.rho)
    diag = Diagnostics()
    if _region_is_point(compact):
        sp1 = solve_sp1(compact, np.zeros(compact.n), params)
        state.lb = state.ub = sp1.value
        state.log.append(_row(state, sp1.value, sp1.value, sp1.z, None, "", t0))
        diag.notes.append("attack region is a single point; one operator solve")
        diag.rho_final = state.rho
        return _report(method, CONVERGED, state, (np.zeros(compact.n), sp1), compact, diag, t0)
    mcache = MCache(compact, params)
    sp2_cache: dict[tuple, SP2Result] = {}
    best = None
    status = ITERATION_LIMIT
    ub_check_done = False
    while state.k < params.max_iter:
        mp, sol = _solve_master(compact, state, params, mcache, diag)
        if not sol.optimal:
            if classify:
                raise RDError(f"master problem {sol.status}; attack region empty or model inconsistent")
            status = MP_INFEASIBLE
            diag.notes.append(f"master problem {sol.status} with all commitments treated as exact blocks")
            break
        state.k += 1
        mp_val = float(sol.objective)
        state.ub = min(state.ub, mp_val)
        x_star = sol.x[mp.x].copy()
        sp1 = solve_sp1(compact, x_star, params)
        if sp1.value > state.lb:
            state.lb = sp1.value
            best = (x_star, sp1)
        if state.lb > state.ub + params.epsilon:
            # sandwich broken: a penalized cut was too tight
            state.log.append(_row(state, mp_val, sp1.value, sp1.z, None, "bound-crossing", t0))
            if state.k_nu and _escalate(state, params, diag, "lower bound above upper bound"):
                continue
            diag.unsound = True
            status = STALLED
            break
        if state.ub - state.lb <= params.epsilon:
            if state.k_nu and not ub_check_done:
                ub_check_done = True
                if _binding_penalized_slack(mp, sol, compact) and _escalate(state, params, diag, "binding penalized cut with slack"):
                    state.log.append(_row(state, mp_val, sp1.value, sp1.z, None, "", t0))
                    continue
                trial = build_master(compact, state.pool, params, state.rho * 10.0, mcache)
                tsol = solve(trial.model, params.solver())
                if tsol.optimal and tsol.objective > state.lb + params.epsilon:
                    state.log.append(_row(state, mp_val, sp1.value, sp1.z, None, "", t0))
                    if _escalate(state, params, diag, "upper bound moved with rho x 10"):
                        ub_check_done = False
                        continue
            state.log.append(_row(state, mp_val, sp1.value, sp1.z, None, "", t0))
            status = CONVERGED
            break
        if state.seen(sp1.z):
            state.log.append(_row(state, mp_val, sp1.value, sp1.z, None, "repeat", t0))
            diag.notes.append(f"commitment {''.join(map(str, sp1.z))} returned twice with gap {state.ub - state.lb:.3g}")
            status = STALLED
            break
        mcache.add_sample(x_star)
        if classify:
            if sp1.z not in sp2_cache:
                sp2_cache[sp1.z] = solve_sp2(compact, sp1.z, params)
            res = sp2_cache[sp1.z]
            diag.big_m_hits += [f"sp2:{h}" for h in res.audit]
            kind = "mu" if res.feasible_everywhere else "nu"
            gf = res.value
        else:
            kind, gf = "mu", None
        if kind == "nu":
            _rho_covers_duals(compact, sp1.z, state, params, mcache, diag)
        state.pool.append(PoolEntry(sp1.z, kind, gf if gf is not None else np.nan))
        state.log.append(_row(state, mp_val, sp1.value, sp1.z, gf, kind, t0))
    diag.rho_final = state.rho
    return _report(method, status, state, best, compact, diag, t0, suboptimal=not classify)


def _row(state: RDState, mp_val, sp1_val, z, gf, kind, t0) -> dict:
    return {
        "k": state.k,
        "epoch": state.epoch,
        "ub": state.ub,
        "lb": state.lb,
        "mp_value": mp_val,
        "sp1_value": sp1_val,
        "z": "".join(map(str, z)),
        "gamma_f": gf,
        "classification": kind,
        "rho": state.rho,
        "seconds": time.perf_counter() - t0,
    }


def solve_om(compact: CompactBilevel, params: RDParams | None = None) -> SolveReport:
    """Worst-case attack with commitment-aware operator, by the classified loop."""
    return _run_loop(compact, params or RDParams(), "M-R&D", classify=True)


def solve_urd(compact: CompactBilevel, params: RDParams | None = None) -> SolveReport:
    """Same loop without the dispatchability check: every commitment gets an
    exact KKT block.  May return a suboptimal attack or an infeasible master."""
    return _run_loop(compact, params or RDParams(), "U-R&D", classify=False)


# ---------------------------------------------------------------------------
# enumerated single-level reformulation


def classify_by_sp2(compact: CompactBilevel, zs=None, params: RDParams | None = None) -> dict[tuple, SP2Result]:
    params = params or RDParams()
    zs = compact.possible_z() if zs is None else zs
    return {tuple(z): solve_sp2(compact, z, params) for z in zs}


def min_violation(compact: CompactBilevel, z, params: RDParams | None = None) -> float:
    """Smallest total row violation at commitment ``z`` over all attacks.

    Positive means no attack makes ``z`` dispatchable, so the operator never
    selects it and its block can be left out of an enumeration.
    """
    params = params or RDParams()
    m = Model("min-violation")
    x = m.add_vars("x", compact.n, lb=compact.x_lo, ub=compact.x_hi)
    for j in np.flatnonzero(compact.x_integer):
        m.binary[int(x[j])] = True
    m.add_rows(compact.A, x, "<=", compact.a, "region")
    y = m.add_vars("y", compact.q, lb=-np.inf, ub=np.inf)
    s = m.add_vars("s", compact.p, lb=0.0)
    rhs = compact.d - compact.F @ np.asarray(z, dtype=float)
    m.add_rows(np.hstack([compact.E, compact.D, -np.eye(compact.p)]), np.concatenate([y, x, s]), "<=", rhs, "lower")
    m.set_objective(s, np.ones(compact.p))
    sol = solve(m, params.solver())
    if not sol.optimal:
        raise RDError(f"violation LP {sol.status} at z = {tuple(z)}")
    return max(float(sol.objective), 0.0)


@dataclass
class KKTRResult:
    objective: float
    x: np.ndarray
    status: str
    members: dict[tuple, str]
    diagnostics: Diagnostics
    seconds: float
    n_binary: int
    skipped: list[tuple] = field(default_factory=list)


def solve_kkt_r(compact: CompactBilevel, classification=None, params: RDParams | None = None) -> KKTRResult:
    """One MILP with a block for every admissible commitment.

    ``classification`` maps z to "mu" / "nu" (or is an oracle classification
    object with ``mu()``); computed with SP2 when omitted.  Commitments with
    unordered segment binaries, and commitments that no attack can make
    dispatchable, are left out: the operator can never select them.

    The penalty is checked the same way as in the loop: the operator's value
    at the returned attack must not exceed the objective, and multiplying
    rho by 10 must not raise it; either failure escalates rho.
    """
    params = params or RDParams()
    if compact.r > params.kkt_r_cap:
        raise CapError(f"commitment dimension r = {compact.r} exceeds the enumeration cap {params.kkt_r_cap}")
    t0 = time.perf_counter()
    zs = compact.possible_z()
    if classification is None:
        kinds = {z: ("mu" if r.feasible_everywhere else "nu") for z, r in classify_by_sp2(compact, zs, params).items()}
    elif hasattr(classification, "mu"):
        mu = set(classification.mu())
        kinds = {z: ("mu" if z in mu else "nu") for z in zs}
    else:
        kinds = {tuple(z): k for z, k in classification.items()}
    skipped = [z for z in zs if kinds[z] == "nu" and min_violation(compact, z, params) > 1e-7]
    pool = [PoolEntry(z, kinds[z], np.nan) for z in zs if z not in skipped]
    state = RDState(rho=params.rho, pool=pool)
    diag = Diagnostics()
    if skipped:
        diag.notes.append(f"{len(skipped)} commitments infeasible for every attack left out")
    mcache = MCache(compact, params)
    for e in pool:
        if e.kind == "nu":
            _rho_covers_duals(compact, e.z, state, params, mcache, diag)
    has_nu = any(e.kind == "nu" for e in pool)
    while True:
        mp, sol = _solve_master(compact, state, params, mcache, diag)
        if not sol.optimal:
            diag.rho_final = state.rho
            return KKTRResult(np.nan, np.zeros(compact.n_base), sol.status, kinds, diag,
                              time.perf_counter() - t0, mp.model.n_binary, skipped)
        obj = float(sol.objective)
        x_star = sol.x[mp.x]
        sp1 = solve_sp1(compact, x_star, params)
        if obj > sp1.value + params.epsilon:
            # a block excluded attacks it should admit: dual bounds too tight
            diag.notes.append(f"objective {obj:.10g} above operator value {sp1.value:.10g}")
            if not diag.big_m_doubled:
                diag.big_m_doubled = True
                mcache.scale *= 2.0
                continue
            diag.unsound = True
            break
        if not has_nu:
            break
        if sp1.value > obj + params.epsilon:
            if _escalate(state, params, diag, "operator value above objective"):
                continue
            break
        trial = build_master(compact, state.pool, params, state.rho * 10.0, mcache)
        tsol = solve(trial.model, params.solver())
        if tsol.optimal and tsol.objective > obj + params.epsilon:
            if _escalate(state, params, diag, "objective moved with rho x 10"):
                continue
        break
    diag.rho_final = state.rho
    return KKTRResult(obj, x_star[: compact.n_base].copy(), CONVERGED, kinds, diag,
                      time.perf_counter() - t0, mp.model.n_binary, skipped)


# ---------------------------------------------------------------------------
# fixed-commitment baseline


def solve_model4(compact: CompactBilevel, params: RDParams | None = None) -> SolveReport:
    """Worst attack when every unit stays committed.

    With no pipelines the operator problem is an LP and the bilevel program is
    solved as one KKT-constrained MILP.  Segment binaries of pipelines remain,
    so with gas the loop runs over the reduced commitment set.
    """
    params = params or RDParams()
    fixed = compact.with_units_fixed(1.0)
    if fixed.schemes:
        rep = _run_loop(fixed, params, "fixed-commitment", classify=True)
        return rep
    t0 = time.perf_counter()
    z = tuple(int(fixed.z_fixed.get(j, 0)) for j in range(fixed.r))
    mcache = MCache(fixed, params)
    diag = Diagnostics(rho_final=params.rho)
    while True:
        m = Model("fixed-commitment")
        x = m.add_vars("x", fixed.n, lb=fixed.x_lo, ub=fixed.x_hi)
        for j in np.flatnonzero(fixed.x_integer):
            m.binary[int(x[j])] = True
        m.add_rows(fixed.A, x, "<=", fixed.a, "region")
        blk = add_kkt_block(m, fixed, x, z, "mu", "op", mcache.m_dual(z), mcache.big_m, params.big_m_cap)
        m.set_objective(blk.y, fixed.c, maximize=True)
        sol = solve(m, params.solver())
        if not sol.optimal:
            raise RDError(f"fixed-commitment problem {sol.status}")
        hits = _audit_blocks([blk], sol.x)
        if not hits or diag.big_m_doubled:
            diag.big_m_hits += hits
            diag.unsound = bool(hits)
            break
        diag.big_m_hits += hits
        diag.big_m_doubled = True
        mcache.scale *= 2.0
    state = RDState(k=1, lb=float(sol.objective), ub=float(sol.objective), rho=params.rho)
    y = sol.x[blk.y].copy()
    state.log.append(_row(state, state.ub, state.lb, z, None, "", t0))
    return _report("fixed-commitment", CONVERGED, state, (sol.x[x], SP1Result(state.lb, z, y)), fixed, diag, t0)
