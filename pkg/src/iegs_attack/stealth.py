"""Stealthy load-redistribution attacks: attack region, falsified measurements
and the optional upper-level blocks (violation avoidance, attack budget)."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .instance import IEGSInstance, PowerSystem, PtdfMatrix, build_ptdf
from .pwl import build_scheme, weymouth


class StealthError(ValueError):
    pass


class GasSolveError(StealthError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (final residual {residual:.3e})")


@dataclass(frozen=True)
class AttackVector:
    dp: np.ndarray  # per power load, MW
    dg: np.ndarray  # per gas load, Sm3/h

    @classmethod
    def from_x(cls, instance: IEGSInstance, x) -> "AttackVector":
        x = np.asarray(x, dtype=float)
        npl = len(instance.power.loads)
        ngl = len(instance.gas.loads)
        if x.size < npl + ngl:
            raise StealthError(f"attack vector has {x.size} entries, expected {npl + ngl}")
        return cls(x[:npl].copy(), x[npl : npl + ngl].copy())

    @classmethod
    def zero(cls, instance: IEGSInstance) -> "AttackVector":
        return cls(np.zeros(len(instance.power.loads)), np.zeros(len(instance.gas.loads)))

    def as_x(self) -> np.ndarray:
        return np.concatenate([self.dp, self.dg])

    def check(self, instance: IEGSInstance) -> None:
        if self.dp.shape != (len(instance.power.loads),) or self.dg.shape != (len(instance.gas.loads),):
            raise StealthError("attack vector dimension does not match the load sets")
        if not (np.all(np.isfinite(self.dp)) and np.all(np.isfinite(self.dg))):
            raise StealthError("attack vector has non-finite entries")


@dataclass(frozen=True)
class GasDeltas:
    dg_pipes: np.ndarray
    dg_compressors: np.ndarray
    dpi: np.ndarray
    iterations: int = 0


@dataclass(frozen=True)
class FalsifiedMeasurements:
    dp_lines: np.ndarray
    dg_pipes: np.ndarray
    dg_compressors: np.ndarray
    dpi: np.ndarray


@dataclass
class LinearBlock:
    """Rows ``A v <= b`` over named columns.

    ``lo``/``hi`` are finite boxes every column is known to respect (used to
    size big-M constants); ``integer`` marks binary columns.
    """

    A: np.ndarray
    b: np.ndarray
    names: list[str]
    lo: np.ndarray
    hi: np.ndarray
    integer: np.ndarray
    tags: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float)).reshape(-1, len(self.names))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.size:
            raise StealthError("block rows and right-hand side differ in length")
        if not self.tags:
            self.tags = [""] * self.b.size
        if len(set(self.names)) != len(self.names):
            raise StealthError("duplicate column names in block")

    @property
    def n_cols(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return self.b.size

    def index(self, name: str) -> int:
        return self.names.index(name)

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = np.asarray(v, dtype=float)
        if v.size != self.n_cols:
            raise StealthError(f"point has {v.size} entries, block has {self.n_cols} columns")
        if np.any(self.integer) and np.any(np.abs(v[self.integer] - np.round(v[self.integer])) > tol):
            return False
        return bool(np.all(self.A @ v <= self.b + tol * (1 + np.abs(self.b))))

    def violations(self, v) -> np.ndarray:
        return np.asarray(self.A @ np.asarray(v, dtype=float) - self.b)


def _block(rows: list[tuple[dict[str, float], float, str]], cols: dict[str, tuple[float, float, bool]]) -> LinearBlock:
    names = list(cols)
    pos = {n: i for i, n in enumerate(names)}
    A = np.zeros((len(rows), len(names)))
    b = np.zeros(len(rows))
    tags = []
    for i, (coefs, rhs, tag) in enumerate(rows):
        for n, v in coefs.items():
            A[i, pos[n]] += v
        b[i] = rhs
        tags.append(tag)
    lo = np.array([cols[n][0] for n in names], dtype=float)
    hi = np.array([cols[n][1] for n in names], dtype=float)
    integer = np.array([cols[n][2] for n in names], dtype=bool)
    return LinearBlock(A, b, names, lo, hi, integer, tags)


def combine(*blocks: LinearBlock) -> LinearBlock:
    """Stack blocks, merging columns that share a name (first occurrence wins the order)."""
    names: list[str] = []
    info: dict[str, tuple[float, float, bool]] = {}
    for blk in blocks:
        for j, n in enumerate(blk.names):
            if n not in info:
                names.append(n)
                info[n] = (blk.lo[j], blk.hi[j], bool(blk.integer[j]))
            else:
                lo, hi, integer = info[n]
                info[n] = (max(lo, blk.lo[j]), min(hi, blk.hi[j]), integer or bool(blk.integer[j]))
    pos = {n: i for i, n in enumerate(names)}
    A = np.zeros((sum(b.n_rows for b in blocks), len(names)))
    b = np.zeros(A.shape[0])
    tags: list[str] = []
    r = 0
    for blk in blocks:
        cols = [pos[n] for n in blk.names]
        A[r : r + blk.n_rows, cols] = blk.A
        b[r : r + blk.n_rows] = blk.b
        tags += blk.tags
        r += blk.n_rows
    return LinearBlock(
        A,
        b,
        names,
        np.array([info[n][0] for n in names]),
        np.array([info[n][1] for n in names]),
        np.array([info[n][2] for n in names], dtype=bool),
        tags,
    )


def x_names(instance: IEGSInstance) -> list[str]:
    return [f"dp[{d.id}]" for d in instance.power.loads] + [f"dg[{d.id}]" for d in instance.gas.loads]


# ---------------------------------------------------------------------------
# attack region


def attack_region(instance: IEGSInstance) -> LinearBlock:
    """Balanced, box-bounded load deltas for power and gas loads."""
    tp, tg = instance.attack.tau_p, instance.attack.tau_g
    cols: dict[str, tuple[float, float, bool]] = {}
    rows: list[tuple[dict[str, float], float, str]] = []
    for d in instance.power.loads:
        w = tp * d.demand
        cols[f"dp[{d.id}]"] = (-w, w, False)
    for d in instance.gas.loads:
        w = tg * d.demand
        cols[f"dg[{d.id}]"] = (-w, w, False)
    for loads, key, tau, tag in (
        (instance.power.loads, "dp", tp, "power"),
        (instance.gas.loads, "dg", tg, "gas"),
    ):
        if not loads:
            continue
        total = {f"{key}[{d.id}]": 1.0 for d in loads}
        rows.append((total, 0.0, f"{tag}-balance"))
        rows.append(({k: -1.0 for k in total}, 0.0, f"{tag}-balance"))
        for d in loads:
            rows.append(({f"{key}[{d.id}]": 1.0}, tau * d.demand, f"{tag}-box"))
            rows.append(({f"{key}[{d.id}]": -1.0}, tau * d.demand, f"{tag}-box"))
    return _block(rows, cols)


def in_region(instance: IEGSInstance, x, tol: float = 1e-9) -> bool:
    return attack_region(instance).contains(np.asarray(x, dtype=float)[: instance.n_attack], tol)


def _balanced_box_vertices(widths: np.ndarray) -> np.ndarray:
    """Vertices of {v : sum v = 0, |v_i| <= w_i}."""
    k = widths.size
    if k == 0:
        return np.zeros((1, 0))
    if np.all(widths == 0):
        return np.zeros((1, k))
    out = []
    for free in range(k):
        others = [i for i in range(k) if i != free]
        for signs in itertools.product((-1.0, 1.0), repeat=len(others)):
            v = np.zeros(k)
            v[others] = np.array(signs) * widths[others]
            v[free] = -v[others].sum()
            if abs(v[free]) <= widths[free] + 1e-12:
                out.append(v)
    if not out:
        return np.zeros((1, k))
    pts = np.unique(np.round(np.array(out), 12), axis=0)
    return pts


def region_vertices(instance: IEGSInstance, cap: int = 6) -> np.ndarray:
    """All vertices of the attack region (base columns only)."""
    if instance.n_attack > cap:
        raise StealthError(f"vertex enumeration capped at {cap} attack dimensions")
    wp = np.array([instance.attack.tau_p * d.demand for d in instance.power.loads])
    wg = np.array([instance.attack.tau_g * d.demand for d in instance.gas.loads])
    vp = _balanced_box_vertices(wp)
    vg = _balanced_box_vertices(wg)
    return np.array([np.concatenate([a, b]) for a in vp for b in vg])


# ---------------------------------------------------------------------------
# falsified measurements


def power_injection_deltas(x: AttackVector, power: PowerSystem) -> np.ndarray:
    """Nodal injection change: loads withdraw, so a load increase is a negative injection."""
    inj = np.zeros(len(power.nodes))
    idx = power.node_index
    for d, v in zip(power.loads, x.dp):
        inj[idx[d.node]] -= v
    return inj


def derive_power_flow_deltas(x: AttackVector, ptdf: PtdfMatrix, power: PowerSystem) -> np.ndarray:
    if x.dp.shape != (len(power.loads),):
        raise StealthError(f"expected {len(power.loads)} power-load deltas, got {x.dp.shape}")
    if ptdf.matrix.shape != (len(power.lines), len(power.nodes)):
        raise StealthError("PTDF shape does not match the power system")
    return ptdf.matrix @ power_injection_deltas(x, power)


def baseline_pipe_flows(instance: IEGSInstance) -> np.ndarray:
    """Measured passive-pipeline flows; falls back to the no-attack dispatch."""
    pipes = instance.gas.pipelines
    if all(p.baseline_flow is not None for p in pipes):
        return np.array([p.baseline_flow for p in pipes], dtype=float)
    from .oracle import evaluate_dispatch

    res = evaluate_dispatch(instance, AttackVector.zero(instance))
    if not res.feasible:
        raise StealthError("no-attack dispatch is infeasible; cannot derive baseline flows")
    flows = np.array(res.g_pipes)
    given = [p.baseline_flow for p in pipes]
    return np.array([g if g is not None else f for g, f in zip(given, flows)], dtype=float)


def _gas_load_injection(x: AttackVector, instance: IEGSInstance) -> np.ndarray:
    """Required change of net inflow per gas node (equal to its load change)."""
    idx = instance.gas.node_index
    need = np.zeros(len(instance.gas.nodes))
    for d, v in zip(instance.gas.loads, x.dg):
        need[idx[d.node]] += v
    return need


def _gas_edges(instance: IEGSInstance):
    idx = instance.gas.node_index
    edges = [(idx[p.from_node], idx[p.to_node]) for p in instance.gas.pipelines]
    edges += [(idx[c.from_node], idx[c.to_node]) for c in instance.gas.compressors]
    return edges


def _gas_incidence(instance: IEGSInstance) -> np.ndarray:
    """Nodes x edges; +1 where the edge flows into the node."""
    edges = _gas_edges(instance)
    inc = np.zeros((len(instance.gas.nodes), len(edges)))
    for e, (a, b) in enumerate(edges):
        inc[a, e] -= 1.0
        inc[b, e] += 1.0
    return inc


def _components(n: int, edges) -> list[int]:
    """Representative (smallest node index) of each node's component."""
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return [find(i) for i in range(n)]


def _is_forest(n: int, edges) -> bool:
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            a = parent[a]
        return a

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def _pressure_deltas(instance: IEGSInstance, dg_pipes: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Propagate squared-pressure changes along passive pipes from each component's reference."""
    gas = instance.gas
    idx = gas.node_index
    n = len(gas.nodes)
    dpi = np.full(n, np.nan)
    pipe_edges = [(idx[p.from_node], idx[p.to_node]) for p in gas.pipelines]
    drop = (weymouth(base + dg_pipes) - weymouth(base)) / np.array([p.weymouth for p in gas.pipelines])
    comp = _components(n, pipe_edges)
    adj: dict[int, list[tuple[int, float]]] = {i: [] for i in range(n)}
    for e, (a, b) in enumerate(pipe_edges):
        adj[a].append((b, -drop[e]))  # dpi_b = dpi_a - drop
        adj[b].append((a, drop[e]))
    for ref in sorted(set(comp)):
        dpi[ref] = 0.0
        stack = [ref]
        while stack:
            a = stack.pop()
            for b, dlt in adj[a]:
                if np.isnan(dpi[b]):
                    dpi[b] = dpi[a] + dlt
                    stack.append(b)
    return dpi


def derive_gas_deltas(
    x: AttackVector,
    instance: IEGSInstance,
    baseline: np.ndarray | None = None,
    max_iter: int = 100,
    tol: float = 1e-10,
) -> GasDeltas:
    """Flow and squared-pressure deltas consistent with the gas load deltas.

    Trees are solved exactly: flows by leaf-to-root accumulation, pressures by
    propagation from a reference node (delta 0) per pipeline-connected
    component.  Meshed networks use damped Newton with minimum-norm steps.
    """
    gas = instance.gas
    npipe, ncomp, n = len(gas.pipelines), len(gas.compressors), len(gas.nodes)
    if x.dg.shape != (len(gas.loads),):
        raise StealthError(f"expected {len(gas.loads)} gas-load deltas, got {x.dg.shape}")
    if n == 0:
        return GasDeltas(np.zeros(0), np.zeros(0), np.zeros(0))
    base = baseline_pipe_flows(instance) if baseline is None else np.asarray(baseline, dtype=float)
    need = _gas_load_injection(x, instance)
    edges = _gas_edges(instance)
    inc = _gas_incidence(instance)

    if _is_forest(n, edges):
        flows = _tree_flows(n, edges, need)
        dg_l, dg_c = flows[:npipe], flows[npipe:]
        return GasDeltas(dg_l, dg_c, _pressure_deltas(instance, dg_l, base))

    # meshed: unknowns (edge flows, node pressures); equations: balance,
    # pipe relations, one pressure reference per pipeline component
    W = np.array([p.weymouth for p in gas.pipelines])
    idx = gas.node_index
    pipe_ends = [(idx[p.from_node], idx[p.to_node]) for p in gas.pipelines]
    refs = sorted(set(_components(n, pipe_ends)))
    ne = npipe + ncomp

    def residual(v):
        dg, dpi = v[:ne], v[ne:]
        r_bal = inc @ dg - need
        gl = dg[:npipe]
        r_w = np.array(
            [
                (weymouth(base[e] + gl[e]) - weymouth(base[e])) - W[e] * (dpi[a] - dpi[b])
                for e, (a, b) in enumerate(pipe_ends)
            ]
        )
        return np.concatenate([r_bal, r_w, dpi[refs]])

    def jacobian(v):
        dg = v[:ne]
        J = np.zeros((n + npipe + len(refs), ne + n))
        J[:n, :ne] = inc
        for e, (a, b) in enumerate(pipe_ends):
            J[n + e, e] = 2.0 * abs(base[e] + dg[e])
            J[n + e, ne + a] = -W[e]
            J[n + e, ne + b] = W[e]
        for k, r in enumerate(refs):
            J[n + npipe + k, ne + r] = 1.0
        return J

    v = np.zeros(ne + n)
    # minimum-norm start satisfying balance
    v[:ne] = np.linalg.lstsq(inc, need, rcond=None)[0]
    res = residual(v)
    norm = np.linalg.norm(res)
    scale = 1.0 + np.max(np.abs(weymouth(base))) if npipe else 1.0
    it = 0
    while norm > tol * scale and it < max_iter:
        step = np.linalg.lstsq(jacobian(v), -res, rcond=None)[0]
        lam = 1.0
        while lam > 1e-8:
            trial = v + lam * step
            tr = residual(trial)
            if np.linalg.norm(tr) < norm:
                break
            lam *= 0.5
        v, res = trial, tr
        norm = np.linalg.norm(res)
        it += 1
    if norm > tol * scale:
        raise GasSolveError("gas consistency solve did not converge", float(norm))
    dg = v[:ne]
    return GasDeltas(dg[:npipe], dg[npipe:], _pressure_deltas(instance, dg[:npipe], base), it)


def _tree_flows(n: int, edges, need: np.ndarray) -> np.ndarray:
    """Edge flows on a forest meeting nodal requirements ``need`` exactly."""
    adj: dict[int, list[tuple[int, int]]] = {i: [] for i in range(n)}
    for e, (a, b) in enumerate(edges):
        adj[a].append((e, b))
        adj[b].append((e, a))
    flows = np.zeros(len(edges))
    seen = [False] * n
    for root in range(n):
        if seen[root]:
            continue
        order, parent_edge = [], {root: None}
        stack = [root]
        seen[root] = True
        while stack:
            a = stack.pop()
            order.append(a)
            for e, b in adj[a]:
                if not seen[b]:
                    seen[b] = True
                    parent_edge[b] = (e, a)
                    stack.append(b)
        sub = need.copy()
        for node in reversed(order):
            pe = parent_edge[node]
            if pe is None:
                continue
            e, par = pe
            a, b = edges[e]
            # the subtree below `node` needs `sub[node]` more inflow
            flows[e] = sub[node] if b == node else -sub[node]
            sub[par] += sub[node]
    return flows


def derive_falsified(instance: IEGSInstance, x, ptdf: PtdfMatrix | None = None, baseline=None) -> FalsifiedMeasurements:
    av = x if isinstance(x, AttackVector) else AttackVector.from_x(instance, x)
    ptdf = build_ptdf(instance.power) if ptdf is None else ptdf
    dp_l = derive_power_flow_deltas(av, ptdf, instance.power)
    gd = derive_gas_deltas(av, instance, baseline)
    return FalsifiedMeasurements(dp_l, gd.dg_pipes, gd.dg_compressors, gd.dpi)


def gas_residuals(instance: IEGSInstance, x: AttackVector, deltas: GasDeltas, baseline=None) -> tuple[float, float]:
    """(max nodal balance residual, max relative pipe-relation residual)."""
    gas = instance.gas
    if not gas.nodes:
        return 0.0, 0.0
    base = baseline_pipe_flows(instance) if baseline is None else np.asarray(baseline, dtype=float)
    inc = _gas_incidence(instance)
    bal = inc @ np.concatenate([deltas.dg_pipes, deltas.dg_compressors]) - _gas_load_injection(x, instance)
    idx = gas.node_index
    rel = 0.0
    for e, p in enumerate(gas.pipelines):
        new = base[e] + deltas.dg_pipes[e]
        lhs = weymouth(new) - weymouth(base[e])
        rhs = p.weymouth * (deltas.dpi[idx[p.from_node]] - deltas.dpi[idx[p.to_node]])
        rel = max(rel, float(abs(lhs - rhs) / max(1.0, abs(weymouth(new)), abs(weymouth(base[e])))))
    return float(np.max(np.abs(bal))) if bal.size else 0.0, rel


# ---------------------------------------------------------------------------
# upper-level extension blocks


@dataclass(frozen=True)
class EstimatedState:
    """Operator-side estimates of the measured quantities (no-attack dispatch)."""

    p_gen: np.ndarray
    s_power: np.ndarray
    g_pipes: np.ndarray
    g_compressors: np.ndarray
    pi: np.ndarray

    @classmethod
    def from_dispatch(cls, res) -> "EstimatedState":
        if res is None or not res.feasible:
            raise StealthError("estimates need a feasible dispatch")
        return cls(
            np.asarray(res.p_gen), np.asarray(res.s_power), np.asarray(res.g_pipes),
            np.asarray(res.g_compressors), np.asarray(res.pi),
        )


def _consistency_rows(instance: IEGSInstance, ptdf: PtdfMatrix, base: np.ndarray, segments: int | None = None):
    """Rows defining line-flow, pipe-flow, compressor-flow and pressure deltas
    from the load deltas, with the pipe relation piecewise linearized."""
    pw, gas = instance.power, instance.gas
    K = instance.segments if segments is None else segments
    tp, tg = instance.attack.tau_p, instance.attack.tau_g
    cols: dict[str, tuple[float, float, bool]] = {}
    rows: list[tuple[dict[str, float], float, str]] = []
    for d in pw.loads:
        cols[f"dp[{d.id}]"] = (-tp * d.demand, tp * d.demand, False)
    for d in gas.loads:
        cols[f"dg[{d.id}]"] = (-tg * d.demand, tg * d.demand, False)
    idx = pw.node_index
    for li, l in enumerate(pw.lines):
        coefs = {f"dpl[{l.id}]": 1.0}
        bound = 0.0
        for d in pw.loads:
            beta = ptdf.matrix[li, idx[d.node]]
            if beta:
                coefs[f"dp[{d.id}]"] = coefs.get(f"dp[{d.id}]", 0.0) + beta  # minus sign of withdrawal
                bound += abs(beta) * tp * d.demand
        cols[f"dpl[{l.id}]"] = (-bound, bound, False)
        rows.append((coefs, 0.0, "flow-delta"))
        rows.append(({k: -v for k, v in coefs.items()}, 0.0, "flow-delta"))
    gidx = gas.node_index
    total_gas = float(sum(tg * d.demand for d in gas.loads))
    pi_bound = float(sum(2.0 * p.limit**2 / p.weymouth for p in gas.pipelines)) + 1.0
    for n in gas.nodes:
        cols[f"dpi[{n.id}]"] = (-pi_bound, pi_bound, False)
    for e, p in enumerate(gas.pipelines):
        m = p.limit + abs(base[e])
        cols[f"dgl[{p.id}]"] = (-m, m, False)
    for c in gas.compressors:
        cols[f"dgc[{c.id}]"] = (-(c.limit + total_gas), c.limit + total_gas, False)
    # nodal balance of deltas
    for n in gas.nodes:
        coefs: dict[str, float] = {}
        for d in gas.loads:
            if d.node == n.id:
                coefs[f"dg[{d.id}]"] = coefs.get(f"dg[{d.id}]", 0.0) + 1.0
        for p in gas.pipelines:
            if p.to_node == n.id:
                coefs[f"dgl[{p.id}]"] = coefs.get(f"dgl[{p.id}]", 0.0) - 1.0
            if p.from_node == n.id:
                coefs[f"dgl[{p.id}]"] = coefs.get(f"dgl[{p.id}]", 0.0) + 1.0
        for c in gas.compressors:
            if c.to_node == n.id:
                coefs[f"dgc[{c.id}]"] = coefs.get(f"dgc[{c.id}]", 0.0) - 1.0
            if c.from_node == n.id:
                coefs[f"dgc[{c.id}]"] = coefs.get(f"dgc[{c.id}]", 0.0) + 1.0
        if coefs:
            rows.append((coefs, 0.0, "gas-delta-balance"))
            rows.append(({k: -v for k, v in coefs.items()}, 0.0, "gas-delta-balance"))
    # piecewise-linear pipe relation on the falsified flow base + dg
    for e, p in enumerate(gas.pipelines):
        sch = build_scheme(p.limit, K)
        lens = sch.lengths
        tn = [f"pwlx[{p.id}].t{k}" for k in range(K)]
        sn = [f"pwlx[{p.id}].s{k}" for k in range(K - 1)]
        for k in range(K):
            cols[tn[k]] = (0.0, float(lens[k]), False)
        for k in range(K - 1):
            cols[sn[k]] = (0.0, 1.0, True)
        flow = {t: 1.0 for t in tn}
        flow[f"dgl[{p.id}]"] = -1.0
        rhs = base[e] - sch.breakpoints[0]
        rows.append((flow, rhs, "pipe-delta-pwl"))
        rows.append(({k: -v for k, v in flow.items()}, -rhs, "pipe-delta-pwl"))
        val = {t: float(s) for t, s in zip(tn, sch.slopes)}
        val[f"dpi[{p.from_node}]"] = -p.weymouth
        val[f"dpi[{p.to_node}]"] = val.get(f"dpi[{p.to_node}]", 0.0) + p.weymouth
        vrhs = float(sch.evaluate(base[e])) - sch.offsets[0]
        rows.append((val, vrhs, "pipe-delta-pwl"))
        rows.append(({k: -v for k, v in val.items()}, -vrhs, "pipe-delta-pwl"))
        rows.append(({tn[0]: 1.0}, float(lens[0]), "pipe-delta-pwl"))
        for k in range(K - 1):
            rows.append(({tn[k]: -1.0, sn[k]: float(lens[k])}, 0.0, "pipe-delta-pwl"))
            rows.append(({tn[k + 1]: 1.0, sn[k]: -float(lens[k + 1])}, 0.0, "pipe-delta-pwl"))
        rows.append(({tn[K - 1]: -1.0}, 0.0, "pipe-delta-pwl"))
    return rows, cols


def consistency_block(instance: IEGSInstance, ptdf: PtdfMatrix | None = None, baseline=None) -> LinearBlock:
    ptdf = build_ptdf(instance.power) if ptdf is None else ptdf
    base = baseline_pipe_flows(instance) if baseline is None else np.asarray(baseline, dtype=float)
    rows, cols = _consistency_rows(instance, ptdf, base)
    return _block(rows, cols)


def extension_violation_block(
    instance: IEGSInstance,
    estimated: EstimatedState | None,
    ptdf: PtdfMatrix | None = None,
) -> LinearBlock:
    """Keep the falsified measurement picture within operating limits."""
    if estimated is None:
        raise StealthError("violation-avoidance block needs estimated measurements")
    ptdf = build_ptdf(instance.power) if ptdf is None else ptdf
    base = np.asarray(estimated.g_pipes, dtype=float)
    rows, cols = _consistency_rows(instance, ptdf, base)
    pw, gas = instance.power, instance.gas
    idx = pw.node_index
    for li, l in enumerate(pw.lines):
        const = 0.0
        coefs: dict[str, float] = {}
        for g, pg in zip(pw.generators, estimated.p_gen):
            const += ptdf.matrix[li, idx[g.node]] * pg
        for d, sd in zip(pw.loads, estimated.s_power):
            beta = ptdf.matrix[li, idx[d.node]]
            const -= beta * (d.demand - sd)
            if beta:
                coefs[f"dp[{d.id}]"] = -beta
        rows.append((coefs, l.limit - const, "est-line-limit"))
        rows.append(({k: -v for k, v in coefs.items()}, l.limit + const, "est-line-limit"))
    for n, pi in zip(gas.nodes, estimated.pi):
        rows.append(({f"dpi[{n.id}]": 1.0}, n.pi_max - pi, "est-pressure"))
        rows.append(({f"dpi[{n.id}]": -1.0}, pi - n.pi_min, "est-pressure"))
    gidx = gas.node_index
    for c, gc in zip(gas.compressors, estimated.g_compressors):
        pit, pif = estimated.pi[gidx[c.to_node]], estimated.pi[gidx[c.from_node]]
        rows.append(
            ({f"dpi[{c.to_node}]": 1.0, f"dpi[{c.from_node}]": -c.ratio}, c.ratio * pif - pit, "est-compressor-ratio")
        )
        rows.append(({f"dgc[{c.id}]": 1.0}, c.limit - gc, "est-compressor-limit"))
        rows.append(({f"dgc[{c.id}]": -1.0}, gc, "est-compressor-limit"))
    for p, gl in zip(gas.pipelines, base):
        rows.append(({f"dgl[{p.id}]": 1.0}, p.limit - gl, "est-pipe-limit"))
        rows.append(({f"dgl[{p.id}]": -1.0}, p.limit + gl, "est-pipe-limit"))
    return _block(rows, cols)


def budget_block(instance: IEGSInstance, budget: int, ptdf: PtdfMatrix | None = None, baseline=None) -> LinearBlock:
    """Cardinality limit on the number of altered measurements.

    Each altered quantity ``v`` gets a binary ``delta`` with ``|v| <= M delta``
    (M = the quantity's box width); line-flow deltas count twice.
    """
    if budget < 0:
        raise StealthError("attack budget must be >= 0")
    ptdf = build_ptdf(instance.power) if ptdf is None else ptdf
    base = baseline_pipe_flows(instance) if baseline is None else np.asarray(baseline, dtype=float)
    rows, cols = _consistency_rows(instance, ptdf, base)
    weights: dict[str, float] = {}
    measured = (
        [(f"dp[{d.id}]", 1.0) for d in instance.power.loads]
        + [(f"dpl[{l.id}]", 2.0) for l in instance.power.lines]
        + [(f"dg[{d.id}]", 1.0) for d in instance.gas.loads]
        + [(f"dpi[{n.id}]", 1.0) for n in instance.gas.nodes]
        + [(f"dgl[{p.id}]", 1.0) for p in instance.gas.pipelines]
        + [(f"dgc[{c.id}]", 1.0) for c in instance.gas.compressors]
    )
    for name, w in measured:
        lo, hi, _ = cols[name]
        M = max(abs(lo), abs(hi))
        flag = f"used[{name}]"
        cols[flag] = (0.0, 1.0, True)
        rows.append(({name: 1.0, flag: -M}, 0.0, "budget-indicator"))
        rows.append(({name: -1.0, flag: -M}, 0.0, "budget-indicator"))
        weights[flag] = w
    rows.append((weights, float(budget), "budget"))
    return _block(rows, cols)


def build_attack_block(
    instance: IEGSInstance,
    violation: bool = False,
    budget: int | None = None,
    estimated: EstimatedState | None = None,
    ptdf: PtdfMatrix | None = None,
) -> LinearBlock:
    """Attack region plus any requested extension blocks (columns merged by name)."""
    blocks = [attack_region(instance)]
    if violation or budget is not None:
        ptdf = build_ptdf(instance.power) if ptdf is None else ptdf
    if violation:
        if estimated is None:
            from .oracle import evaluate_dispatch

            estimated = EstimatedState.from_dispatch(evaluate_dispatch(instance, AttackVector.zero(instance)))
        blocks.append(extension_violation_block(instance, estimated, ptdf))
    if budget is not None:
        blocks.append(budget_block(instance, budget, ptdf, None if estimated is None else estimated.g_pipes))
    return combine(*blocks)
