"""Brute-force ground truth for desk-scale instances.

The dispatch evaluator here is written straight from the physical model with
a bus-angle (B-theta) network formulation and linear Weymouth relations on a
fixed segment per pipe, and solved with HiGHS.  It shares no assembly code
with :mod:`iegs_attack.milp.compact`, so the two can cross-check each other.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .instance import IEGSInstance, build_ptdf
from .pwl import build_scheme, weymouth
from .stealth import AttackVector, region_vertices

MAX_R = 12
MAX_N = 6


class OracleCapError(RuntimeError):
    """The requested enumeration exceeds the oracle's size caps."""


@dataclass
class DispatchResult:
    feasible: bool
    cost: float = float("nan")
    p_gen: np.ndarray | None = None
    s_power: np.ndarray | None = None
    line_flows: np.ndarray | None = None
    g_wells: np.ndarray | None = None
    g_pipes: np.ndarray | None = None
    g_compressors: np.ndarray | None = None
    pi: np.ndarray | None = None
    s_gas: np.ndarray | None = None
    p_p2g: np.ndarray | None = None
    units: tuple[int, ...] = ()
    segments: tuple[int, ...] = ()

    def z(self, instance: IEGSInstance) -> tuple[int, ...]:
        """Commitment vector in compact ordering (units, then segment binaries)."""
        out = list(self.units)
        for j in self.segments:
            out += [1] * j + [0] * (instance.segments - 1 - j)
        return tuple(out)


def _as_attack(instance: IEGSInstance, x) -> AttackVector:
    if isinstance(x, AttackVector):
        return x
    return AttackVector.from_x(instance, x)


def _dispatch_lp(instance: IEGSInstance, x: AttackVector, units, segments, loads_true: bool = False) -> DispatchResult:
    pw, gas = instance.power, instance.gas
    nG, nD, nN, nL = len(pw.generators), len(pw.loads), len(pw.nodes), len(pw.lines)
    nW, nP, nC, nGN, nGD, nF = (
        len(gas.wells), len(gas.pipelines), len(gas.compressors), len(gas.nodes), len(gas.loads), len(instance.p2g),
    )
    use_angles = nL > 0 and all(l.reactance is not None for l in pw.lines)
    # columns
    off = {}
    pos = 0
    for key, size in (
        ("p", nG), ("s", nD), ("th", nN if use_angles else 0), ("f", nL), ("w", nW), ("gl", nP),
        ("gc", nC), ("pi", nGN), ("sg", nGD), ("pf", nF),
    ):
        off[key] = pos
        pos += size
    ncol = pos
    lb = np.zeros(ncol)
    ub = np.full(ncol, np.inf)
    cost = np.zeros(ncol)
    Aeq, beq, Aub, bub = [], [], [], []

    def row():
        return np.zeros(ncol)

    dp = np.zeros(nD) if loads_true else x.dp
    dg = np.zeros(nGD) if loads_true else x.dg

    for i, g in enumerate(pw.generators):
        lb[off["p"] + i] = g.p_min * units[i]
        ub[off["p"] + i] = g.p_max * units[i]
        cost[off["p"] + i] = g.cost
    for i, d in enumerate(pw.loads):
        ub[off["s"] + i] = d.demand + dp[i]
        cost[off["s"] + i] = d.shed_cost
        if ub[off["s"] + i] < 0:
            return DispatchResult(False, units=tuple(units), segments=tuple(segments))
    pidx = pw.node_index
    if use_angles:
        for k in range(nN):
            lb[off["th"] + k] = -np.inf
        slack = pidx[pw.slack]
        ub[off["th"] + slack] = lb[off["th"] + slack] = 0.0
    for li, l in enumerate(pw.lines):
        lb[off["f"] + li] = -l.limit
        ub[off["f"] + li] = l.limit
        if use_angles:
            r = row()
            r[off["f"] + li] = 1.0
            r[off["th"] + pidx[l.from_node]] -= 1.0 / l.reactance
            r[off["th"] + pidx[l.to_node]] += 1.0 / l.reactance
            Aeq.append(r)
            beq.append(0.0)
    # nodal injections
    inj_rows = [row() for _ in range(nN)]
    inj_const = np.zeros(nN)
    for i, g in enumerate(pw.generators):
        inj_rows[pidx[g.node]][off["p"] + i] += 1.0
    for i, d in enumerate(pw.loads):
        inj_rows[pidx[d.node]][off["s"] + i] += 1.0
        inj_const[pidx[d.node]] -= d.demand + dp[i]
    for i, f in enumerate(instance.p2g):
        inj_rows[pidx[f.power_node]][off["pf"] + i] -= 1.0
    if use_angles:
        # injection = outflow - inflow at each node
        for li, l in enumerate(pw.lines):
            inj_rows[pidx[l.from_node]][off["f"] + li] -= 1.0
            inj_rows[pidx[l.to_node]][off["f"] + li] += 1.0
        for k in range(nN):
            Aeq.append(inj_rows[k])
            beq.append(-inj_const[k])
    else:
        ptdf = build_ptdf(pw).matrix
        total = row()
        for k in range(nN):
            total += inj_rows[k]
        Aeq.append(total)
        beq.append(-inj_const.sum())
        for li in range(nL):
            r = row()
            for k in range(nN):
                r += ptdf[li, k] * inj_rows[k]
            r[off["f"] + li] -= 1.0
            Aeq.append(r)
            beq.append(-float(ptdf[li] @ inj_const))
    # gas
    gidx = gas.node_index
    for i, w in enumerate(gas.wells):
        ub[off["w"] + i] = w.capacity
        cost[off["w"] + i] = w.cost
    for i, n in enumerate(gas.nodes):
        lb[off["pi"] + i] = n.pi_min
        ub[off["pi"] + i] = n.pi_max
    for e, p in enumerate(gas.pipelines):
        sch = build_scheme(p.limit, instance.segments)
        j = segments[e]
        lo_g, hi_g = sch.breakpoints[j], sch.breakpoints[j + 1]
        lb[off["gl"] + e] = lo_g
        ub[off["gl"] + e] = hi_g
        # W (pi_m - pi_n) = f(X^j) + slope_j (g - X^j)
        r = row()
        r[off["pi"] + gidx[p.from_node]] += p.weymouth
        r[off["pi"] + gidx[p.to_node]] -= p.weymouth
        r[off["gl"] + e] -= sch.slopes[j]
        Aeq.append(r)
        beq.append(float(weymouth(lo_g)) - sch.slopes[j] * lo_g)
    for i, c in enumerate(gas.compressors):
        ub[off["gc"] + i] = c.limit
        r = row()
        r[off["pi"] + gidx[c.to_node]] = 1.0
        r[off["pi"] + gidx[c.from_node]] -= c.ratio
        Aub.append(r)
        bub.append(0.0)
    for i, d in enumerate(gas.loads):
        ub[off["sg"] + i] = d.demand + dg[i]
        cost[off["sg"] + i] = d.shed_cost
        if ub[off["sg"] + i] < 0:
            return DispatchResult(False, units=tuple(units), segments=tuple(segments))
    for i, f in enumerate(instance.p2g):
        ub[off["pf"] + i] = f.capacity
    for ni, n in enumerate(gas.nodes):
        r = row()
        demand = 0.0
        for i, w in enumerate(gas.wells):
            if w.node == n.id:
                r[off["w"] + i] += 1.0
        for e, p in enumerate(gas.pipelines):
            if p.to_node == n.id:
                r[off["gl"] + e] += 1.0
            if p.from_node == n.id:
                r[off["gl"] + e] -= 1.0
        for i, c in enumerate(gas.compressors):
            if c.to_node == n.id:
                r[off["gc"] + i] += 1.0
            if c.from_node == n.id:
                r[off["gc"] + i] -= 1.0
        for i, d in enumerate(gas.loads):
            if d.node == n.id:
                r[off["sg"] + i] += 1.0
                demand += d.demand + dg[i]
        for i, g in enumerate(pw.generators):
            if g.gas_fired and g.gas_node == n.id:
                r[off["p"] + i] -= g.gamma
        for i, f in enumerate(instance.p2g):
            if f.gas_node == n.id:
                r[off["pf"] + i] += f.ratio
        Aeq.append(r)
        beq.append(demand)

    res = linprog(
        cost,
        A_ub=np.array(Aub) if Aub else None,
        b_ub=np.array(bub) if bub else None,
        A_eq=np.array(Aeq) if Aeq else None,
        b_eq=np.array(beq) if beq else None,
        bounds=np.column_stack([lb, ub]),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        return DispatchResult(False, units=tuple(units), segments=tuple(segments))
    v = res.x

    def part(key, size):
        return v[off[key] : off[key] + size].copy()

    flows = part("f", nL)
    return DispatchResult(
        True,
        float(res.fun),
        part("p", nG),
        part("s", nD),
        flows,
        part("w", nW),
        part("gl", nP),
        part("gc", nC),
        part("pi", nGN),
        part("sg", nGD),
        part("pf", nF),
        tuple(int(u) for u in units),
        tuple(int(s) for s in segments),
    )


def commitment_space(instance: IEGSInstance, units_on: bool = False):
    """All (units, segments) combinations the operator can choose."""
    nG = len(instance.power.generators)
    unit_opts = [(1,) * nG] if units_on else list(itertools.product((0, 1), repeat=nG))
    seg_opts = list(itertools.product(range(instance.segments), repeat=len(instance.gas.pipelines)))
    return [(u, s) for u in unit_opts for s in seg_opts]


def split_z(instance: IEGSInstance, z) -> tuple[tuple[int, ...], tuple[int, ...] | None]:
    """Compact z -> (units, segment per pipe); segments None if the binaries are not ordered."""
    z = [int(round(v)) for v in z]
    nG = len(instance.power.generators)
    units = tuple(z[:nG])
    segs = []
    k = instance.segments - 1
    pos = nG
    for _ in instance.gas.pipelines:
        block = z[pos : pos + k]
        if any(block[i] < block[i + 1] for i in range(len(block) - 1)):
            return units, None
        segs.append(sum(block))
        pos += k
    return units, tuple(segs)


def evaluate_dispatch(instance: IEGSInstance, x, z=None, units_on: bool = False) -> DispatchResult:
    """Operator's optimal dispatch under falsified loads.

    With ``z`` given (compact ordering) the commitment and segments are fixed;
    otherwise every combination is enumerated and the cheapest kept.
    """
    av = _as_attack(instance, x)
    if z is not None:
        units, segs = split_z(instance, z)
        if segs is None:
            return DispatchResult(False, units=units)
        return _dispatch_lp(instance, av, units, segs)
    best = DispatchResult(False)
    for units, segs in commitment_space(instance, units_on):
        res = _dispatch_lp(instance, av, units, segs)
        if res.feasible and (not best.feasible or res.cost < best.cost - 1e-12):
            best = res
    return best


@dataclass
class RealizedCost:
    falsified: DispatchResult
    realized: DispatchResult

    @property
    def falsified_cost(self) -> float:
        return self.falsified.cost

    @property
    def realized_cost(self) -> float:
        return self.realized.cost


def evaluate_realized_cost(instance: IEGSInstance, x, policy: str = "fix-commitment-redispatch") -> RealizedCost:
    """Cost the operator actually pays once the falsified commitment meets true loads."""
    if policy != "fix-commitment-redispatch":
        raise ValueError(f"unknown policy {policy!r}")
    av = _as_attack(instance, x)
    fals = evaluate_dispatch(instance, av)
    if not fals.feasible:
        return RealizedCost(fals, DispatchResult(False))
    best = DispatchResult(False)
    for segs in itertools.product(range(instance.segments), repeat=len(instance.gas.pipelines)):
        res = _dispatch_lp(instance, av, fals.units, segs, loads_true=True)
        if res.feasible and (not best.feasible or res.cost < best.cost - 1e-12):
            best = res
    return RealizedCost(fals, best)


# ---------------------------------------------------------------------------
# commitment classification


@dataclass
class ZClassification:
    z: list[tuple[int, ...]]
    feasible: list[bool]  # True -> feasible for every attack
    witness: list[np.ndarray | None]
    reason: list[str] = field(default_factory=list)

    def mu(self) -> list[tuple[int, ...]]:
        return [z for z, f in zip(self.z, self.feasible) if f]

    def nu(self) -> list[tuple[int, ...]]:
        return [z for z, f in zip(self.z, self.feasible) if not f]

    def verdict(self, z) -> bool:
        return self.feasible[self.z.index(tuple(int(v) for v in z))]


def _check_caps(instance: IEGSInstance, r: int):
    if r > MAX_R:
        raise OracleCapError(f"commitment dimension r = {r} exceeds the oracle cap {MAX_R}")
    if instance.n_attack > MAX_N:
        raise OracleCapError(f"attack dimension n = {instance.n_attack} exceeds the oracle cap {MAX_N}")


def z_dimension(instance: IEGSInstance) -> int:
    return len(instance.power.generators) + len(instance.gas.pipelines) * (instance.segments - 1)


def classify_z(instance: IEGSInstance, zs=None) -> ZClassification:
    """Split commitment vectors by feasibility at every vertex of the attack region.

    The minimal total violation is convex in the attack, so checking the
    vertices covers the whole region.  Unordered segment binaries can never
    be dispatched and are infeasible outright.
    """
    r = z_dimension(instance)
    _check_caps(instance, r)
    verts = region_vertices(instance, MAX_N)
    zs = [tuple(z) for z in itertools.product((0, 1), repeat=r)] if zs is None else [tuple(z) for z in zs]
    feas, wit, why = [], [], []
    for z in zs:
        units, segs = split_z(instance, z)
        if segs is None:
            feas.append(False)
            wit.append(np.zeros(instance.n_attack))
            why.append("segment binaries not ordered")
            continue
        bad = None
        for v in verts:
            if not _dispatch_lp(instance, AttackVector.from_x(instance, v), units, segs).feasible:
                bad = v
                break
        feas.append(bad is None)
        wit.append(bad)
        why.append("" if bad is None else "no feasible dispatch at witness attack")
    return ZClassification(zs, feas, wit, why)


def sp2_by_vertices(compact, z, backend: str = "highs") -> tuple[float, np.ndarray]:
    """Max over region vertices of the minimal total row violation at ``z``."""
    from .milp import solve

    verts = region_vertices(compact.instance, MAX_N)
    best, arg = -np.inf, None
    for v in verts:
        sol = solve(compact.slack_lp(compact.pad_x(v), z), backend=backend)
        if not sol.optimal:
            raise RuntimeError(f"slack LP failed with status {sol.status}")
        if sol.objective > best:
            best, arg = sol.objective, v
    return float(max(best, 0.0)), arg


# ---------------------------------------------------------------------------
# brute-force bilevel search


@dataclass
class BruteForceResult:
    value: float
    x: np.ndarray
    trace: list[tuple[np.ndarray, float]]
    evaluations: int
    seconds: float


def _value(args):
    instance, x, units_on = args
    res = evaluate_dispatch(instance, x, units_on=units_on)
    return res.cost if res.feasible else -np.inf


def _grid(instance: IEGSInstance, points: int) -> np.ndarray:
    wp = [instance.attack.tau_p * d.demand for d in instance.power.loads]
    wg = [instance.attack.tau_g * d.demand for d in instance.gas.loads]
    axes = []
    groups = []
    for widths in (wp, wg):
        k = len(widths)
        if k == 0:
            groups.append((0, 0))
            continue
        free = [np.linspace(-w, w, points) if w > 0 else np.zeros(1) for w in widths[:-1]]
        axes += free
        groups.append((k - 1, widths[-1]))
    pts = []
    for combo in itertools.product(*axes) if axes else [()]:
        combo = list(combo)
        x = []
        pos = 0
        ok = True
        for (nfree, wlast), widths in zip(groups, (wp, wg)):
            if not widths:
                continue
            part = combo[pos : pos + nfree]
            pos += nfree
            last = -sum(part)
            if abs(last) > wlast + 1e-12:
                ok = False
                break
            x += part + [last]
        if ok:
            pts.append(x)
    return np.array(pts, dtype=float).reshape(-1, instance.n_attack)


def brute_force_bilevel(
    instance: IEGSInstance,
    points: int = 421,
    refine_rounds: int = 40,
    units_on: bool = False,
    jobs: int = 1,
) -> BruteForceResult:
    """Optimistic bilevel value by exhaustive search.

    Evaluates ``min_z`` dispatch cost on a uniform grid over the free
    coordinates (one per balance group is eliminated) and at every region
    vertex, then refines around the best point by a shrinking pattern
    search.  The value is a certified lower bound on the optimum; on the
    2-bus it is exact since the optimum sits on a vertex.
    """
    r = z_dimension(instance)
    _check_caps(instance, r)
    t0 = time.perf_counter()
    cands = np.vstack([_grid(instance, points), region_vertices(instance, MAX_N)])
    cands = np.unique(np.round(cands, 12), axis=0)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            vals = list(pool.map(_value, [(instance, x, units_on) for x in cands], chunksize=16))
    else:
        vals = [_value((instance, x, units_on)) for x in cands]
    evals = len(cands)
    trace = list(zip(cands, vals))
    k = int(np.argmax(vals))
    best_x, best_v = cands[k].copy(), float(vals[k])

    # shrinking pattern search along balanced directions
    n = instance.n_attack
    npl = len(instance.power.loads)
    dirs = []
    for group in (range(npl), range(npl, n)):
        g = list(group)
        for i, j in itertools.combinations(g, 2):
            d = np.zeros(n)
            d[i], d[j] = 1.0, -1.0
            dirs += [d, -d]
    widths = np.array(
        [instance.attack.tau_p * d.demand for d in instance.power.loads]
        + [instance.attack.tau_g * d.demand for d in instance.gas.loads]
    )
    step = (2 * widths.max() / max(points - 1, 1)) if widths.size and widths.max() > 0 else 0.0
    lo, hi = -widths, widths
    rounds = 0
    while step > 1e-9 and rounds < refine_rounds and dirs:
        improved = False
        for d in dirs:
            x = np.clip(best_x + step * d, lo, hi)
            if abs(x[:npl].sum()) > 1e-9 or abs(x[npl:].sum()) > 1e-9:
                continue
            v = _value((instance, x, units_on))
            evals += 1
            if v > best_v + 1e-12:
                best_x, best_v, improved = x, v, True
        if not improved:
            step /= 2
        rounds += 1
    return BruteForceResult(best_v, best_x, trace, evals, time.perf_counter() - t0)
