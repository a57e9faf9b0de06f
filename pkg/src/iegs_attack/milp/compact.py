"""Matrix form of the attacker-operator bilevel model.

Upper level: ``A x <= a``.  Lower level (operator dispatch with unit
commitment): ``min c'y  s.t.  D x + E y + F z <= d``, ``z`` binary,
``y`` free.  Every bound is a row (so stationarity reads ``E' mu + c = 0``)
and every equality is stored as a pair of opposite inequalities so that all
row multipliers are nonnegative.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..instance import IEGSInstance, PtdfMatrix, build_ptdf
from ..pwl import PwlScheme, build_scheme, sigma_is_ordered
from .model import Model

ROW_GROUPS = (
    "gen-bounds",
    "line-limit",
    "power-balance",
    "power-shed",
    "well-capacity",
    "pressure-bounds",
    "pwl",
    "compressor-ratio",
    "pipe-limit",
    "compressor-limit",
    "gas-balance",
    "gas-shed",
    "p2g-capacity",
)


class CompactError(ValueError):
    pass


@dataclass
class CompactBilevel:
    A: np.ndarray
    a: np.ndarray
    c: np.ndarray
    D: np.ndarray
    E: np.ndarray
    F: np.ndarray
    d: np.ndarray
    x_names: list[str]
    y_names: list[str]
    z_names: list[str]
    row_tags: list[str]
    upper_tags: list[str]
    x_lo: np.ndarray
    x_hi: np.ndarray
    x_integer: np.ndarray
    y_lo: np.ndarray
    y_hi: np.ndarray
    pair: np.ndarray  # partner row of an equality pair, -1 otherwise
    n_base: int  # leading x columns that are load deltas
    schemes: list[PwlScheme] = field(default_factory=list)
    z_fixed: dict[int, float] = field(default_factory=dict)
    instance: IEGSInstance | None = None
    base_A: np.ndarray | None = None
    base_a: np.ndarray | None = None

    # dimensions ----------------------------------------------------------
    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def q(self) -> int:
        return self.E.shape[1]

    @property
    def r(self) -> int:
        return self.F.shape[1]

    @property
    def p(self) -> int:
        return self.E.shape[0]

    def dims(self) -> dict[str, int]:
        return {"n": self.n, "q": self.q, "r": self.r, "p": self.p, "m": self.m}

    def y_index(self, name: str) -> int:
        return self.y_names.index(name)

    def y_slice(self, prefix: str) -> np.ndarray:
        return np.array([i for i, n in enumerate(self.y_names) if n.startswith(prefix + "[")], dtype=int)

    # upper level ---------------------------------------------------------
    def base_region(self) -> tuple[np.ndarray, np.ndarray]:
        """(A, a) restricted to the load-delta columns."""
        return self.base_A, self.base_a

    def pad_x(self, x_base) -> np.ndarray:
        x = np.zeros(self.n)
        x[: self.n_base] = np.asarray(x_base, dtype=float)[: self.n_base]
        return x

    # commitment vectors --------------------------------------------------
    @property
    def n_units(self) -> int:
        return sum(1 for z in self.z_names if z.startswith("u["))

    def z_is_possible(self, z) -> bool:
        """Admitted by the ordering rows: each pipe's binaries form a prefix of ones."""
        z = np.asarray(z)
        pos = self.n_units
        for s in self.schemes:
            k = s.segments - 1
            if not sigma_is_ordered(z[pos : pos + k]):
                return False
            pos += k
        for j, v in self.z_fixed.items():
            if round(z[j]) != v:
                return False
        return True

    def all_z(self) -> list[tuple[int, ...]]:
        return [tuple(z) for z in itertools.product((0, 1), repeat=self.r)]

    def possible_z(self) -> list[tuple[int, ...]]:
        """Every commitment vector the lower level can select (ordered segment binaries)."""
        units = [
            (0, 1) if j not in self.z_fixed else (int(self.z_fixed[j]),) for j in range(self.n_units)
        ]
        segs = []
        for s in self.schemes:
            k = s.segments - 1
            segs.append([tuple([1] * j + [0] * (k - j)) for j in range(s.segments)])
        out = []
        for u in itertools.product(*units):
            for choice in itertools.product(*segs):
                out.append(tuple(u) + tuple(itertools.chain.from_iterable(choice)))
        return out

    # lower level ---------------------------------------------------------
    def rhs(self, x, z) -> np.ndarray:
        return self.d - self.D @ np.asarray(x, dtype=float) - self.F @ np.asarray(z, dtype=float)

    def lower_lp(self, x, z) -> Model:
        """Operator LP at fixed (x, z); columns are y in order."""
        m = Model("lower-lp")
        y = m.add_vars("y", self.q, lb=-np.inf, ub=np.inf)
        m.add_rows(self.E, y, "<=", self.rhs(x, z), "lower")
        m.set_objective(y, self.c)
        return m

    def lower_milp(self, x) -> Model:
        """Operator MILP at fixed x; columns are y then z."""
        m = Model("lower-milp")
        y = m.add_vars("y", self.q, lb=-np.inf, ub=np.inf)
        z = m.add_vars("z", self.r, binary=True)
        for j, v in self.z_fixed.items():
            m.fix(int(z[j]), v)
        m.add_rows(np.hstack([self.E, self.F]), np.concatenate([y, z]), "<=", self.d - self.D @ np.asarray(x, float), "lower")
        m.set_objective(y, self.c)
        return m

    def slack_lp(self, x, z) -> Model:
        """Minimal total violation of the lower-level rows at fixed (x, z)."""
        m = Model("slack-lp")
        y = m.add_vars("y", self.q, lb=-np.inf, ub=np.inf)
        s = m.add_vars("s", self.p, lb=0.0)
        m.add_rows(np.hstack([self.E, -np.eye(self.p)]), np.concatenate([y, s]), "<=", self.rhs(x, z), "lower")
        m.set_objective(s, np.ones(self.p))
        return m

    def with_units_fixed(self, value: float = 1.0) -> "CompactBilevel":
        """Copy whose commitment binaries are pinned (all units on by default)."""
        out = CompactBilevel(**{k: getattr(self, k) for k in self.__dataclass_fields__})
        out.z_fixed = {j: float(value) for j in range(self.n_units)}
        return out

    def group_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for t in self.row_tags:
            out[t] = out.get(t, 0) + 1
        return out


class _Rows:
    def __init__(self, ny: int, nz: int, nx: int):
        self.ny, self.nz, self.nx = ny, nz, nx
        self.E: list[np.ndarray] = []
        self.F: list[np.ndarray] = []
        self.D: list[np.ndarray] = []
        self.d: list[float] = []
        self.tags: list[str] = []
        self.pair: list[int] = []

    def add(self, ey=None, fz=None, dx=None, rhs=0.0, tag="", paired=False):
        e = np.zeros(self.ny)
        f = np.zeros(self.nz)
        dd = np.zeros(self.nx)
        for src, dst in ((ey, e), (fz, f), (dx, dd)):
            if src:
                for j, v in src.items():
                    dst[j] += v
        r = len(self.d)
        self.E.append(e)
        self.F.append(f)
        self.D.append(dd)
        self.d.append(float(rhs))
        self.tags.append(tag)
        self.pair.append(-1)
        return r

    def add_eq(self, ey=None, fz=None, dx=None, rhs=0.0, tag=""):
        r1 = self.add(ey, fz, dx, rhs, tag)
        neg = lambda src: {k: -v for k, v in src.items()} if src else None
        r2 = self.add(neg(ey), neg(fz), neg(dx), -rhs, tag)
        self.pair[r1], self.pair[r2] = r2, r1


def closed_form_rows(instance: IEGSInstance) -> int:
    """Lower-level row count predicted from the instance sizes."""
    pw, gas = instance.power, instance.gas
    K = instance.segments
    return (
        2 * len(pw.generators)
        + 2 * len(pw.lines)
        + (2 if pw.nodes else 0)
        + 2 * len(pw.loads)
        + 2 * len(gas.wells)
        + 2 * len(gas.nodes)
        + len(gas.pipelines) * (4 + 2 * K)
        + len(gas.compressors)
        + 2 * len(gas.pipelines)
        + 2 * len(gas.compressors)
        + 2 * len(gas.nodes)
        + 2 * len(gas.loads)
        + 2 * len(instance.p2g)
    )


def assemble_compact(
    instance: IEGSInstance,
    attack,
    ptdf: PtdfMatrix | None = None,
    schemes: list[PwlScheme] | None = None,
) -> CompactBilevel:
    """Build (A, a, c, D, E, F, d) for ``instance`` with the given attack block.

    ``attack`` is a :class:`~iegs_attack.stealth.LinearBlock` whose leading
    columns are the load deltas (``dp[...]`` then ``dg[...]``); any extra
    columns are upper-level auxiliaries that do not enter the lower level.
    """
    from ..stealth import attack_region, x_names

    pw, gas = instance.power, instance.gas
    ptdf = build_ptdf(pw) if ptdf is None else ptdf
    K = instance.segments
    if schemes is None:
        schemes = [build_scheme(p.limit, K) for p in gas.pipelines]
    if len(schemes) != len(gas.pipelines):
        raise CompactError("need one PWL scheme per passive pipeline")
    base_names = x_names(instance)
    if list(attack.names[: len(base_names)]) != base_names:
        raise CompactError("attack block must start with the load-delta columns in instance order")
    nb = len(base_names)
    tp, tg = instance.attack.tau_p, instance.attack.tau_g

    # y layout
    y_names: list[str] = []
    y_lo: list[float] = []
    y_hi: list[float] = []

    def yv(name, lo, hi):
        y_names.append(name)
        y_lo.append(lo)
        y_hi.append(hi)
        return len(y_names) - 1

    pg = [yv(f"p[{g.id}]", 0.0, g.p_max) for g in pw.generators]
    sp = [yv(f"sp[{d.id}]", 0.0, d.demand * (1 + tp)) for d in pw.loads]
    gw = [yv(f"gw[{w.id}]", 0.0, w.capacity) for w in gas.wells]
    gl = [yv(f"gl[{p.id}]", -p.limit, p.limit) for p in gas.pipelines]
    gc = [yv(f"gc[{c.id}]", 0.0, c.limit) for c in gas.compressors]
    pi = [yv(f"pi[{n.id}]", n.pi_min, n.pi_max) for n in gas.nodes]
    sg = [yv(f"sg[{d.id}]", 0.0, d.demand * (1 + tg)) for d in gas.loads]
    pf = [yv(f"pf[{f.id}]", 0.0, f.capacity) for f in instance.p2g]
    t = []
    for p, s in zip(gas.pipelines, schemes):
        t.append([yv(f"t[{p.id}][{k}]", 0.0, float(s.lengths[k])) for k in range(s.segments)])

    z_names = [f"u[{g.id}]" for g in pw.generators]
    sig = []
    for p, s in zip(gas.pipelines, schemes):
        sig.append([len(z_names) + k for k in range(s.segments - 1)])
        z_names += [f"sigma[{p.id}][{k}]" for k in range(s.segments - 1)]

    ny, nz, nx = len(y_names), len(z_names), attack.n_cols
    R = _Rows(ny, nz, nx)
    pidx = pw.node_index
    gidx = gas.node_index

    for i, g in enumerate(pw.generators):
        R.add({pg[i]: 1.0}, {i: -g.p_max}, None, 0.0, "gen-bounds")
        R.add({pg[i]: -1.0}, {i: g.p_min}, None, 0.0, "gen-bounds")

    for li, l in enumerate(pw.lines):
        ey: dict[int, float] = {}
        dx: dict[int, float] = {}
        const = 0.0
        for i, g in enumerate(pw.generators):
            ey[pg[i]] = ey.get(pg[i], 0.0) + ptdf.matrix[li, pidx[g.node]]
        for i, d in enumerate(pw.loads):
            beta = ptdf.matrix[li, pidx[d.node]]
            ey[sp[i]] = ey.get(sp[i], 0.0) + beta
            dx[i] = dx.get(i, 0.0) - beta
            const += beta * d.demand
        for i, f in enumerate(instance.p2g):
            ey[pf[i]] = ey.get(pf[i], 0.0) - ptdf.matrix[li, pidx[f.power_node]]
        R.add(ey, None, dx, l.limit + const, "line-limit")
        R.add({k: -v for k, v in ey.items()}, None, {k: -v for k, v in dx.items()}, l.limit - const, "line-limit")

    if pw.nodes:
        ey = {j: 1.0 for j in pg}
        ey.update({j: 1.0 for j in sp})
        ey.update({j: -1.0 for j in pf})
        R.add_eq(ey, None, None, sum(d.demand for d in pw.loads), "power-balance")

    for i, d in enumerate(pw.loads):
        R.add({sp[i]: -1.0}, None, None, 0.0, "power-shed")
        R.add({sp[i]: 1.0}, None, {i: -1.0}, d.demand, "power-shed")

    for i, w in enumerate(gas.wells):
        R.add({gw[i]: -1.0}, None, None, 0.0, "well-capacity")
        R.add({gw[i]: 1.0}, None, None, w.capacity, "well-capacity")

    for i, n in enumerate(gas.nodes):
        R.add({pi[i]: 1.0}, None, None, n.pi_max, "pressure-bounds")
        R.add({pi[i]: -1.0}, None, None, -n.pi_min, "pressure-bounds")

    for e, (p, s) in enumerate(zip(gas.pipelines, schemes)):
        lens = s.lengths
        ey = {gl[e]: 1.0}
        ey.update({tk: -1.0 for tk in t[e]})
        R.add_eq(ey, None, None, s.breakpoints[0], "pwl")
        ey = {pi[gidx[p.from_node]]: p.weymouth}
        ey[pi[gidx[p.to_node]]] = ey.get(pi[gidx[p.to_node]], 0.0) - p.weymouth
        for tk, sl in zip(t[e], s.slopes):
            ey[tk] = ey.get(tk, 0.0) - sl
        R.add_eq(ey, None, None, s.offsets[0], "pwl")
        R.add({t[e][0]: 1.0}, None, None, lens[0], "pwl")
        for k in range(s.segments - 1):
            R.add({t[e][k]: -1.0}, {sig[e][k]: lens[k]}, None, 0.0, "pwl")
            R.add({t[e][k + 1]: 1.0}, {sig[e][k]: -lens[k + 1]}, None, 0.0, "pwl")
        R.add({t[e][-1]: -1.0}, None, None, 0.0, "pwl")

    for i, c in enumerate(gas.compressors):
        R.add({pi[gidx[c.to_node]]: 1.0, pi[gidx[c.from_node]]: -c.ratio}, None, None, 0.0, "compressor-ratio")

    for e, p in enumerate(gas.pipelines):
        R.add({gl[e]: 1.0}, None, None, p.limit, "pipe-limit")
        R.add({gl[e]: -1.0}, None, None, p.limit, "pipe-limit")

    for i, c in enumerate(gas.compressors):
        R.add({gc[i]: -1.0}, None, None, 0.0, "compressor-limit")
        R.add({gc[i]: 1.0}, None, None, c.limit, "compressor-limit")

    ngl_off = len(pw.loads)
    for ni, n in enumerate(gas.nodes):
        ey: dict[int, float] = {}

        def acc(j, v):
            ey[j] = ey.get(j, 0.0) + v

        for i, w in enumerate(gas.wells):
            if w.node == n.id:
                acc(gw[i], 1.0)
        for e, p in enumerate(gas.pipelines):
            if p.to_node == n.id:
                acc(gl[e], 1.0)
            if p.from_node == n.id:
                acc(gl[e], -1.0)
        for i, c in enumerate(gas.compressors):
            if c.to_node == n.id:
                acc(gc[i], 1.0)
            if c.from_node == n.id:
                acc(gc[i], -1.0)
        dx: dict[int, float] = {}
        demand = 0.0
        for i, d in enumerate(gas.loads):
            if d.node == n.id:
                acc(sg[i], 1.0)
                dx[ngl_off + i] = -1.0
                demand += d.demand
        for i, g in enumerate(pw.generators):
            if g.gas_fired and g.gas_node == n.id:
                acc(pg[i], -g.gamma)
        for i, f in enumerate(instance.p2g):
            if f.gas_node == n.id:
                acc(pf[i], f.ratio)
        R.add_eq(ey, None, dx, demand, "gas-balance")

    for i, d in enumerate(gas.loads):
        R.add({sg[i]: -1.0}, None, None, 0.0, "gas-shed")
        R.add({sg[i]: 1.0}, None, {ngl_off + i: -1.0}, d.demand, "gas-shed")

    for i, f in enumerate(instance.p2g):
        R.add({pf[i]: -1.0}, None, None, 0.0, "p2g-capacity")
        R.add({pf[i]: 1.0}, None, None, f.capacity, "p2g-capacity")

    c = np.zeros(ny)
    for i, g in enumerate(pw.generators):
        c[pg[i]] = g.cost
    for i, d in enumerate(pw.loads):
        c[sp[i]] = d.shed_cost
    for i, w in enumerate(gas.wells):
        c[gw[i]] = w.cost
    for i, d in enumerate(gas.loads):
        c[sg[i]] = d.shed_cost

    E = np.array(R.E).reshape(-1, ny)
    F = np.array(R.F).reshape(-1, nz)
    D = np.array(R.D).reshape(-1, nx)
    base = attack_region(instance)
    return CompactBilevel(
        A=attack.A.copy(),
        a=attack.b.copy(),
        c=c,
        D=D,
        E=E,
        F=F,
        d=np.array(R.d),
        x_names=list(attack.names),
        y_names=y_names,
        z_names=z_names,
        row_tags=R.tags,
        upper_tags=list(attack.tags),
        x_lo=attack.lo.copy(),
        x_hi=attack.hi.copy(),
        x_integer=attack.integer.copy(),
        y_lo=np.array(y_lo),
        y_hi=np.array(y_hi),
        pair=np.array(R.pair, dtype=int),
        n_base=nb,
        schemes=list(schemes),
        instance=instance,
        base_A=base.A.copy(),
        base_a=base.b.copy(),
    )


def compact_for(instance: IEGSInstance, violation: bool = False, budget: int | None = None) -> CompactBilevel:
    """Convenience: attack block (with optional extensions) then assembly."""
    from ..stealth import build_attack_block

    ptdf = build_ptdf(instance.power)
    return assemble_compact(instance, build_attack_block(instance, violation, budget, ptdf=ptdf), ptdf)
