"""IEGS data model: instance types, JSON ingestion, validation and PTDFs.

Units are fixed throughout: MW, Sm3/h, $/MWh and $/(Sm3/h).  Power loads
withdraw (incidence -1) and generators inject (+1) at their node.
"""

from __future__ import annotations

import dataclasses
import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

__all__ = [
    "AttackParams",
    "Compressor",
    "GasLoad",
    "GasNode",
    "GasSystem",
    "Generator",
    "IEGSInstance",
    "InstanceParseError",
    "InstanceValidationError",
    "Line",
    "P2GFacility",
    "Pipeline",
    "PowerLoad",
    "PowerSystem",
    "PtdfMatrix",
    "Well",
    "build_ptdf",
    "bundled_fixture",
    "dump_instance",
    "instance_to_dict",
    "load_instance",
    "validate",
]

FIXTURE_DIR = Path(__file__).with_name("fixtures")


class InstanceParseError(ValueError):
    """The document does not follow the instance schema."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class InstanceValidationError(ValueError):
    """The instance parsed but breaks one or more invariants."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = list(diagnostics)
        lines = "\n  - ".join(self.diagnostics)
        super().__init__(f"{len(self.diagnostics)} validation error(s):\n  - {lines}")


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class Line:
    id: str
    from_node: str
    to_node: str
    limit: float
    reactance: float | None = None
    ptdf: Mapping[str, float] | None = None


@dataclass(frozen=True)
class Generator:
    id: str
    node: str
    cost: float
    p_min: float
    p_max: float
    kind: str = "coal"
    gamma: float = 0.0
    gas_node: str | None = None

    @property
    def gas_fired(self) -> bool:
        return self.kind == "gas"


@dataclass(frozen=True)
class PowerLoad:
    id: str
    node: str
    demand: float
    shed_cost: float


@dataclass(frozen=True)
class PowerSystem:
    nodes: tuple[str, ...]
    slack: str
    lines: tuple[Line, ...] = ()
    generators: tuple[Generator, ...] = ()
    loads: tuple[PowerLoad, ...] = ()

    @cached_property
    def node_index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.nodes)}


@dataclass(frozen=True)
class GasNode:
    id: str
    pi_min: float
    pi_max: float


@dataclass(frozen=True)
class Well:
    id: str
    node: str
    cost: float
    capacity: float


@dataclass(frozen=True)
class Pipeline:
    """Passive pipeline; positive flow runs from ``from_node`` to ``to_node``."""

    id: str
    from_node: str
    to_node: str
    weymouth: float
    limit: float
    baseline_flow: float | None = None


@dataclass(frozen=True)
class Compressor:
    id: str
    from_node: str
    to_node: str
    ratio: float
    limit: float


@dataclass(frozen=True)
class GasLoad:
    id: str
    node: str
    demand: float
    shed_cost: float


@dataclass(frozen=True)
class GasSystem:
    nodes: tuple[GasNode, ...] = ()
    wells: tuple[Well, ...] = ()
    pipelines: tuple[Pipeline, ...] = ()
    compressors: tuple[Compressor, ...] = ()
    loads: tuple[GasLoad, ...] = ()

    @cached_property
    def node_index(self) -> dict[str, int]:
        return {n.id: i for i, n in enumerate(self.nodes)}


@dataclass(frozen=True)
class P2GFacility:
    id: str
    power_node: str
    gas_node: str
    ratio: float
    capacity: float


@dataclass(frozen=True)
class AttackParams:
    tau_p: float = 0.0
    tau_g: float = 0.0
    budget: int | None = None


@dataclass(frozen=True)
class IEGSInstance:
    power: PowerSystem
    gas: GasSystem = field(default_factory=GasSystem)
    p2g: tuple[P2GFacility, ...] = ()
    attack: AttackParams = field(default_factory=AttackParams)
    segments: int = 8
    name: str = "instance"

    @property
    def n_attack(self) -> int:
        return len(self.power.loads) + len(self.gas.loads)

    def with_attack(self, **changes: Any) -> "IEGSInstance":
        return dataclasses.replace(self, attack=dataclasses.replace(self.attack, **changes))

    def with_segments(self, segments: int) -> "IEGSInstance":
        return dataclasses.replace(self, segments=segments)

    def scaled(self, load: float = 1.0, limit: float = 1.0) -> "IEGSInstance":
        """Copy with all loads and all transmission limits multiplied."""
        power = dataclasses.replace(
            self.power,
            loads=tuple(dataclasses.replace(d, demand=d.demand * load) for d in self.power.loads),
            lines=tuple(dataclasses.replace(l, limit=l.limit * limit) for l in self.power.lines),
        )
        gas = dataclasses.replace(
            self.gas,
            loads=tuple(dataclasses.replace(d, demand=d.demand * load) for d in self.gas.loads),
            pipelines=tuple(
                dataclasses.replace(
                    p,
                    limit=p.limit * limit,
                    baseline_flow=None if p.baseline_flow is None else p.baseline_flow * load,
                )
                for p in self.gas.pipelines
            ),
            compressors=tuple(
                dataclasses.replace(c, limit=c.limit * limit) for c in self.gas.compressors
            ),
        )
        return dataclasses.replace(self, power=power, gas=gas)


@dataclass(frozen=True)
class PtdfMatrix:
    matrix: np.ndarray  # lines x nodes
    nodes: tuple[str, ...]
    slack: str

    def column(self, node: str) -> np.ndarray:
        return self.matrix[:, self.nodes.index(node)]


# ---------------------------------------------------------------------------
# parsing


class _Reader:
    def __init__(self, data: Any, path: str):
        self.data = data
        self.path = path

    def _fail(self, key: str, msg: str) -> InstanceParseError:
        return InstanceParseError(f"{self.path}.{key}" if self.path else key, msg)

    def obj(self) -> Mapping[str, Any]:
        if not isinstance(self.data, Mapping):
            raise InstanceParseError(self.path or "<root>", "expected an object")
        return self.data

    def req(self, key: str) -> Any:
        d = self.obj()
        if key not in d:
            raise self._fail(key, "missing required field")
        return d[key]

    def num(self, key: str, default: Any = ...) -> float:
        d = self.obj()
        if key not in d or d[key] is None:
            if default is ...:
                raise self._fail(key, "missing required field")
            return default
        v = d[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self._fail(key, f"expected a number, got {type(v).__name__}")
        return float(v)

    def ident(self, key: str, default: Any = ...) -> str:
        d = self.obj()
        if key not in d or d[key] is None:
            if default is ...:
                raise self._fail(key, "missing required field")
            return default
        v = d[key]
        if not isinstance(v, str):
            raise self._fail(key, f"expected a string id, got {type(v).__name__}")
        return v

    def items(self, key: str, required: bool = False) -> list["_Reader"]:
        d = self.obj()
        if key not in d:
            if required:
                raise self._fail(key, "missing required field")
            return []
        v = d[key]
        if not isinstance(v, list):
            raise self._fail(key, "expected a list")
        base = f"{self.path}.{key}" if self.path else key
        return [_Reader(item, f"{base}[{i}]") for i, item in enumerate(v)]

    def sub(self, key: str, required: bool = True) -> "_Reader":
        d = self.obj()
        if key not in d:
            if required:
                raise self._fail(key, "missing required field")
            return _Reader({}, f"{self.path}.{key}" if self.path else key)
        return _Reader(d[key], f"{self.path}.{key}" if self.path else key)


def _parse_power(r: _Reader) -> PowerSystem:
    nodes_raw = r.req("nodes")
    if not isinstance(nodes_raw, list) or not all(isinstance(n, str) for n in nodes_raw):
        raise InstanceParseError(f"{r.path}.nodes", "expected a list of string ids")
    lines = []
    for lr in r.items("lines"):
        ptdf = lr.obj().get("ptdf")
        if ptdf is not None:
            if not isinstance(ptdf, Mapping) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in ptdf.values()
            ):
                raise InstanceParseError(f"{lr.path}.ptdf", "expected an object of node -> number")
            ptdf = {str(k): float(v) for k, v in ptdf.items()}
        lines.append(
            Line(
                id=lr.ident("id"),
                from_node=lr.ident("from"),
                to_node=lr.ident("to"),
                limit=lr.num("limit"),
                reactance=lr.num("reactance", None),
                ptdf=ptdf,
            )
        )
    gens = []
    for gr in r.items("generators"):
        kind = gr.ident("kind", "coal")
        if kind not in ("coal", "gas"):
            raise InstanceParseError(f"{gr.path}.kind", f"expected 'coal' or 'gas', got {kind!r}")
        gens.append(
            Generator(
                id=gr.ident("id"),
                node=gr.ident("node"),
                cost=gr.num("cost"),
                p_min=gr.num("p_min"),
                p_max=gr.num("p_max"),
                kind=kind,
                gamma=gr.num("gamma", 0.0),
                gas_node=gr.ident("gas_node", None),
            )
        )
    loads = [
        PowerLoad(
            id=dr.ident("id"),
            node=dr.ident("node"),
            demand=dr.num("demand"),
            shed_cost=dr.num("shed_cost"),
        )
        for dr in r.items("loads")
    ]
    return PowerSystem(
        nodes=tuple(nodes_raw),
        slack=r.ident("slack"),
        lines=tuple(lines),
        generators=tuple(gens),
        loads=tuple(loads),
    )


def _parse_gas(r: _Reader) -> GasSystem:
    return GasSystem(
        nodes=tuple(
            GasNode(id=nr.ident("id"), pi_min=nr.num("pi_min"), pi_max=nr.num("pi_max"))
            for nr in r.items("nodes")
        ),
        wells=tuple(
            Well(
                id=wr.ident("id"),
                node=wr.ident("node"),
                cost=wr.num("cost"),
                capacity=wr.num("capacity"),
            )
            for wr in r.items("wells")
        ),
        pipelines=tuple(
            Pipeline(
                id=pr.ident("id"),
                from_node=pr.ident("from"),
                to_node=pr.ident("to"),
                weymouth=pr.num("weymouth"),
                limit=pr.num("limit"),
                baseline_flow=pr.num("baseline_flow", None),
            )
            for pr in r.items("pipelines")
        ),
        compressors=tuple(
            Compressor(
                id=cr.ident("id"),
                from_node=cr.ident("from"),
                to_node=cr.ident("to"),
                ratio=cr.num("ratio"),
                limit=cr.num("limit"),
            )
            for cr in r.items("compressors")
        ),
        loads=tuple(
            GasLoad(
                id=dr.ident("id"),
                node=dr.ident("node"),
                demand=dr.num("demand"),
                shed_cost=dr.num("shed_cost"),
            )
            for dr in r.items("loads")
        ),
    )


def parse_instance(data: Mapping[str, Any]) -> IEGSInstance:
    """Build an instance from a decoded document without checking invariants."""
    root = _Reader(data, "")
    root.obj()
    power = _parse_power(root.sub("power"))
    gas = _parse_gas(root.sub("gas", required=False))
    p2g = tuple(
        P2GFacility(
            id=fr.ident("id"),
            power_node=fr.ident("power_node"),
            gas_node=fr.ident("gas_node"),
            ratio=fr.num("ratio"),
            capacity=fr.num("capacity"),
        )
        for fr in root.items("p2g")
    )
    ar = root.sub("attack", required=False)
    budget = ar.obj().get("budget")
    if budget is not None and (isinstance(budget, bool) or not isinstance(budget, (int, float))):
        raise InstanceParseError("attack.budget", "expected a number or null")
    if budget is not None and float(budget) != int(budget):
        raise InstanceParseError("attack.budget", "expected an integer count")
    attack = AttackParams(
        tau_p=ar.num("tau_p", 0.0),
        tau_g=ar.num("tau_g", 0.0),
        budget=None if budget is None else int(budget),
    )
    pr = root.sub("pwl", required=False)
    seg = pr.num("segments", 8.0)
    if seg != int(seg):
        raise InstanceParseError("pwl.segments", "expected an integer")
    name = data.get("name", "instance")
    if not isinstance(name, str):
        raise InstanceParseError("name", "expected a string")
    return IEGSInstance(power=power, gas=gas, p2g=p2g, attack=attack, segments=int(seg), name=name)


def load_instance(document: str | bytes | Path | Mapping[str, Any]) -> IEGSInstance:
    """Parse and validate an instance.

    ``document`` may be JSON text, a path to a JSON file, or an already
    decoded mapping.  Raises :class:`InstanceParseError` for schema problems
    and :class:`InstanceValidationError` (listing every failure) for
    invariant violations.
    """
    if isinstance(document, Mapping):
        data = document
    else:
        if isinstance(document, Path):
            text, where = document.read_text(), str(document)
        else:
            text = document.decode() if isinstance(document, bytes) else document
            where = "<text>"
            if not text.lstrip().startswith("{"):
                text, where = Path(text).read_text(), text
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InstanceParseError(where, f"invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    instance = parse_instance(data)
    problems = validate(instance)
    if problems:
        raise InstanceValidationError(problems)
    return instance


def bundled_fixture(name: str) -> IEGSInstance:
    """Load ``two-bus`` or ``mini-iegs`` from the package fixtures."""
    stem = name[:-5] if name.endswith(".json") else name
    return load_instance(FIXTURE_DIR / f"{stem}.json")


# ---------------------------------------------------------------------------
# validation


def _dupes(ids: Iterable[str]) -> list[str]:
    seen: set[str] = set()
    out = []
    for i in ids:
        if i in seen and i not in out:
            out.append(i)
        seen.add(i)
    return out


def validate(instance: IEGSInstance) -> list[str]:
    """Return one diagnostic per violated invariant (empty when valid)."""
    out: list[str] = []
    pw, gs = instance.power, instance.gas
    pnodes = set(pw.nodes)
    gnodes = {n.id for n in gs.nodes}

    for kind, ids in (
        ("power node", pw.nodes),
        ("line", [l.id for l in pw.lines]),
        ("generator", [g.id for g in pw.generators]),
        ("power load", [d.id for d in pw.loads]),
        ("gas node", [n.id for n in gs.nodes]),
        ("well", [w.id for w in gs.wells]),
        ("pipeline", [p.id for p in gs.pipelines]),
        ("compressor", [c.id for c in gs.compressors]),
        ("gas load", [d.id for d in gs.loads]),
        ("p2g facility", [f.id for f in instance.p2g]),
    ):
        for d in _dupes(ids):
            out.append(f"duplicate {kind} id {d!r}")

    if pw.slack not in pnodes:
        out.append(f"slack node {pw.slack!r} is not a power node")
    for l in pw.lines:
        for end in (l.from_node, l.to_node):
            if end not in pnodes:
                out.append(f"line {l.id}: endpoint {end!r} is not a power node")
        if not l.limit > 0:
            out.append(f"line {l.id}: limit must be > 0")
        if l.reactance is not None and not l.reactance > 0:
            out.append(f"line {l.id}: reactance must be > 0")
        if l.reactance is None and l.ptdf is None:
            out.append(f"line {l.id}: needs a reactance or explicit ptdf")
        if l.ptdf is not None:
            for node in l.ptdf:
                if node not in pnodes:
                    out.append(f"line {l.id}: ptdf references unknown node {node!r}")
    for g in pw.generators:
        if g.node not in pnodes:
            out.append(f"generator {g.id}: node {g.node!r} is not a power node")
        if g.p_min > g.p_max:
            out.append(f"generator {g.id}: p_min > p_max")
        if g.p_min < 0:
            out.append(f"generator {g.id}: p_min must be >= 0")
        if g.cost < 0:
            out.append(f"generator {g.id}: cost must be >= 0")
        if g.gas_fired:
            if g.gas_node not in gnodes:
                out.append(f"generator {g.id}: gas node {g.gas_node!r} does not exist")
            if not g.gamma > 0:
                out.append(f"generator {g.id}: conversion ratio gamma must be > 0")
    for d in pw.loads:
        if d.node not in pnodes:
            out.append(f"power load {d.id}: node {d.node!r} is not a power node")
        if d.demand < 0 or d.shed_cost < 0:
            out.append(f"power load {d.id}: demand and shed cost must be >= 0")

    for n in gs.nodes:
        if not 0 <= n.pi_min <= n.pi_max:
            out.append(f"gas node {n.id}: need 0 <= pi_min <= pi_max")
    for w in gs.wells:
        if w.node not in gnodes:
            out.append(f"well {w.id}: node {w.node!r} is not a gas node")
        if w.cost < 0 or w.capacity < 0:
            out.append(f"well {w.id}: cost and capacity must be >= 0")
    for p in gs.pipelines:
        for end in (p.from_node, p.to_node):
            if end not in gnodes:
                out.append(f"pipeline {p.id}: endpoint {end!r} is not a gas node")
        if not p.weymouth > 0:
            out.append(f"pipeline {p.id}: Weymouth constant must be > 0")
        if not p.limit > 0:
            out.append(f"pipeline {p.id}: limit must be > 0")
        if p.baseline_flow is not None and abs(p.baseline_flow) > p.limit:
            out.append(f"pipeline {p.id}: |baseline_flow| exceeds the limit")
    for c in gs.compressors:
        for end in (c.from_node, c.to_node):
            if end not in gnodes:
                out.append(f"compressor {c.id}: endpoint {end!r} is not a gas node")
        if c.ratio < 1:
            out.append(f"compressor {c.id}: compression ratio must be >= 1")
        if c.limit < 0:
            out.append(f"compressor {c.id}: limit must be >= 0")
    for d in gs.loads:
        if d.node not in gnodes:
            out.append(f"gas load {d.id}: node {d.node!r} is not a gas node")
        if d.demand < 0 or d.shed_cost < 0:
            out.append(f"gas load {d.id}: demand and shed cost must be >= 0")
    for f in instance.p2g:
        if f.power_node not in pnodes:
            out.append(f"p2g {f.id}: power node {f.power_node!r} does not exist")
        if f.gas_node not in gnodes:
            out.append(f"p2g {f.id}: gas node {f.gas_node!r} does not exist")
        if not f.ratio > 0:
            out.append(f"p2g {f.id}: conversion ratio must be > 0")
        if f.capacity < 0:
            out.append(f"p2g {f.id}: capacity must be >= 0")

    a = instance.attack
    if a.tau_p < 0:
        out.append("attack.tau_p must be >= 0")
    if a.tau_g < 0:
        out.append("attack.tau_g must be >= 0")
    if a.budget is not None and a.budget < 0:
        out.append("attack.budget must be >= 0")
    if instance.segments < 2 or instance.segments % 2:
        out.append(f"pwl.segments must be even and >= 2 (got {instance.segments})")
    if len(pw.loads) < 2 and len(gs.loads) < 2:
        out.append("need at least two power loads or two gas loads for a non-zero attack")
    if not out and pw.lines and not all(l.ptdf is not None for l in pw.lines):
        if not _connected(pw.nodes, [(l.from_node, l.to_node) for l in pw.lines]):
            out.append("power network is disconnected")
    if not out and gs.nodes:
        edges = [(p.from_node, p.to_node) for p in gs.pipelines]
        edges += [(c.from_node, c.to_node) for c in gs.compressors]
        edges += [(f.gas_node, f.gas_node) for f in instance.p2g]
        if not _connected([n.id for n in gs.nodes], edges):
            out.append("gas network is disconnected")
    return out


def _connected(nodes: Iterable[str], edges: Iterable[tuple[str, str]]) -> bool:
    nodes = list(nodes)
    if not nodes:
        return True
    adj: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = {nodes[0]}
    todo = deque([nodes[0]])
    while todo:
        n = todo.popleft()
        for m in adj[n]:
            if m not in seen:
                seen.add(m)
                todo.append(m)
    return len(seen) == len(nodes)


# ---------------------------------------------------------------------------
# PTDF


def build_ptdf(power: PowerSystem) -> PtdfMatrix:
    """Power transfer distribution factors (lines x nodes).

    Entry ``[l, k]`` is the flow on line ``l`` when 1 MW is injected at node
    ``k`` and withdrawn at the slack.  Explicit per-line factors in the
    instance take precedence over reactance-derived ones.
    """
    nodes = power.nodes
    idx = power.node_index
    L, N = len(power.lines), len(nodes)
    if power.slack not in idx:
        raise NetworkError(f"slack node {power.slack!r} is not a power node")
    if L and all(l.ptdf is not None for l in power.lines):
        mat = np.zeros((L, N))
        for i, l in enumerate(power.lines):
            for node, v in l.ptdf.items():
                mat[i, idx[node]] = v
        mat[:, idx[power.slack]] = 0.0
        return PtdfMatrix(mat, nodes, power.slack)
    if any(l.reactance is None for l in power.lines):
        raise NetworkError("PTDF construction needs a reactance on every line")
    if not _connected(nodes, [(l.from_node, l.to_node) for l in power.lines]):
        raise NetworkError("power network is disconnected")
    inc = np.zeros((L, N))
    for i, l in enumerate(power.lines):
        inc[i, idx[l.from_node]] = 1.0
        inc[i, idx[l.to_node]] = -1.0
    b_line = np.diag([1.0 / l.reactance for l in power.lines]) if L else np.zeros((0, 0))
    bbus = inc.T @ b_line @ inc
    keep = [k for k in range(N) if k != idx[power.slack]]
    red = bbus[np.ix_(keep, keep)]
    mat = np.zeros((L, N))
    if keep:
        if np.linalg.matrix_rank(red) < len(keep):
            raise NetworkError("singular reduced susceptance matrix")
        theta = np.linalg.solve(red, np.eye(len(keep)))
        mat[:, keep] = b_line @ inc[:, keep] @ theta
    mat[np.abs(mat) < 1e-14] = 0.0
    return PtdfMatrix(mat, nodes, power.slack)


def dc_flows(power: PowerSystem, injections: np.ndarray) -> np.ndarray:
    """Line flows for a balanced nodal injection vector by a direct B-theta solve."""
    idx = power.node_index
    N = len(power.nodes)
    inc = np.zeros((len(power.lines), N))
    for i, l in enumerate(power.lines):
        inc[i, idx[l.from_node]] = 1.0
        inc[i, idx[l.to_node]] = -1.0
    b_line = np.diag([1.0 / l.reactance for l in power.lines])
    bbus = inc.T @ b_line @ inc
    keep = [k for k in range(N) if k != idx[power.slack]]
    theta = np.zeros(N)
    theta[keep] = np.linalg.solve(bbus[np.ix_(keep, keep)], np.asarray(injections)[keep])
    return b_line @ inc @ theta


# ---------------------------------------------------------------------------
# serialization


def instance_to_dict(instance: IEGSInstance) -> dict[str, Any]:
    pw, gs = instance.power, instance.gas

    def line(l: Line) -> dict[str, Any]:
        out: dict[str, Any] = {"id": l.id, "from": l.from_node, "to": l.to_node, "limit": l.limit}
        if l.reactance is not None:
            out["reactance"] = l.reactance
        if l.ptdf is not None:
            out["ptdf"] = dict(l.ptdf)
        return out

    def gen(g: Generator) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": g.id,
            "node": g.node,
            "cost": g.cost,
            "p_min": g.p_min,
            "p_max": g.p_max,
            "kind": g.kind,
        }
        if g.gas_fired:
            out["gamma"] = g.gamma
            out["gas_node"] = g.gas_node
        return out

    def pipe(p: Pipeline) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": p.id,
            "from": p.from_node,
            "to": p.to_node,
            "weymouth": p.weymouth,
            "limit": p.limit,
        }
        if p.baseline_flow is not None:
            out["baseline_flow"] = p.baseline_flow
        return out

    return {
        "name": instance.name,
        "power": {
            "nodes": list(pw.nodes),
            "slack": pw.slack,
            "lines": [line(l) for l in pw.lines],
            "generators": [gen(g) for g in pw.generators],
            "loads": [
                {"id": d.id, "node": d.node, "demand": d.demand, "shed_cost": d.shed_cost}
                for d in pw.loads
            ],
        },
        "gas": {
            "nodes": [{"id": n.id, "pi_min": n.pi_min, "pi_max": n.pi_max} for n in gs.nodes],
            "wells": [
                {"id": w.id, "node": w.node, "cost": w.cost, "capacity": w.capacity}
                for w in gs.wells
            ],
            "pipelines": [pipe(p) for p in gs.pipelines],
            "compressors": [
                {"id": c.id, "from": c.from_node, "to": c.to_node, "ratio": c.ratio, "limit": c.limit}
                for c in gs.compressors
            ],
            "loads": [
                {"id": d.id, "node": d.node, "demand": d.demand, "shed_cost": d.shed_cost}
                for d in gs.loads
            ],
        },
        "p2g": [
            {
                "id": f.id,
                "power_node": f.power_node,
                "gas_node": f.gas_node,
                "ratio": f.ratio,
                "capacity": f.capacity,
            }
            for f in instance.p2g
        ],
        "attack": {
            "tau_p": instance.attack.tau_p,
            "tau_g": instance.attack.tau_g,
            "budget": instance.attack.budget,
        },
        "pwl": {"segments": instance.segments},
    }


def dump_instance(instance: IEGSInstance) -> str:
    return json.dumps(instance_to_dict(instance), indent=2)
