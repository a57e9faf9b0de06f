"""LP dualization, big-M complementarity linearization and KKT blocks of the
lower-level dispatch problem."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Model

AUDIT_TOL = 1e-6


def dualize(E: np.ndarray, h: np.ndarray, c: np.ndarray) -> Model:
    """Dual of ``min c'y s.t. E y <= h`` (``y`` free).

    With multipliers ``mu >= 0`` on the rows the dual reads
    ``max -h'mu s.t. E' mu + c = 0``; both optima coincide whenever the primal
    is feasible and bounded.
    """
    E = np.atleast_2d(np.asarray(E, dtype=float))
    h = np.asarray(h, dtype=float)
    c = np.asarray(c, dtype=float)
    m = Model("dual")
    mu = m.add_vars("mu", E.shape[0], lb=0.0)
    m.add_rows(E.T, mu, "==", -c, "stationarity")
    m.set_objective(mu, -h, maximize=True)
    return m


def primal_row_form(E, h, c) -> Model:
    E = np.atleast_2d(np.asarray(E, dtype=float))
    m = Model("primal")
    y = m.add_vars("y", E.shape[1], lb=-np.inf, ub=np.inf)
    m.add_rows(E, y, "<=", h, "row")
    m.set_objective(y, c)
    return m


@dataclass
class ComplementarityPair:
    """``dual * slack = 0`` with ``slack = const + coefs . v``."""

    dual: int
    cols: np.ndarray
    coefs: np.ndarray
    const: float
    m_dual: float
    m_slack: float
    binary: int = -1
    tag: str = ""
    exact_slack: bool = False  # m_slack is a valid interval bound, not a guess

    def slack_value(self, v: np.ndarray) -> float:
        return float(self.const + self.coefs @ v[self.cols])


def linearize_complementarity(model: Model, pairs: list[ComplementarityPair], name: str = "cmp") -> list[ComplementarityPair]:
    """Per pair add binary ``b`` with ``dual <= M_d b`` and ``slack <= M_s (1 - b)``."""
    for k, pr in enumerate(pairs):
        b = model.add_var(f"{name}.b[{k}]", binary=True)
        pr.binary = b
        model.add_row([pr.dual, b], [1.0, -pr.m_dual], "<=", 0.0, f"{name}.dual")
        model.add_row([*pr.cols, b], [*pr.coefs, pr.m_slack], "<=", pr.m_slack - pr.const, f"{name}.slack")
    return pairs


@dataclass
class AuditHit:
    block: str
    which: str  # "dual" or "slack"
    value: float
    bound: float


def audit_pairs(pairs: list[ComplementarityPair], v: np.ndarray, block: str = "") -> list[AuditHit]:
    """Pairs whose dual or slack sits within AUDIT_TOL of its big-M bound."""
    hits = []
    for pr in pairs:
        dv = float(v[pr.dual])
        if pr.m_dual > 0 and dv >= pr.m_dual - AUDIT_TOL:
            hits.append(AuditHit(block or pr.tag, "dual", dv, pr.m_dual))
        sv = pr.slack_value(v)
        if pr.m_slack > 0 and not pr.exact_slack and sv >= pr.m_slack - AUDIT_TOL:
            hits.append(AuditHit(block or pr.tag, "slack", sv, pr.m_slack))
    return hits


def row_slack_bounds(E, D, F, d, z, y_lo, y_hi, x_lo, x_hi) -> tuple[np.ndarray, np.ndarray]:
    """Interval bounds of ``d - F z - E y - D x`` over the boxes.

    Returns (max slack, max violation) per row; violation is ``max(0, -min slack)``.
    """
    h = d - F @ np.asarray(z, dtype=float)
    ey_min = np.minimum(E * y_lo, E * y_hi).sum(axis=1)
    ey_max = np.maximum(E * y_lo, E * y_hi).sum(axis=1)
    dx_min = np.minimum(D * x_lo, D * x_hi).sum(axis=1) if D.size else np.zeros(len(h))
    dx_max = np.maximum(D * x_lo, D * x_hi).sum(axis=1) if D.size else np.zeros(len(h))
    smax = h - ey_min - dx_min
    smin = h - ey_max - dx_max
    return smax, np.maximum(0.0, -smin)


@dataclass
class KKTBlock:
    name: str
    kind: str  # "mu" or "nu"
    z: tuple
    y: np.ndarray
    dual: np.ndarray
    s: np.ndarray | None
    pairs: list[ComplementarityPair] = field(default_factory=list)
    penalty_pairs: list[ComplementarityPair] = field(default_factory=list)
    rho: np.ndarray | None = None

    def value(self, v: np.ndarray, c: np.ndarray) -> float:
        val = float(c @ v[self.y])
        if self.s is not None:
            val += float(self.rho @ v[self.s])
        return val

    def slack_total(self, v: np.ndarray) -> float:
        return 0.0 if self.s is None else float(np.sum(v[self.s]))


def add_kkt_block(
    model: Model,
    compact,
    x_cols: np.ndarray,
    z,
    kind: str,
    name: str,
    m_dual: float,
    big_m: float,
    big_m_cap: float,
    rho=None,
    y_cols: np.ndarray | None = None,
) -> KKTBlock:
    """Optimality conditions of the dispatch LP at fixed commitment ``z``.

    ``kind == "mu"``: primal rows, ``E' mu + c = 0``, ``mu >= 0`` and
    complementarity.  Rows of an equality pair are always tight, so their
    complementarity needs no binary.

    ``kind == "nu"``: the penalized relaxation with row slacks ``s >= 0``,
    multipliers ``0 <= v <= rho`` and the extra condition ``(rho - v) s = 0``.
    """
    z = np.asarray(z, dtype=float)
    E, D, F, d, c = compact.E, compact.D, compact.F, compact.d, compact.c
    p, q = E.shape
    h = d - F @ z
    nu = kind == "nu"
    smax, viol = row_slack_bounds(E, D, F, d, z, compact.y_lo, compact.y_hi, compact.x_lo, compact.x_hi)
    if nu:
        rho = np.broadcast_to(np.asarray(rho, dtype=float), (p,)).copy()
    y = model.add_vars(f"{name}.y", q, lb=-np.inf, ub=np.inf) if y_cols is None else np.asarray(y_cols)
    dual = model.add_vars(f"{name}.dual", p, lb=0.0, ub=rho if nu else np.inf)
    s = None
    if nu:
        s = model.add_vars(f"{name}.s", p, lb=0.0, ub=viol)
    x_cols = np.asarray(x_cols)
    pairs = []
    pen_pairs = []
    for i in range(p):
        ye = np.flatnonzero(E[i])
        xd = np.flatnonzero(D[i]) if D.shape[1] else np.zeros(0, dtype=int)
        cols = [*y[ye], *x_cols[xd]]
        coefs = [*E[i, ye], *D[i, xd]]
        if nu:
            cols.append(s[i])
            coefs.append(-1.0)
        model.add_row(cols, coefs, "<=", h[i], f"{name}.primal")
        if not nu and compact.pair[i] >= 0:
            continue
        bound = smax[i] + (viol[i] if nu else 0.0)
        m_row = min(max(bound, big_m), big_m_cap)
        md = rho[i] if nu else min(max(m_dual, big_m), big_m_cap)
        pairs.append(
            ComplementarityPair(
                int(dual[i]),
                np.array(cols, dtype=np.int64),
                -np.array(coefs, dtype=float),
                float(h[i]),
                float(md),
                float(m_row),
                tag=f"{name}.row{i}",
                exact_slack=bool(m_row >= bound),
            )
        )
        if nu and viol[i] > 0:
            # (rho - v) s = 0 : s <= viol * b2, rho - v <= rho (1 - b2)
            pen_pairs.append((i, viol[i]))
    for j in range(q):
        nz = np.flatnonzero(E[:, j])
        model.add_row(dual[nz], E[nz, j], "==", -c[j], f"{name}.stationarity")
    linearize_complementarity(model, pairs, f"{name}.cmp")
    pp = []
    for i, vmax in pen_pairs:
        b = model.add_var(f"{name}.pen.b[{i}]", binary=True)
        model.add_row([s[i], b], [1.0, -vmax], "<=", 0.0, f"{name}.pen")
        model.add_row([dual[i], b], [-1.0, rho[i]], "<=", 0.0, f"{name}.pen")
        pp.append(
            ComplementarityPair(int(s[i]), np.array([dual[i]]), np.array([-1.0]), float(rho[i]), float(vmax), float(rho[i]), b)
        )
    return KKTBlock(name, kind, tuple(int(v) for v in z), y, dual, s, pairs, pp, rho if nu else None)


def equality_row_pairs(A: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Partner index for consecutive rows forming ``A_i = -A_{i+1}``, ``a_i = -a_{i+1}``."""
    pair = np.full(A.shape[0], -1, dtype=int)
    i = 0
    while i + 1 < A.shape[0]:
        if np.allclose(A[i], -A[i + 1]) and np.isclose(a[i], -a[i + 1]):
            pair[i], pair[i + 1] = i + 1, i
            i += 2
        else:
            i += 1
    return pair
