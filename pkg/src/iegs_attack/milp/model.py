"""Solver-neutral linear / mixed-binary model builder."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np
import scipy.sparse as sp

INF = np.inf

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"


class ModelError(ValueError):
    pass


class Model:
    """Variables, sparse linear rows and a linear objective.

    Rows are stored in coordinate form and carry a sense (``<=``, ``>=`` or
    ``==``) and an optional tag used for diagnostics.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.binary: list[bool] = []
        self._ri: list[int] = []
        self._ci: list[int] = []
        self._vals: list[float] = []
        self.senses: list[str] = []
        self.rhs: list[float] = []
        self.row_tags: list[str] = []
        self.obj = {}
        self.obj_const = 0.0
        self.maximize = False

    # -- variables --------------------------------------------------------
    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.senses)

    def add_var(self, name: str, lb: float = 0.0, ub: float = INF, binary: bool = False) -> int:
        if binary:
            lb, ub = 0.0, 1.0
        if lb > ub:
            raise ModelError(f"variable {name}: lb > ub")
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.binary.append(bool(binary))
        return len(self.var_names) - 1

    def add_vars(self, prefix: str, count: int, lb=0.0, ub=INF, binary: bool = False) -> np.ndarray:
        lbs = np.broadcast_to(np.asarray(lb, dtype=float), (count,))
        ubs = np.broadcast_to(np.asarray(ub, dtype=float), (count,))
        return np.array(
            [self.add_var(f"{prefix}[{i}]", lbs[i], ubs[i], binary) for i in range(count)],
            dtype=np.int64,
        )

    def fix(self, col: int, value: float) -> None:
        self.lb[col] = self.ub[col] = float(value)

    # -- rows -------------------------------------------------------------
    def add_row(self, cols: Sequence[int], coefs: Sequence[float], sense: str, rhs: float, tag: str = "") -> int:
        if sense not in ("<=", ">=", "=="):
            raise ModelError(f"bad sense {sense!r}")
        r = len(self.senses)
        n = self.n_vars
        for c, v in zip(cols, coefs):
            if not 0 <= c < n:
                raise ModelError(f"row {tag or r}: column {c} is not a declared variable")
            if v != 0.0:
                self._ri.append(r)
                self._ci.append(int(c))
                self._vals.append(float(v))
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.row_tags.append(tag)
        return r

    def add_rows(self, matrix, cols: Sequence[int], sense: str, rhs, tag: str = "") -> np.ndarray:
        """Add ``matrix @ v[cols] (sense) rhs`` row by row from a dense block."""
        mat = np.atleast_2d(np.asarray(matrix, dtype=float))
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), (mat.shape[0],))
        cols = np.asarray(cols, dtype=np.int64)
        if mat.shape[1] != cols.size:
            raise ModelError(f"{tag}: block has {mat.shape[1]} columns, got {cols.size} ids")
        out = []
        for i in range(mat.shape[0]):
            nz = np.flatnonzero(mat[i])
            out.append(self.add_row(cols[nz], mat[i, nz], sense, rhs[i], tag))
        return np.array(out, dtype=np.int64)

    # -- objective --------------------------------------------------------
    def set_objective(self, cols: Iterable[int], coefs: Iterable[float], maximize: bool = False, constant: float = 0.0):
        self.obj = {}
        for c, v in zip(cols, coefs):
            self.obj[int(c)] = self.obj.get(int(c), 0.0) + float(v)
        self.maximize = maximize
        self.obj_const = float(constant)

    # -- views ------------------------------------------------------------
    def matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self._vals, (self._ri, self._ci)), shape=(self.n_rows, self.n_vars)
        )

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for k, v in self.obj.items():
            c[k] = v
        return c

    def arrays(self):
        """``(c, A, senses, rhs, lb, ub, binary)`` as numpy / scipy arrays."""
        return (
            self.cost_vector(),
            self.matrix(),
            np.array(self.senses, dtype=object),
            np.array(self.rhs, dtype=float),
            np.array(self.lb, dtype=float),
            np.array(self.ub, dtype=float),
            np.array(self.binary, dtype=bool),
        )

    @property
    def n_binary(self) -> int:
        return int(sum(self.binary))

    def is_mip(self) -> bool:
        return any(self.binary)

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.cost_vector() @ x) + self.obj_const

    def max_violation(self, x: np.ndarray) -> float:
        """Largest violation of any row or bound at ``x``."""
        A = self.matrix()
        ax = A @ x if self.n_rows else np.zeros(0)
        rhs = np.array(self.rhs)
        viol = 0.0
        for k, s in enumerate(self.senses):
            if s == "<=":
                viol = max(viol, ax[k] - rhs[k])
            elif s == ">=":
                viol = max(viol, rhs[k] - ax[k])
            else:
                viol = max(viol, abs(ax[k] - rhs[k]))
        lb, ub = np.array(self.lb), np.array(self.ub)
        if self.n_vars:
            viol = max(viol, float(np.max(lb - x)), float(np.max(x - ub)))
        return float(viol)

    def export_triplets(self, out: TextIO | None = None) -> str:
        """Sparse text export: header lines, then ``row col value`` per nonzero.

        Values use 12 significant digits.  Objective coefficients are written
        with row id ``obj``; row senses and right-hand sides follow as
        ``rhs <row> <sense> <value>`` lines, bounds as ``bnd <col> <lb> <ub> <C|B>``.
        """
        buf = io.StringIO()
        buf.write(f"# {self.name} rows={self.n_rows} cols={self.n_vars}\n")
        buf.write(f"sense {'max' if self.maximize else 'min'}\n")
        for c in sorted(self.obj):
            buf.write(f"obj {c} {self.obj[c]:.12g}\n")
        A = self.matrix().tocoo()
        order = np.lexsort((A.col, A.row))
        for k in order:
            buf.write(f"{A.row[k]} {A.col[k]} {A.data[k]:.12g}\n")
        for r, (s, v) in enumerate(zip(self.senses, self.rhs)):
            buf.write(f"rhs {r} {s} {v:.12g}\n")
        for c in range(self.n_vars):
            kind = "B" if self.binary[c] else "C"
            buf.write(f"bnd {c} {self.lb[c]:.12g} {self.ub[c]:.12g} {kind}\n")
        text = buf.getvalue()
        if out is not None:
            out.write(text)
        return text


@dataclass
class Solution:
    status: str
    x: np.ndarray | None = None
    objective: float = float("nan")
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    iterations: int = 0
    nodes: int = 0
    bound: float = float("nan")
    backend: str = ""
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def __getitem__(self, cols):
        return self.x[cols]


def dual_objective(model: Model, duals: np.ndarray, reduced: np.ndarray) -> float:
    """Lagrangian dual value of an LP for the given row duals and reduced costs.

    Uses the convention ``dual = d(obj)/d(rhs)`` of the minimization form.
    """
    lb, ub = np.array(model.lb), np.array(model.ub)
    val = float(np.dot(model.rhs, duals)) if model.n_rows else 0.0
    for j, dj in enumerate(reduced):
        if dj > 0:
            val += dj * lb[j] if np.isfinite(lb[j]) else (np.inf if dj > 1e-9 else 0.0)
        elif dj < 0:
            val += dj * ub[j] if np.isfinite(ub[j]) else (-np.inf if dj < -1e-9 else 0.0)
    return val
