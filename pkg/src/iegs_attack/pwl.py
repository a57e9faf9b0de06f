"""Incremental piecewise-linear model of the Weymouth term f(g) = g|g|.

Flow on a pipeline with limit G is written as ``g = X^0 + sum_k t_k`` with
fill variables ``t_k in [0, X^k - X^{k-1}]`` and ordering binaries
``sigma_k`` (k = 1..K-1)::

    t_1 <= len_1
    t_k >= len_k * sigma_k            k = 1..K-1
    t_{k+1} <= len_{k+1} * sigma_k    k = 1..K-1
    t_K >= 0

so a segment is only opened once every segment to its left is full.  The
approximated value is ``f(X^0) + sum_k slope_k t_k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .milp.model import Model


def weymouth(g):
    g = np.asarray(g, dtype=float)
    return g * np.abs(g)


@dataclass(frozen=True)
class PwlScheme:
    breakpoints: np.ndarray  # K + 1 points from -G to +G
    slopes: np.ndarray  # K
    offsets: np.ndarray  # f at the left end of each segment

    @property
    def segments(self) -> int:
        return len(self.slopes)

    @property
    def limit(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def segment_of(self, g: float) -> int:
        """Index (0-based) of the segment containing ``g``; right-closed except at the top."""
        k = int(np.searchsorted(self.breakpoints, g, side="right")) - 1
        return min(max(k, 0), self.segments - 1)

    def evaluate(self, g):
        """Interpolated value f_hat(g) for scalar or array ``g`` within the limits."""
        return np.interp(g, self.breakpoints, weymouth(self.breakpoints))

    def fill(self, g: float) -> tuple[np.ndarray, np.ndarray]:
        """Fill variables ``t`` and ordering binaries ``sigma`` representing ``g``."""
        lens = self.lengths
        t = np.clip(g - self.breakpoints[:-1], 0.0, lens)
        j = self.segment_of(g)
        sigma = np.zeros(self.segments - 1)
        sigma[:j] = 1.0
        return t, sigma

    def sigma_for_segment(self, j: int) -> np.ndarray:
        sigma = np.zeros(self.segments - 1)
        sigma[:j] = 1.0
        return sigma


def build_scheme(limit: float, segments: int) -> PwlScheme:
    """Uniform breakpoints over ``[-limit, limit]``; ``segments`` must be even."""
    if not limit > 0:
        raise ValueError("flow limit must be > 0")
    if segments < 2 or segments % 2:
        raise ValueError(f"segment count must be even and >= 2, got {segments}")
    bp = np.linspace(-limit, limit, segments + 1)
    bp[segments // 2] = 0.0
    vals = weymouth(bp)
    slopes = np.diff(vals) / np.diff(bp)
    return PwlScheme(bp, slopes, vals[:-1])


def sigma_is_ordered(sigma) -> bool:
    """True when the binaries are a prefix of ones (a segment choice the block admits)."""
    s = np.asarray(sigma).round().astype(int)
    return bool(np.all(np.diff(s) <= 0))


def segment_from_sigma(sigma) -> int:
    return int(np.asarray(sigma).round().sum())


@dataclass(frozen=True)
class PwlBlock:
    """Column ids of one incremental block inside a :class:`Model`."""

    scheme: PwlScheme
    flow: int
    value: int
    t: np.ndarray
    sigma: np.ndarray
    rows: np.ndarray

    def assert_ordering(self, x: np.ndarray, tol: float = 1e-7) -> None:
        """Check that open segments are preceded by full ones at ``x``."""
        lens = self.scheme.lengths
        s = np.round(x[self.sigma])
        for k in range(len(s)):
            if s[k] == 1:
                if not np.all(x[self.t[: k + 1]] >= lens[: k + 1] - tol):
                    raise AssertionError(f"segment ordering broken at sigma_{k + 1}")


def add_block(model: Model, scheme: PwlScheme, flow: int, value: int, name: str = "pwl", relax: bool = False) -> PwlBlock:
    """Append the incremental encoding tying ``flow`` and ``value`` columns.

    With ``relax`` the ordering variables are continuous in [0, 1]; the
    resulting polytope is not the PWL graph (used to show the binaries matter).
    """
    K = scheme.segments
    lens = scheme.lengths
    t = model.add_vars(f"{name}.t", K, lb=-np.inf, ub=np.inf)
    sigma = (
        model.add_vars(f"{name}.sigma", K - 1, lb=0.0, ub=1.0)
        if relax
        else model.add_vars(f"{name}.sigma", K - 1, binary=True)
    )
    rows = []
    # g = X0 + sum t
    rows.append(model.add_row([flow, *t], [1.0] + [-1.0] * K, "==", scheme.breakpoints[0], f"{name}.flow"))
    rows.append(
        model.add_row([value, *t], [1.0, *(-scheme.slopes)], "==", scheme.offsets[0], f"{name}.value")
    )
    rows.append(model.add_row([t[0]], [1.0], "<=", lens[0], f"{name}.fill"))
    for k in range(K - 1):
        rows.append(model.add_row([t[k], sigma[k]], [1.0, -lens[k]], ">=", 0.0, f"{name}.fill"))
        rows.append(model.add_row([t[k + 1], sigma[k]], [1.0, -lens[k + 1]], "<=", 0.0, f"{name}.fill"))
    rows.append(model.add_row([t[K - 1]], [1.0], ">=", 0.0, f"{name}.fill"))
    return PwlBlock(scheme, flow, value, t, sigma, np.array(rows))


def build_block(scheme: PwlScheme, name: str = "pwl") -> tuple[Model, PwlBlock]:
    """Stand-alone model holding only a flow column, a value column and the block."""
    m = Model(name)
    g = m.add_var("g", -scheme.limit, scheme.limit)
    f = m.add_var("f_hat", -np.inf, np.inf)
    return m, add_block(m, scheme, g, f, name)


@dataclass(frozen=True)
class ErrorReport:
    max_error: float  # max |g|g| - f_hat(g)|
    max_pressure_error: float  # max_error / W
    min_error: float
    per_segment: np.ndarray
    argmax: np.ndarray  # location of the largest deviation per segment


def error_bound(scheme: PwlScheme, weymouth_constant: float = 1.0) -> ErrorReport:
    """Largest secant deviation of g|g| per segment, and overall.

    On a segment of one sign f is a quadratic ``±g^2``, whose deviation from
    the chord between ``a`` and ``b`` peaks at the midpoint with value
    ``(b - a)^2 / 4``.  Segments never straddle 0 because 0 is a breakpoint.
    """
    a = scheme.breakpoints[:-1]
    b = scheme.breakpoints[1:]
    per_seg = (b - a) ** 2 / 4.0
    mid = (a + b) / 2.0
    m = float(per_seg.max())
    at_bp = float(np.max(np.abs(weymouth(scheme.breakpoints) - scheme.evaluate(scheme.breakpoints))))
    return ErrorReport(m, m / weymouth_constant, at_bp, per_seg, mid)


def report_rows(scheme: PwlScheme, weymouth_constant: float = 1.0) -> list[dict]:
    err = error_bound(scheme, weymouth_constant)
    bp_err = np.abs(weymouth(scheme.breakpoints) - scheme.evaluate(scheme.breakpoints))
    return [
        {
            "segment": k + 1,
            "left": float(scheme.breakpoints[k]),
            "right": float(scheme.breakpoints[k + 1]),
            "slope": float(scheme.slopes[k]),
            "max_error": float(err.per_segment[k]),
            "max_pressure_error": float(err.per_segment[k] / weymouth_constant),
            "breakpoint_error": float(max(bp_err[k], bp_err[k + 1])),
        }
        for k in range(scheme.segments)
    ]
