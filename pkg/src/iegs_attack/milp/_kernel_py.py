"""Pure numpy pivot loop for the bounded-variable primal simplex.

Mirrors ``_kernel.pyx`` line for line; used when the compiled extension is
unavailable.  See ``simplex.py`` for the tableau layout.
"""

import numpy as np

OPTIMAL, UNBOUNDED, ITERATION_LIMIT = 0, 1, 2
BASIC, AT_LOWER, AT_UPPER, FREE_ZERO = 0, 1, 2, 3


def _nonbasic_value(state, lo, up, j):
    s = state[j]
    if s == AT_LOWER:
        return lo[j]
    if s == AT_UPPER:
        return up[j]
    return 0.0


def run_simplex(T, basis, state, lo, up, xb, max_iter, tol, bland_after):
    """Pivot until optimal, unbounded, or out of iterations.

    ``T`` has ``m`` constraint rows followed by the reduced-cost row and is
    updated in place, as are ``basis``, ``state`` and ``xb``.  Pricing is
    Dantzig's rule until ``bland_after`` consecutive degenerate pivots have
    been made, then Bland's smallest-index rule for the rest of the call.
    Returns ``(status, iterations)``.
    """
    m = T.shape[0] - 1
    ncol = T.shape[1]
    d = T[m]
    degenerate = 0
    bland = bland_after <= 0
    it = 0
    while it < max_iter:
        # pricing
        improve_up = (d < -tol) & ((state == AT_LOWER) | (state == FREE_ZERO))
        improve_dn = (d > tol) & ((state == AT_UPPER) | (state == FREE_ZERO))
        cand = np.flatnonzero(improve_up | improve_dn)
        if cand.size == 0:
            return OPTIMAL, it
        if bland:
            j = int(cand[0])
        else:
            j = int(cand[np.argmax(np.abs(d[cand]))])
        direction = 1.0 if improve_up[j] else -1.0

        # ratio test
        col = T[:m, j] * direction
        theta = up[j] - lo[j]
        leave = -1
        leave_to = AT_LOWER
        best_var = ncol
        for i in np.flatnonzero(np.abs(col) > tol):
            a = col[i]
            b = basis[i]
            if a > 0:
                if lo[b] == -np.inf:
                    continue
                r = (xb[i] - lo[b]) / a
                to = AT_LOWER
            else:
                if up[b] == np.inf:
                    continue
                r = (up[b] - xb[i]) / (-a)
                to = AT_UPPER
            if r < 0:
                r = 0.0
            if r < theta - 1e-12 or (abs(r - theta) <= 1e-12 and leave >= 0 and b < best_var):
                theta = r
                leave = int(i)
                leave_to = to
                best_var = b
        if theta == np.inf:
            return UNBOUNDED, it

        start = _nonbasic_value(state, lo, up, j)
        if theta > 0:
            xb -= theta * col
            degenerate = 0
        else:
            degenerate += 1
            if bland_after > 0 and degenerate >= bland_after:
                bland = True

        if leave < 0:
            # bound flip, basis unchanged
            state[j] = AT_UPPER if direction > 0 else AT_LOWER
            it += 1
            continue

        b = basis[leave]
        state[b] = leave_to
        state[j] = BASIC
        basis[leave] = j
        xb[leave] = start + direction * theta

        prow = T[leave] / T[leave, j]
        pc = T[:, j].copy()
        pc[leave] = 0.0
        T -= np.outer(pc, prow)
        T[leave] = prow
        it += 1
    return ITERATION_LIMIT, it
