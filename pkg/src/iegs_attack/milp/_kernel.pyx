# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pivot loop for the bounded-variable primal simplex.

Same contract as ``_kernel_py.run_simplex``.
"""

from libc.math cimport fabs, INFINITY

cdef enum:
    OPTIMAL = 0
    UNBOUNDED = 1
    ITERATION_LIMIT = 2

cdef enum:
    BASIC = 0
    AT_LOWER = 1
    AT_UPPER = 2
    FREE_ZERO = 3


def run_simplex(double[:, ::1] T, long[::1] basis, signed char[::1] state,
                double[::1] lo, double[::1] up, double[::1] xb,
                long max_iter, double tol, long bland_after):
    cdef Py_ssize_t m = T.shape[0] - 1
    cdef Py_ssize_t ncol = T.shape[1]
    cdef Py_ssize_t i, k, j, leave
    cdef long it = 0, degenerate = 0, b, best_var
    cdef bint bland = bland_after <= 0
    cdef double dj, best, direction, theta, a, r, start, piv, f
    cdef signed char s, leave_to, to
    cdef bint up_ok, dn_ok

    while it < max_iter:
        # pricing
        j = -1
        best = 0.0
        direction = 0.0
        for k in range(ncol):
            s = state[k]
            if s == BASIC:
                continue
            dj = T[m, k]
            up_ok = dj < -tol and (s == AT_LOWER or s == FREE_ZERO)
            dn_ok = dj > tol and (s == AT_UPPER or s == FREE_ZERO)
            if up_ok or dn_ok:
                if bland:
                    j = k
                    direction = 1.0 if up_ok else -1.0
                    break
                if fabs(dj) > best:
                    best = fabs(dj)
                    j = k
                    direction = 1.0 if up_ok else -1.0
        if j < 0:
            return OPTIMAL, it

        # ratio test
        theta = up[j] - lo[j]
        leave = -1
        leave_to = AT_LOWER
        best_var = ncol
        for i in range(m):
            a = T[i, j] * direction
            if fabs(a) <= tol:
                continue
            b = basis[i]
            if a > 0:
                if lo[b] == -INFINITY:
                    continue
                r = (xb[i] - lo[b]) / a
                to = AT_LOWER
            else:
                if up[b] == INFINITY:
                    continue
                r = (up[b] - xb[i]) / (-a)
                to = AT_UPPER
            if r < 0:
                r = 0.0
            if r < theta - 1e-12 or (fabs(r - theta) <= 1e-12 and leave >= 0 and b < best_var):
                theta = r
                leave = i
                leave_to = to
                best_var = b
        if theta == INFINITY:
            return UNBOUNDED, it

        s = state[j]
        if s == AT_LOWER:
            start = lo[j]
        elif s == AT_UPPER:
            start = up[j]
        else:
            start = 0.0
        if theta > 0:
            for i in range(m):
                xb[i] -= theta * direction * T[i, j]
            degenerate = 0
        else:
            degenerate += 1
            if bland_after > 0 and degenerate >= bland_after:
                bland = True

        if leave < 0:
            state[j] = AT_UPPER if direction > 0 else AT_LOWER
            it += 1
            continue

        b = basis[leave]
        state[b] = leave_to
        state[j] = BASIC
        basis[leave] = j
        xb[leave] = start + direction * theta

        piv = T[leave, j]
        for k in range(ncol):
            T[leave, k] /= piv
        for i in range(m + 1):
            if i == leave:
                continue
            f = T[i, j]
            if f == 0.0:
                continue
            for k in range(ncol):
                T[i, k] -= f * T[leave, k]
        it += 1
    return ITERATION_LIMIT, it
