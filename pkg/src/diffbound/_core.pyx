# cython: language_level=3
"""Compiled kernels; semantics match ``diffbound._core_py``."""
import numpy as np
from libc.math cimport exp, log1p, fabs, tanh, isfinite, NAN

cdef enum:
    STATUS_CONVERGED = 0
    STATUS_MAX_ITER = 1
    STATUS_DIVERGED = 2
    STATUS_SINGULAR = 3

cdef double FLAT_STEP = 1e-6


cdef inline double _softplus(double x) nogil:
    if x > 0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


cdef double _objective(double[:, ::1] D, double[::1] t, double[::1] beta,
                       double[::1] pen) nogil:
    cdef Py_ssize_t n = D.shape[0], p = D.shape[1], i, j
    cdef double s = 0.0, eta
    for i in range(n):
        eta = 0.0
        for j in range(p):
            eta += D[i, j] * beta[j]
        s += t[i] * eta - _softplus(eta)
    for j in range(p):
        s -= 0.5 * pen[j] * beta[j] * beta[j]
    return s


cdef int _cholesky_solve(double[:, ::1] H, double[::1] b, double[::1] x) nogil:
    """In-place lower Cholesky of H then solve H x = b; returns 0 on success."""
    cdef Py_ssize_t p = H.shape[0], i, j, k
    cdef double s
    for j in range(p):
        s = H[j, j]
        for k in range(j):
            s -= H[j, k] * H[j, k]
        if not (s > 0.0) or not isfinite(s):
            return 1
        H[j, j] = s ** 0.5
        for i in range(j + 1, p):
            s = H[i, j]
            for k in range(j):
                s -= H[i, k] * H[j, k]
            H[i, j] = s / H[j, j]
    for i in range(p):
        s = b[i]
        for k in range(i):
            s -= H[i, k] * x[k]
        x[i] = s / H[i, i]
    for i in range(p - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, p):
            s -= H[k, i] * x[k]
        x[i] = s / H[i, i]
    return 0


def irls_logistic(D, t, int max_iter=100, double tol=1e-8, double ridge=0.0,
                  double max_abs=30.0):
    cdef double[:, ::1] Dv = np.ascontiguousarray(D, dtype=np.float64)
    cdef double[::1] tv = np.ascontiguousarray(t, dtype=np.float64)
    cdef Py_ssize_t n = Dv.shape[0], p = Dv.shape[1], i, j, k
    pen_a = np.full(p, ridge)
    pen_a[0] = 0.0
    cdef double[::1] pen = pen_a
    beta_a = np.zeros(p)
    cdef double[::1] beta = beta_a
    cdef double[::1] cand = np.zeros(p)
    cdef double[::1] grad = np.zeros(p)
    cdef double[::1] step = np.zeros(p)
    cdef double[:, ::1] H = np.zeros((p, p))
    cdef double obj = _objective(Dv, tv, beta, pen), new = 0.0
    cdef double eta, mu, w, r, scale, delta, bmax
    cdef int status = STATUS_MAX_ITER, it = 0, halving, accepted
    trace = [obj]
    for it in range(1, max_iter + 1):
        for j in range(p):
            grad[j] = -pen[j] * beta[j]
            for k in range(p):
                H[j, k] = 0.0
            H[j, j] = pen[j]
        for i in range(n):
            eta = 0.0
            for j in range(p):
                eta += Dv[i, j] * beta[j]
            mu = 0.5 * (1.0 + tanh(0.5 * eta))
            w = mu * (1.0 - mu)
            r = tv[i] - mu
            for j in range(p):
                grad[j] += Dv[i, j] * r
                for k in range(j + 1):
                    H[j, k] += Dv[i, j] * Dv[i, k] * w
        for j in range(p):
            for k in range(j + 1, p):
                H[j, k] = H[k, j]
        if _cholesky_solve(H, grad, step) != 0:
            status = STATUS_SINGULAR
            break
        accepted = 1
        for j in range(p):
            if not isfinite(step[j]):
                accepted = 0
        if not accepted:
            status = STATUS_SINGULAR
            break
        delta = 0.0
        for j in range(p):
            if fabs(step[j]) > delta:
                delta = fabs(step[j])
        if delta < FLAT_STEP:
            # near the optimum the objective is flat to rounding; take the Newton step as is
            for j in range(p):
                beta[j] = beta[j] + step[j]
            obj = _objective(Dv, tv, beta, pen)
        else:
            scale = 1.0
            accepted = 0
            for halving in range(40):
                for j in range(p):
                    cand[j] = beta[j] + scale * step[j]
                new = _objective(Dv, tv, cand, pen)
                if new >= obj:
                    accepted = 1
                    break
                scale *= 0.5
            if not accepted:
                status = STATUS_CONVERGED
                break
            for j in range(p):
                beta[j] = cand[j]
            obj = new
            trace.append(obj)
        bmax = 0.0
        for j in range(p):
            if fabs(beta[j]) > bmax:
                bmax = fabs(beta[j])
        if bmax > max_abs:
            status = STATUS_DIVERGED
            break
        if delta < tol:
            status = STATUS_CONVERGED
            break
    return np.asarray(beta_a).copy(), it, status, np.asarray(trace)


def loo_cv_scores(xs, ys, grid, int kind):
    cdef double[::1] x = np.ascontiguousarray(xs, dtype=np.float64)
    cdef double[::1] y = np.ascontiguousarray(ys, dtype=np.float64)
    cdef double[::1] hs = np.ascontiguousarray(grid, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], G = hs.shape[0], g, i, j
    out_a = np.empty(G)
    cdef double[::1] out = out_a
    cdef double[::1] num = np.empty(n)
    cdef double[::1] den = np.empty(n)
    cdef double c, d, u2, kv, sse, e
    cdef int ok
    with nogil:
        for g in range(G):
            c = 1.0 / (hs[g] * hs[g])
            for i in range(n):
                num[i] = 0.0
                den[i] = 0.0
            # the kernel is symmetric, so each pair is evaluated once
            for i in range(n):
                for j in range(i + 1, n):
                    d = x[i] - x[j]
                    u2 = d * d * c
                    if kind == 0:
                        kv = exp(-0.5 * u2)
                    elif u2 <= 1.0:
                        kv = 1.0 - u2
                    else:
                        continue
                    num[i] += kv * y[j]
                    den[i] += kv
                    num[j] += kv * y[i]
                    den[j] += kv
            sse = 0.0
            ok = 1
            for i in range(n):
                if den[i] <= 0.0:
                    ok = 0
                    break
                e = y[i] - num[i] / den[i]
                sse += e * e
            out[g] = sse / n if ok else NAN
    return out_a


cdef double _select(double* a, Py_ssize_t n, Py_ssize_t k) nogil:
    """k-th smallest (0-based) by quickselect with median-of-three pivots."""
    cdef Py_ssize_t lo = 0, hi = n - 1, i, j, mid
    cdef double pivot, tmp
    while hi > lo:
        mid = lo + (hi - lo) // 2
        if a[mid] < a[lo]:
            tmp = a[mid]; a[mid] = a[lo]; a[lo] = tmp
        if a[hi] < a[lo]:
            tmp = a[hi]; a[hi] = a[lo]; a[lo] = tmp
        if a[hi] < a[mid]:
            tmp = a[hi]; a[hi] = a[mid]; a[mid] = tmp
        pivot = a[mid]
        i = lo
        j = hi
        while i <= j:
            while a[i] < pivot:
                i += 1
            while a[j] > pivot:
                j -= 1
            if i <= j:
                tmp = a[i]; a[i] = a[j]; a[j] = tmp
                i += 1
                j -= 1
        if k <= j:
            hi = j
        elif k >= i:
            lo = i
        else:
            return a[k]
    return a[k]


def shifted_max_quantiles(r1, r2, s1, s2, Py_ssize_t k):
    cdef double[::1] a1 = np.ascontiguousarray(r1, dtype=np.float64)
    cdef double[::1] a2 = np.ascontiguousarray(r2, dtype=np.float64)
    cdef double[::1] b1 = np.ascontiguousarray(s1, dtype=np.float64)
    cdef double[::1] b2 = np.ascontiguousarray(s2, dtype=np.float64)
    cdef Py_ssize_t L = a1.shape[0], G = b1.shape[0], g, j
    out_a = np.empty(G)
    cdef double[::1] out = out_a
    buf_a = np.empty(L)
    cdef double[::1] buf = buf_a
    cdef double u, v
    if L == 0 or k < 0 or k >= L:
        raise ValueError("quantile index out of range")
    with nogil:
        for g in range(G):
            for j in range(L):
                u = b1[g] - a1[j]
                v = b2[g] - a2[j]
                buf[j] = u if u > v else v
            out[g] = _select(&buf[0], L, k)
    return out_a
