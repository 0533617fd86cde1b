"""Pure numpy implementations of the hot kernels.

These are the reference semantics for ``diffbound._core`` (Cython); both
backends expose the same three functions with the same signatures.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

STATUS_CONVERGED = 0
STATUS_MAX_ITER = 1
STATUS_DIVERGED = 2
STATUS_SINGULAR = 3

KERNEL_GAUSSIAN = 0
KERNEL_EPANECHNIKOV = 1

# largest Newton step taken without an objective check
FLAT_STEP = 1e-6

_ROW_CHUNK = 1024


def _penalized_loglik(D, t, beta, pen):
    eta = D @ beta
    return float(np.sum(t * eta - np.logaddexp(0.0, eta)) - 0.5 * np.sum(pen * beta * beta))


def irls_logistic(D, t, max_iter=100, tol=1e-8, ridge=0.0, max_abs=30.0):
    """Newton/IRLS for the logit likelihood with step halving.

    Returns ``(beta, iterations, status, loglik_trace)``; ``loglik_trace[0]``
    is the objective at the zero start and each later entry follows one
    accepted ascent step, so the trace is non-decreasing by construction.
    Newton steps shorter than ``FLAT_STEP`` are taken without the ascent
    check and are not recorded.
    """
    D = np.ascontiguousarray(D, dtype=np.float64)
    t = np.ascontiguousarray(t, dtype=np.float64)
    n, p = D.shape
    pen = np.full(p, float(ridge))
    pen[0] = 0.0
    beta = np.zeros(p)
    obj = _penalized_loglik(D, t, beta, pen)
    trace = [obj]
    status = STATUS_MAX_ITER
    it = 0
    for it in range(1, max_iter + 1):
        eta = D @ beta
        mu = 0.5 * (1.0 + np.tanh(0.5 * eta))
        w = mu * (1.0 - mu)
        grad = D.T @ (t - mu) - pen * beta
        H = (D.T * w) @ D + np.diag(pen)
        try:
            step = cho_solve(cho_factor(H, lower=True), grad)
        except (LinAlgError, ValueError):
            status = STATUS_SINGULAR
            break
        if not np.all(np.isfinite(step)):
            status = STATUS_SINGULAR
            break
        delta = np.max(np.abs(step))
        if delta < FLAT_STEP:
            # near the optimum the objective is flat to rounding; take the Newton step as is
            beta = beta + step
            obj = _penalized_loglik(D, t, beta, pen)
        else:
            scale = 1.0
            accepted = False
            for _ in range(40):
                cand = beta + scale * step
                new = _penalized_loglik(D, t, cand, pen)
                if new >= obj:
                    accepted = True
                    break
                scale *= 0.5
            if not accepted:
                # no ascent direction left at machine precision
                status = STATUS_CONVERGED
                break
            beta = cand
            obj = new
            trace.append(obj)
        if np.max(np.abs(beta)) > max_abs:
            status = STATUS_DIVERGED
            break
        if delta < tol:
            status = STATUS_CONVERGED
            break
    return beta, it, status, np.asarray(trace)


def _kernel_unnormalized(u, kind):
    if kind == KERNEL_GAUSSIAN:
        return np.exp(-0.5 * u * u)
    return np.where(np.abs(u) <= 1.0, 1.0 - u * u, 0.0)


def loo_cv_scores(xs, ys, grid, kind):
    """Leave-one-out mean squared error of Nadaraya-Watson for each bandwidth.

    Entries are ``nan`` where some held-out point has zero kernel mass.
    """
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    n = xs.shape[0]
    out = np.empty(grid.shape[0])
    for g, h in enumerate(grid):
        sse = 0.0
        ok = True
        for start in range(0, n, _ROW_CHUNK):
            stop = min(start + _ROW_CHUNK, n)
            u = (xs[start:stop, None] - xs[None, :]) / h
            K = _kernel_unnormalized(u, kind)
            K[np.arange(stop - start), np.arange(start, stop)] = 0.0
            den = K.sum(axis=1)
            if np.any(den <= 0.0):
                ok = False
                break
            pred = (K @ ys) / den
            sse += float(np.sum((ys[start:stop] - pred) ** 2))
        out[g] = sse / n if ok else np.nan
    return out


def shifted_max_quantiles(r1, r2, s1, s2, k):
    """For each grid entry g, the k-th smallest (0-based) of
    ``max(s1[g] - r1[j], s2[g] - r2[j])`` over j."""
    r1 = np.asarray(r1, dtype=np.float64)
    r2 = np.asarray(r2, dtype=np.float64)
    s1 = np.asarray(s1, dtype=np.float64)
    s2 = np.asarray(s2, dtype=np.float64)
    G = s1.shape[0]
    out = np.empty(G)
    step = max(1, (1 << 20) // max(1, r1.shape[0]))
    for start in range(0, G, step):
        stop = min(start + step, G)
        M = np.maximum(s1[start:stop, None] - r1[None, :], s2[start:stop, None] - r2[None, :])
        out[start:stop] = np.partition(M, k, axis=1)[:, k]
    return out
