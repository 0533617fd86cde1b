"""Two-step bootstrap moment-inequality test and its inversion into a region for tau.

The test treats ``w1`` as draws of the estimator that bounds tau from below and
``w2`` as draws of the one that bounds it from above, with moments
``W1 = w1 - tau <= 0`` and ``W2 = tau - w2 <= 0``.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .ate import (BoundsEstimate, Direction, Estimator2, aipw_summands, ate_bounds, dim_estimate,
                  ipw_summands)
from .cate import PHI_GLOBAL, CateEstimate, CateKernels, cate_bounds, cate_point_estimates
from .data import Dataset, differential_masks
from .errors import FitError, InferenceError, KernelMassError
from .propensity import fit_logistic, fit_outcome_regression, fitted

SIGMA_FLOOR = 1e-12
MIN_BOOT = 100
MAX_REDRAWS = 10
_QTOL = 1e-9


@dataclass(frozen=True, eq=False)
class BootstrapDraws:
    """Bootstrap replicates of the two estimators plus full-sample scales.

    ``w1`` holds differential-effect draws and ``w2`` IPW/AIPW draws; see
    :func:`oriented` for the lower/upper role assignment.
    """

    w1: np.ndarray
    w2: np.ndarray
    sigma1_hat: float
    sigma2_hat: float
    n: int
    seed: int | None = None
    estimate1: float | None = None
    estimate2: float | None = None

    def __post_init__(self):
        w1 = np.array(self.w1, dtype=np.float64)
        w2 = np.array(self.w2, dtype=np.float64)
        if w1.ndim != 1 or w1.shape != w2.shape or w1.size == 0:
            raise InferenceError("w1 and w2 must be non-empty vectors of equal length")
        if not (np.all(np.isfinite(w1)) and np.all(np.isfinite(w2))):
            raise InferenceError("bootstrap draws must be finite")
        s1, s2 = float(self.sigma1_hat), float(self.sigma2_hat)
        if not (math.isfinite(s1) and math.isfinite(s2)) or s1 < 0 or s2 < 0:
            raise InferenceError("standard errors must be finite and non-negative")
        if self.n < 1:
            raise InferenceError("n must be positive")
        w1.setflags(write=False)
        w2.setflags(write=False)
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)
        # zero spread (degenerate data) would make every statistic 0/0
        object.__setattr__(self, "sigma1_hat", max(s1, SIGMA_FLOOR))
        object.__setattr__(self, "sigma2_hat", max(s2, SIGMA_FLOOR))

    @property
    def L(self) -> int:
        return self.w1.shape[0]

    @property
    def center1(self) -> float:
        return float(self.w1.mean()) if self.estimate1 is None else float(self.estimate1)

    @property
    def center2(self) -> float:
        return float(self.w2.mean()) if self.estimate2 is None else float(self.estimate2)


@dataclass(frozen=True)
class ConfidenceRegion:
    lower: float
    upper: float
    alpha: float
    beta: float
    n_boot: int
    grid_points: int
    contiguous: bool
    warnings: tuple[str, ...] = field(default=())

    def contains(self, tau: float) -> bool:
        return self.lower <= tau <= self.upper

    def as_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "alpha": self.alpha, "beta": self.beta,
                "n_boot": self.n_boot, "grid_points": self.grid_points,
                "contiguous": self.contiguous}


def quantile_index(q: float, L: int) -> int:
    """0-based order statistic of the inverted-CDF empirical q-quantile."""
    k = math.ceil(q * L - _QTOL) - 1
    return min(max(k, 0), L - 1)


def oriented(bd: BootstrapDraws, direction: Direction) -> BootstrapDraws:
    """Put the lower-bound estimator in ``w1`` for the given direction.

    MU1_UPPER swaps the estimators; POINT orders them by full-sample value.
    """
    direction = Direction(direction)
    swap = direction is Direction.MU1_UPPER or (
        direction is Direction.POINT and bd.center1 > bd.center2)
    if not swap:
        return bd
    return BootstrapDraws(bd.w2, bd.w1, bd.sigma2_hat, bd.sigma1_hat, bd.n, bd.seed,
                          bd.estimate2, bd.estimate1)


def _check_levels(alpha: float, beta: float) -> None:
    if not (0.0 < beta < alpha < 1.0):
        raise InferenceError(f"need 0 < beta < alpha < 1, got alpha={alpha}, beta={beta}",
                             stage="usage")


def _recentered(bd: BootstrapDraws):
    """tau-free pieces: draw means and the recentered studentized draws."""
    sqn = math.sqrt(bd.n)
    m1 = float(np.mean(bd.w1))
    m2 = float(np.mean(bd.w2))
    r1 = sqn * (bd.w1 - m1) / bd.sigma1_hat
    r2 = -sqn * (bd.w2 - m2) / bd.sigma2_hat
    return sqn, m1, m2, r1, r2


def _stage_terms(bd: BootstrapDraws, taus: np.ndarray, alpha: float, beta: float):
    sqn, m1, m2, r1, r2 = _recentered(bd)
    L = bd.L
    mx = np.sort(np.maximum(r1, r2))
    B = float(mx[quantile_index(1.0 - beta, L)])
    wbar1 = m1 - taus
    wbar2 = taus - m2
    ucb1 = wbar1 + bd.sigma1_hat * B / sqn
    ucb2 = wbar2 + bd.sigma2_hat * B / sqn
    lam1 = np.minimum(ucb1, 0.0)
    lam2 = np.minimum(ucb2, 0.0)
    s1 = sqn * lam1 / bd.sigma1_hat
    s2 = sqn * lam2 / bd.sigma2_hat
    T = np.maximum(sqn * wbar1 / bd.sigma1_hat, sqn * wbar2 / bd.sigma2_hat)
    k = quantile_index(1.0 - alpha + beta, L)
    shortcut = (ucb1 <= 0.0) & (ucb2 <= 0.0)
    return r1, r2, s1, s2, T, k, shortcut


def two_step_test(bd: BootstrapDraws, tau: float, alpha: float = 0.05, beta: float = 0.005) -> bool:
    """Accept (True) or reject tau; ``bd.w1`` plays the lower-bound role."""
    _check_levels(alpha, beta)
    if not math.isfinite(tau):
        raise InferenceError("tau must be finite")
    r1, r2, s1, s2, T, k, shortcut = _stage_terms(bd, np.array([float(tau)]), alpha, beta)
    J = np.maximum(s1[0] - r1, s2[0] - r2)
    c = float(np.partition(J, k)[k])
    return bool(T[0] <= c or shortcut[0])


def accept_many(bd: BootstrapDraws, taus, alpha: float = 0.05, beta: float = 0.005) -> np.ndarray:
    """Vectorized :func:`two_step_test` over an array of tau values."""
    _check_levels(alpha, beta)
    taus = np.asarray(taus, dtype=np.float64)
    r1, r2, s1, s2, T, k, shortcut = _stage_terms(bd, taus, alpha, beta)
    c = _backend.shifted_max_quantiles(r1, r2, s1, s2, k)
    return (T <= c) | shortcut


def confidence_region(bd: BootstrapDraws, alpha: float = 0.05, beta: float = 0.005,
                      direction: Direction = Direction.MU2_UPPER,
                      grid_points: int = 2001) -> ConfidenceRegion:
    """Invert the two-step test over a tau grid and refine the endpoints by bisection."""
    _check_levels(alpha, beta)
    ob = oriented(bd, direction)
    e1, e2 = ob.center1, ob.center2
    smax = max(ob.sigma1_hat, ob.sigma2_hat)
    lo, hi = min(e1, e2) - 8.0 * smax, max(e1, e2) + 8.0 * smax
    if hi <= lo:
        hi = lo + 1e-8
    grid = np.linspace(lo, hi, grid_points)
    acc = accept_many(ob, grid, alpha, beta)
    idx = np.flatnonzero(acc)
    if idx.size == 0:
        raise InferenceError("no tau accepted: the bounds assumption may be violated or the "
                             "draws are degenerate", hint="check the direction setting")
    first, last = int(idx[0]), int(idx[-1])
    contiguous = bool(last - first + 1 == idx.size)
    warns = []
    if not contiguous:
        warns.append("confidence region is not contiguous; reporting the accepted hull")
    tol = 1e-4 * (hi - lo)

    def edge(inside: float, outside: float) -> float:
        while abs(outside - inside) > tol:
            mid = 0.5 * (inside + outside)
            if accept_many(ob, np.array([mid]), alpha, beta)[0]:
                inside = mid
            else:
                outside = mid
        return inside

    if first == 0:
        lower = lo
        warns.append("confidence region reaches the lower end of the scan range")
    else:
        lower = edge(grid[first], grid[first - 1])
    if last == grid_points - 1:
        upper = hi
        warns.append("confidence region reaches the upper end of the scan range")
    else:
        upper = edge(grid[last], grid[last + 1])
    return ConfidenceRegion(float(lower), float(upper), float(alpha), float(beta), ob.L,
                            int(grid_points), contiguous, tuple(warns))


@dataclass(frozen=True)
class EstimatorConfig:
    """What each bootstrap replicate recomputes.

    ``target="ate"`` uses the differential-effect and (A)IPW estimators;
    ``target="cate"`` uses their kernel versions at ``x0`` with the
    ``kernels`` held fixed (bandwidths chosen once on the full sample).
    """

    target: str = "ate"
    estimator2: Estimator2 = Estimator2.IPW
    kernels: CateKernels | None = None
    x0: float | None = None
    cov_index: int = 0
    ridge: float = 0.0
    phi_variant: str = PHI_GLOBAL

    def __post_init__(self):
        object.__setattr__(self, "estimator2", Estimator2(self.estimator2))
        if self.target not in ("ate", "cate"):
            raise ValueError(f"unknown target {self.target!r}")
        if self.target == "cate" and (self.kernels is None or self.x0 is None):
            raise ValueError("cate target needs kernels and x0")


def worker_count(requested: int | None = None) -> int:
    """Thread pool size: explicit request, else DIFFBOUND_THREADS, else CPU count."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("DIFFBOUND_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def full_sample_estimate(d: Dataset, config: EstimatorConfig, direction=Direction.MU2_UPPER,
                         model=None):
    """Point estimate and standard errors on the full sample."""
    m = model if model is not None else fit_logistic(d, ridge=config.ridge)
    if config.target == "ate":
        return ate_bounds(d, m, direction, config.estimator2)
    return cate_bounds(d, m, config.x0, config.kernels, direction, config.cov_index,
                       config.phi_variant)


def _replicate_pair(d: Dataset, config: EstimatorConfig) -> tuple[float, float]:
    m = fit_logistic(d, ridge=config.ridge)
    if config.target == "cate":
        return cate_point_estimates(d, m, config.x0, config.kernels, config.cov_index)
    p = fitted(m, d)
    if config.estimator2 is Estimator2.AIPW:
        mu2 = float(aipw_summands(d, p, fit_outcome_regression(d)).mean())
    else:
        mu2 = float(ipw_summands(d, p).mean())
    return dim_estimate(d), mu2


def _one_replicate(d: Dataset, config: EstimatorConfig, seed: int, j: int) -> tuple[float, float]:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(j,)))
    last = None
    for _ in range(MAX_REDRAWS + 1):
        idx = rng.integers(0, d.n, d.n)
        rs = d.take(idx)
        i1, i2 = differential_masks(rs)
        if not i1.any() or not i2.any():
            last = "empty differential cell"
            continue
        try:
            return _replicate_pair(rs, config)
        except (FitError, KernelMassError) as exc:
            last = str(exc)
    raise InferenceError(f"bootstrap replicate {j} failed after {MAX_REDRAWS} redraws ({last})",
                         hint="use a larger sample or collapse sparse cells")


def bootstrap_estimates(d: Dataset, config: EstimatorConfig | None = None, L: int = 1000,
                        seed: int = 0, estimate: BoundsEstimate | CateEstimate | None = None,
                        workers: int | None = None) -> BootstrapDraws:
    """Nonparametric bootstrap of (mu1, mu2) with the propensity refit per replicate.

    Replicate j draws from its own stream ``SeedSequence(seed, spawn_key=(j,))``,
    so the draws do not depend on the number of worker threads.
    """
    config = config or EstimatorConfig()
    if L < MIN_BOOT:
        raise InferenceError(f"need at least {MIN_BOOT} bootstrap draws, got {L}", stage="usage")
    if estimate is None:
        estimate = full_sample_estimate(d, config)
    nw = min(worker_count(workers), L)
    if nw == 1:
        pairs = [_one_replicate(d, config, seed, j) for j in range(L)]
    else:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            pairs = list(ex.map(lambda j: _one_replicate(d, config, seed, j), range(L)))
    w = np.asarray(pairs, dtype=np.float64)
    return BootstrapDraws(w[:, 0], w[:, 1], estimate.sigma1_hat, estimate.sigma2_hat, d.n, seed,
                          estimate.mu1_hat, estimate.mu2_hat)


__all__ = [
    "BootstrapDraws", "ConfidenceRegion", "EstimatorConfig",
    "accept_many", "bootstrap_estimates", "confidence_region", "full_sample_estimate",
    "oriented", "quantile_index", "two_step_test", "worker_count",
]
