"""Kernel smoothing and Nadaraya-Watson CATE bounds at a query point."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from ._core_py import KERNEL_EPANECHNIKOV, KERNEL_GAUSSIAN
from .ate import Direction, assemble_interval, ipw_summands
from .data import Dataset, differential_masks
from .errors import EstimationError, KernelMassError
from .propensity import PropensityModel, fitted

_KIND_CODE = {"gaussian": KERNEL_GAUSSIAN, "epanechnikov": KERNEL_EPANECHNIKOV}
# integral of K(u)^2 du
_L2_NORM_SQ = {"gaussian": 1.0 / (2.0 * math.sqrt(math.pi)), "epanechnikov": 0.6}
_GAUSS_CONST = 1.0 / math.sqrt(2.0 * math.pi)

PHI_GLOBAL = "global"
PHI_LOCAL = "local"


@dataclass(frozen=True)
class KernelSpec:
    """Second-order kernel with its bandwidth."""

    kind: str = "gaussian"
    bandwidth: float = 1.0
    order: int = 2

    def __post_init__(self):
        if self.kind not in _KIND_CODE:
            raise ValueError(f"unknown kernel {self.kind!r}")
        if not (math.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValueError("bandwidth must be finite and positive")
        if self.order != 2:
            raise ValueError("built-in kernels are second order")

    def with_bandwidth(self, h: float) -> "KernelSpec":
        return KernelSpec(self.kind, float(h), self.order)


@dataclass(frozen=True)
class CateKernels:
    """Kernels for the (1,0)-cell regression, the (0,1)-cell regression and the IPW smoother."""

    k1: KernelSpec
    k2: KernelSpec
    k3: KernelSpec

    @property
    def bandwidths(self) -> tuple[float, float, float]:
        return (self.k1.bandwidth, self.k2.bandwidth, self.k3.bandwidth)


@dataclass(frozen=True)
class DensityEstimates:
    f10_hat: float
    f01_hat: float
    f_hat: float


@dataclass(frozen=True)
class CateEstimate:
    x0: float
    cov_index: int
    mu1x: float
    mu2x: float
    tau_minus_x: float
    tau_plus_x: float
    sigma1x_hat: float
    sigma2x_hat: float
    bandwidths: tuple[float, float, float]
    direction: Direction
    kernel: str = "gaussian"
    n: int = 0
    warnings: tuple[str, ...] = field(default=())

    # aliases so inference code can treat ATE and CATE estimates alike
    @property
    def mu1_hat(self) -> float:
        return self.mu1x

    @property
    def mu2_hat(self) -> float:
        return self.mu2x

    @property
    def sigma1_hat(self) -> float:
        return self.sigma1x_hat

    @property
    def sigma2_hat(self) -> float:
        return self.sigma2x_hat

    def as_dict(self) -> dict:
        return {
            "x0": self.x0, "cov_index": self.cov_index,
            "mu1x": self.mu1x, "mu2x": self.mu2x,
            "tau_minus_x": self.tau_minus_x, "tau_plus_x": self.tau_plus_x,
            "sigma1x_hat": self.sigma1x_hat, "sigma2x_hat": self.sigma2x_hat,
            "bandwidths": list(self.bandwidths), "direction": self.direction.value,
            "kernel": self.kernel, "n": self.n,
        }


def kernel_eval(k: KernelSpec, u):
    """Normalized kernel density at ``u`` (scalar or array)."""
    u = np.asarray(u, dtype=np.float64)
    if k.kind == "gaussian":
        out = _GAUSS_CONST * np.exp(-0.5 * u * u)
    else:
        out = np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)
    return float(out) if out.ndim == 0 else out


def kernel_l2_norm_sq(kind: str) -> float:
    return _L2_NORM_SQ[kind]


def _weights(xs, x0, k: KernelSpec) -> np.ndarray:
    return kernel_eval(k, (x0 - np.asarray(xs, dtype=np.float64)) / k.bandwidth)


def nw_regress(xs, ys, x0: float, k: KernelSpec) -> float:
    """Nadaraya-Watson estimate at ``x0``: kernel-weighted mean of ``ys``."""
    w = np.atleast_1d(_weights(xs, x0, k))
    den = float(w.sum())
    if not den > 0.0:
        raise KernelMassError(f"zero kernel mass at x0={x0:g} (h={k.bandwidth:g}, {k.kind})")
    return float(w @ np.asarray(ys, dtype=np.float64)) / den


def kde(xs, x0: float, k: KernelSpec) -> float:
    """Kernel density estimate ``(n h)^-1 sum K((x0 - x_i)/h)``."""
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    return float(np.sum(_weights(xs, x0, k))) / (xs.shape[0] * k.bandwidth)


def default_grid(xs, size: int = 30) -> np.ndarray:
    """Log-spaced bandwidths over ``[0.02, 5]`` times the sample SD."""
    sd = float(np.std(xs, ddof=1))
    if not sd > 0:
        raise EstimationError("conditioning covariate is constant", stage="bandwidth")
    return np.geomspace(0.02, 5.0, size) * sd


def loo_cv_scores(xs, ys, kind: str, grid) -> np.ndarray:
    """LOO mean squared error per bandwidth; ``nan`` where a fold has no mass."""
    return _backend.loo_cv_scores(xs, ys, np.asarray(grid, dtype=np.float64), _KIND_CODE[kind])


def select_bandwidth_cv(xs, ys, kind: str, grid) -> float:
    """Bandwidth minimizing the leave-one-out error; ties go to the smaller value."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    if xs.shape[0] < 3:
        raise EstimationError("bandwidth selection needs at least 3 points", stage="bandwidth")
    if grid.size == 0 or np.any(~(grid > 0)):
        raise EstimationError("bandwidth grid must be non-empty and positive", stage="bandwidth")
    scores = loo_cv_scores(xs, ys, kind, grid)
    valid = np.isfinite(scores)
    if not valid.any():
        raise KernelMassError("every grid bandwidth leaves some point with zero kernel mass",
                              stage="bandwidth", hint="use a wider grid or the gaussian kernel")
    best = np.min(scores[valid])
    tol = 1e-12 * max(float(np.mean(ys * ys)), 1e-300)
    tied = valid & (scores <= best + tol)
    return float(np.min(grid[tied]))


def _cov(d: Dataset, cov_index: int) -> np.ndarray:
    if not 0 <= cov_index < d.l:
        raise EstimationError(f"cov_index {cov_index} out of range for {d.l} covariate(s)",
                              stage="cate")
    return d.x[:, cov_index]


def _cell_regressions(d: Dataset, x0, k1, k2, cov_index):
    i1, i2 = differential_masks(d)
    if not i1.any() or not i2.any():
        raise EstimationError("empty differential cell", stage="cate")
    xc = _cov(d, cov_index)
    m10 = nw_regress(xc[i1], d.y[i1], x0, k1)
    m01 = nw_regress(xc[i2], d.y[i2], x0, k2)
    return m10, m01


def mu1_at(d: Dataset, x0: float, k1: KernelSpec, k2: KernelSpec, cov_index: int = 0) -> float:
    """Differential-effect estimate at ``x0``: cell regressions m10(x0) - m01(x0)."""
    m10, m01 = _cell_regressions(d, x0, k1, k2, cov_index)
    return m10 - m01


def mu2_at(d: Dataset, m: PropensityModel, x0: float, k3: KernelSpec, cov_index: int = 0) -> float:
    """Kernel regression of the IPW summand on the conditioning covariate at ``x0``."""
    return nw_regress(_cov(d, cov_index), ipw_summands(d, fitted(m, d)), x0, k3)


def density_estimates(d: Dataset, x0: float, kernels: CateKernels, cov_index: int = 0) -> DensityEstimates:
    i1, i2 = differential_masks(d)
    xc = _cov(d, cov_index)
    return DensityEstimates(kde(xc[i1], x0, kernels.k1) if i1.any() else 0.0,
                            kde(xc[i2], x0, kernels.k2) if i2.any() else 0.0,
                            kde(xc, x0, kernels.k3))


def _local_variance(xs, ys, x0, k: KernelSpec) -> float:
    # n_c^-1 sum h^-1 K_i / f_hat * (y_i - m_hat)^2, with f_hat the cell KDE
    w = _weights(xs, x0, k)
    f = float(w.sum()) / (xs.shape[0] * k.bandwidth)
    mhat = float(w @ ys) / float(w.sum())
    return float(np.sum(w / k.bandwidth / f * (ys - mhat) ** 2)) / xs.shape[0]


def cate_variances(d: Dataset, m: PropensityModel, x0: float, k1: KernelSpec, k2: KernelSpec,
                   k3: KernelSpec, cov_index: int = 0, phi_variant: str = PHI_GLOBAL):
    """Plug-in variances ``(sigma1(x0)^2, sigma2(x0)^2)``.

    ``phi_variant="global"`` uses the global n^-2 sum of squared deviations of
    the IPW summand from mu2(x0); ``"local"`` replaces it with the
    kernel-weighted conditional second moment.
    """
    kern = CateKernels(k1, k2, k3)
    dens = density_estimates(d, x0, kern, cov_index)
    if not (dens.f10_hat > 0 and dens.f01_hat > 0 and dens.f_hat > 0):
        raise KernelMassError(f"zero density estimate at x0={x0:g}")
    i1, i2 = differential_masks(d)
    xc = _cov(d, cov_index)
    s10 = _local_variance(xc[i1], d.y[i1], x0, k1)
    s01 = _local_variance(xc[i2], d.y[i2], x0, k2)
    phi = ipw_summands(d, fitted(m, d))
    mu2x = nw_regress(xc, phi, x0, k3)
    if phi_variant == PHI_GLOBAL:
        sphi = float(np.sum((phi - mu2x) ** 2)) / d.n ** 2
    elif phi_variant == PHI_LOCAL:
        w = _weights(xc, x0, k3)
        sphi = float(w @ (phi - mu2x) ** 2) / float(w.sum())
    else:
        raise ValueError(f"unknown phi_variant {phi_variant!r}")
    v1 = (s10 * kernel_l2_norm_sq(k1.kind) / dens.f10_hat
          + s01 * kernel_l2_norm_sq(k2.kind) / dens.f01_hat)
    v2 = sphi * kernel_l2_norm_sq(k3.kind) / dens.f_hat
    return v1, v2


def fit_cate_kernels(d: Dataset, m: PropensityModel, cov_index: int = 0, kind: str = "gaussian",
                     grid=None, bandwidth: float | None = None) -> CateKernels:
    """Choose (h1, h2, h3) by leave-one-out CV, or use a fixed ``bandwidth`` for all three.

    h1 and h2 smooth Y within the (1,0) and (0,1) cells; h3 smooths the IPW summand.
    """
    if bandwidth is not None:
        k = KernelSpec(kind, float(bandwidth))
        return CateKernels(k, k, k)
    xc = _cov(d, cov_index)
    i1, i2 = differential_masks(d)
    g = default_grid(xc) if grid is None else np.asarray(grid, dtype=np.float64)
    phi = ipw_summands(d, fitted(m, d))
    h1 = select_bandwidth_cv(xc[i1], d.y[i1], kind, g)
    h2 = select_bandwidth_cv(xc[i2], d.y[i2], kind, g)
    h3 = select_bandwidth_cv(xc, phi, kind, g)
    return CateKernels(KernelSpec(kind, h1), KernelSpec(kind, h2), KernelSpec(kind, h3))


def cate_point_estimates(d: Dataset, m: PropensityModel, x0: float, kernels: CateKernels,
                         cov_index: int = 0) -> tuple[float, float]:
    """``(mu1(x0), mu2(x0))`` without variances; used inside bootstrap replicates."""
    return (mu1_at(d, x0, kernels.k1, kernels.k2, cov_index),
            mu2_at(d, m, x0, kernels.k3, cov_index))


def cate_bounds(d: Dataset, m: PropensityModel, x0: float, kernels: CateKernels,
                dir: Direction = Direction.MU2_UPPER, cov_index: int = 0,
                phi_variant: str = PHI_GLOBAL) -> CateEstimate:
    """Directional CATE bounds at ``x0`` on covariate ``cov_index``."""
    mu1x, mu2x = cate_point_estimates(d, m, x0, kernels, cov_index)
    v1, v2 = cate_variances(d, m, x0, kernels.k1, kernels.k2, kernels.k3, cov_index, phi_variant)
    lo, hi, warns = assemble_interval(mu1x, mu2x, dir, label=f"x0={x0:g}")
    return CateEstimate(float(x0), int(cov_index), mu1x, mu2x, lo, hi,
                        float(np.sqrt(v1)), float(np.sqrt(v2)), kernels.bandwidths,
                        Direction(dir), kernels.k1.kind, d.n, warns)
