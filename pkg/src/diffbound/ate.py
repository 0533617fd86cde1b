"""Differential-effect and IPW/AIPW estimators, sandwich variances, ATE bounds."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .data import Dataset, differential_masks
from .errors import EstimationError
from .propensity import OutcomeModel, PropensityModel, fit_outcome_regression, fitted, predict_outcome


class Direction(str, Enum):
    """Which estimator bounds the effect from above.

    MU1_UPPER: tau+ = mu1, tau- = mu2. MU2_UPPER: tau+ = mu2, tau- = mu1.
    POINT: both identify tau; the finite-sample [min, max] is reported.
    """

    MU1_UPPER = "mu1-upper"
    MU2_UPPER = "mu2-upper"
    POINT = "point"


class Estimator2(str, Enum):
    IPW = "ipw"
    AIPW = "aipw"


@dataclass(frozen=True)
class BoundsEstimate:
    mu1_hat: float
    mu2_hat: float
    tau_minus: float
    tau_plus: float
    sigma1_hat: float
    sigma2_hat: float
    direction: Direction
    estimator2: Estimator2 = Estimator2.IPW
    n: int = 0
    warnings: tuple[str, ...] = field(default=())

    def as_dict(self) -> dict:
        return {
            "mu1_hat": self.mu1_hat, "mu2_hat": self.mu2_hat,
            "tau_minus": self.tau_minus, "tau_plus": self.tau_plus,
            "sigma1_hat": self.sigma1_hat, "sigma2_hat": self.sigma2_hat,
            "direction": self.direction.value, "estimator2": self.estimator2.value,
            "n": self.n,
        }


def _cells(d: Dataset, min_size: int = 1):
    i1, i2 = differential_masks(d)
    n10, n01 = int(i1.sum()), int(i2.sum())
    if n10 < min_size or n01 < min_size:
        raise EstimationError(
            f"differential cells too small (n10={n10}, n01={n01}; need {min_size} each)"
        )
    return i1, i2


def dim_estimate(d: Dataset) -> float:
    """Mean outcome in the (1,0) cell minus mean outcome in the (0,1) cell."""
    i1, i2 = _cells(d)
    return float(d.y[i1].mean() - d.y[i2].mean())


def variance_dim(d: Dataset) -> float:
    """Sum over both cells of n_cell^-2 times the within-cell sum of squares."""
    i1, i2 = _cells(d, min_size=2)
    out = 0.0
    for m in (i1, i2):
        y = d.y[m]
        out += float(np.sum((y - y.mean()) ** 2)) / y.shape[0] ** 2
    return out


def ipw_summands(d: Dataset, p: np.ndarray) -> np.ndarray:
    z = d.z1.astype(np.float64)
    return z * d.y / p - (1.0 - z) * d.y / (1.0 - p)


def aipw_summands(d: Dataset, p: np.ndarray, o: OutcomeModel) -> np.ndarray:
    z = d.z1.astype(np.float64)
    o1 = predict_outcome(o, 1.0, d.z2, d.x)
    o0 = predict_outcome(o, 0.0, d.z2, d.x)
    aug = (z - p) / (p * (1.0 - p)) * ((1.0 - p) * o1 + p * o0)
    return ipw_summands(d, p) - aug


def _summand_variance(s: np.ndarray) -> float:
    return float(np.sum((s - s.mean()) ** 2)) / s.shape[0] ** 2


def ipw_estimate(d: Dataset, m: PropensityModel) -> float:
    """Horvitz-Thompson contrast with fitted propensities."""
    return float(ipw_summands(d, fitted(m, d)).mean())


def aipw_estimate(d: Dataset, m: PropensityModel, o: OutcomeModel) -> float:
    """IPW contrast augmented with the outcome regression (doubly robust)."""
    return float(aipw_summands(d, fitted(m, d), o).mean())


def variance_ipw(d: Dataset, m: PropensityModel) -> float:
    """n^-2 times the centered sum of squares of the IPW summands."""
    return _summand_variance(ipw_summands(d, fitted(m, d)))


def variance_aipw(d: Dataset, m: PropensityModel, o: OutcomeModel) -> float:
    return _summand_variance(aipw_summands(d, fitted(m, d), o))


def assemble_interval(mu1: float, mu2: float, direction: Direction,
                      label: str = "") -> tuple[float, float, tuple[str, ...]]:
    """Map (mu1, mu2) to (tau_minus, tau_plus) for ``direction``.

    Out-of-order bounds are swapped and a crossing warning is returned.
    """
    direction = Direction(direction)
    if direction is Direction.POINT:
        return min(mu1, mu2), max(mu1, mu2), ()
    if direction is Direction.MU1_UPPER:
        lo, hi = mu2, mu1
    else:
        lo, hi = mu1, mu2
    if lo <= hi:
        return lo, hi, ()
    where = f" at {label}" if label else ""
    msg = (f"bound crossing{where}: direction {direction.value} implies tau_minus={lo:.6g} > "
           f"tau_plus={hi:.6g}; reporting the order-corrected interval")
    return hi, lo, (msg,)


def ate_bounds(d: Dataset, m: PropensityModel, dir: Direction = Direction.MU2_UPPER,
               est2: Estimator2 = Estimator2.IPW, outcome: OutcomeModel | None = None) -> BoundsEstimate:
    """Directional ATE bounds from the differential-effect and (A)IPW estimators."""
    est2 = Estimator2(est2)
    mu1 = dim_estimate(d)
    s1 = variance_dim(d)
    p = fitted(m, d)
    if est2 is Estimator2.AIPW:
        o = outcome if outcome is not None else fit_outcome_regression(d)
        s = aipw_summands(d, p, o)
    else:
        s = ipw_summands(d, p)
    mu2 = float(s.mean())
    s2 = _summand_variance(s)
    lo, hi, warns = assemble_interval(mu1, mu2, dir)
    return BoundsEstimate(mu1, mu2, lo, hi, float(np.sqrt(s1)), float(np.sqrt(s2)),
                          Direction(dir), est2, d.n, warns)
