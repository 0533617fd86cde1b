"""Logistic propensity model for P(Z1=1 | Z2, X) and the linear outcome model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from ._core_py import STATUS_CONVERGED, STATUS_DIVERGED, STATUS_SINGULAR
from .data import Dataset, ValidationReport
from .errors import EstimationError, FitError, SeparationError

PROB_CLIP = 1e-12
SEPARATION_LIMIT = 30.0


@dataclass(frozen=True)
class PropensityModel:
    """Fitted logit model on the design ``[1, Z2, X]``.

    ``coefficients`` are on the original covariate scale (intercept, Z2, X...).
    """

    coefficients: np.ndarray
    converged: bool
    iterations: int
    log_likelihood: float
    link: str = "logit"
    ridge: float = 0.0

    @property
    def n_features(self) -> int:
        return self.coefficients.shape[0] - 2

    @classmethod
    def from_coefficients(cls, coefficients) -> "PropensityModel":
        """Wrap fixed coefficients (no fitting), e.g. a known propensity."""
        c = np.asarray(coefficients, dtype=np.float64).copy()
        c.setflags(write=False)
        return cls(c, True, 0, float("nan"))


@dataclass(frozen=True)
class OutcomeModel:
    """Least-squares fit of Y on ``[1, Z1, Z2, X]``."""

    coefficients: np.ndarray
    rss: float


def _design(z2, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return np.column_stack([np.ones(x.shape[0]), np.asarray(z2, dtype=np.float64), x])


def fit_logistic(d: Dataset, ridge: float = 0.0, max_iter: int = 100,
                 tol: float = 1e-8) -> PropensityModel:
    """Maximum-likelihood logit fit of Z1 on ``[1, Z2, X]`` by IRLS.

    The non-constant columns are standardized before fitting; the separation
    check and the optional ridge penalty (never on the intercept) act on that
    standardized scale. Coefficients are returned on the original scale.

    Raises
    ------
    SeparationError
        If a standardized coefficient exceeds 30 in absolute value.
    FitError
        If Z1 is constant or the design is singular.
    """
    t = d.z1.astype(np.float64)
    if np.all(t == t[0]):
        raise FitError("z1 is constant; the propensity model is undefined")
    D = _design(d.z2, d.x)
    center = D[:, 1:].mean(axis=0)
    scale = D[:, 1:].std(axis=0)
    if np.any(scale == 0.0):
        bad = int(np.flatnonzero(scale == 0.0)[0])
        name = "z2" if bad == 0 else d.x_names[bad - 1]
        raise FitError(f"singular design: column '{name}' is constant")
    S = np.empty_like(D)
    S[:, 0] = 1.0
    S[:, 1:] = (D[:, 1:] - center) / scale
    beta_s, it, status, trace = _backend.irls_logistic(S, t, max_iter, tol, float(ridge), SEPARATION_LIMIT)
    if status == STATUS_DIVERGED:
        raise SeparationError(
            "perfect or quasi-complete separation: standardized coefficients diverge"
        )
    if status == STATUS_SINGULAR:
        raise FitError("singular design matrix in propensity fit")
    beta_s = np.asarray(beta_s)
    coef = np.empty_like(beta_s)
    coef[1:] = beta_s[1:] / scale
    coef[0] = beta_s[0] - float(np.sum(coef[1:] * center))
    coef.setflags(write=False)
    return PropensityModel(coef, status == STATUS_CONVERGED, int(it), float(trace[-1]),
                           ridge=float(ridge))


def predict(m: PropensityModel, z2, x) -> np.ndarray | float:
    """Fitted P(Z1=1 | Z2=z2, X=x), clipped to ``[1e-12, 1 - 1e-12]``.

    Accepts a single unit (scalar ``z2``, vector ``x``) or arrays of units.
    """
    x = np.asarray(x, dtype=np.float64)
    single = np.ndim(z2) == 0 and x.ndim <= 1
    if single:
        x = x.reshape(1, -1)
        z2 = np.asarray([z2])
    elif x.ndim == 1:
        x = x[:, None]
    if x.shape[1] != m.n_features:
        raise FitError(f"expected {m.n_features} covariates, got {x.shape[1]}", stage="predict")
    eta = _design(z2, x) @ m.coefficients
    p = np.clip(0.5 * (1.0 + np.tanh(0.5 * eta)), PROB_CLIP, 1.0 - PROB_CLIP)
    return float(p[0]) if single else p


def fitted(m: PropensityModel, d: Dataset) -> np.ndarray:
    """Clipped propensities for every unit of ``d``."""
    return predict(m, d.z2, d.x)


def check_positivity(m: PropensityModel, d: Dataset, bounds=(0.01, 0.99)) -> ValidationReport:
    """Warn about units whose fitted propensity lies outside ``[lo, hi]``."""
    lo, hi = bounds
    p = fitted(m, d)
    out = np.flatnonzero((p < lo) | (p > hi))
    rep = ValidationReport()
    if out.size:
        shown = ", ".join(str(i) for i in out[:20])
        more = "" if out.size <= 20 else f" (+{out.size - 20} more)"
        rep.warn(f"{out.size} unit(s) ({out.size / d.n:.4f} of sample) have fitted "
                 f"propensity outside [{lo}, {hi}]: units {shown}{more}")
    return rep


def fit_outcome_regression(d: Dataset) -> OutcomeModel:
    """Ordinary least squares of Y on ``[1, Z1, Z2, X]``."""
    p = d.l + 3
    if d.n <= p:
        raise EstimationError(f"insufficient data for outcome regression: n={d.n} needs n > {p}",
                              stage="outcome")
    D = np.column_stack([np.ones(d.n), d.z1, d.z2, d.x])
    coef, _, rank, _ = np.linalg.lstsq(D, d.y, rcond=None)
    if rank < p:
        raise EstimationError("rank-deficient outcome regression design", stage="outcome",
                              hint="drop collinear covariates")
    resid = d.y - D @ coef
    coef.setflags(write=False)
    return OutcomeModel(coef, float(resid @ resid))


def predict_outcome(o: OutcomeModel, z1, z2, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    z1 = np.broadcast_to(np.asarray(z1, dtype=np.float64), (x.shape[0],))
    D = np.column_stack([np.ones(x.shape[0]), z1, np.asarray(z2, dtype=np.float64), x])
    return D @ o.coefficients
