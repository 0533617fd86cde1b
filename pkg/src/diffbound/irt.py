"""Two-parameter logistic IRT model for the two treatments and the h(a, b) integrals.

The latent confounder is standard normal. Treatment items follow
``P(Z=1 | u) = expit(alpha (u - beta))`` and are independent given u.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.optimize import minimize
from scipy.special import expit, log_expit, logsumexp

from .ate import Direction
from .errors import DataError, EstimationError
from .mc import MCValue, RatioAccumulator

N_NODES = 41
PARAM_BOUND = 20.0


def _std_normal_rule(m: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = hermegauss(m)
    return t, w / math.sqrt(2.0 * math.pi)


def item_prob(alpha, beta, u):
    """Probability of endorsing an item with discrimination alpha and difficulty beta at u."""
    return expit(np.multiply(alpha, np.subtract(u, beta)))


def joint_prob(alpha1, beta1, alpha2, beta2, a: int, b: int, u):
    """P(Z1=a, Z2=b | U=u) under local independence."""
    p1 = item_prob(alpha1, beta1, u)
    p2 = item_prob(alpha2, beta2, u)
    return (p1 if a else 1.0 - p1) * (p2 if b else 1.0 - p2)


@dataclass(frozen=True)
class IrtFit:
    discriminations: np.ndarray
    difficulties: np.ndarray
    std_errors: np.ndarray  # shape (J, 2): SE of (alpha, beta) per item
    log_likelihood: float
    converged: bool
    iterations: int = 0
    item_names: tuple[str, ...] = field(default=())

    def rows(self) -> list[tuple[str, float, float, float, float]]:
        """(item, discrimination, SE, difficulty, SE) per item."""
        names = self.item_names or tuple(f"item{j + 1}" for j in range(len(self.discriminations)))
        return [(names[j], float(self.discriminations[j]), float(self.std_errors[j, 0]),
                 float(self.difficulties[j]), float(self.std_errors[j, 1]))
                for j in range(len(names))]


class _MarginalLikelihood:
    """Marginal log-likelihood over a fixed normal quadrature; params = (alpha, beta)."""

    def __init__(self, items: np.ndarray, nodes: int):
        # collapse repeated response patterns
        pats, counts = np.unique(items, axis=0, return_counts=True)
        self.Y = pats.astype(np.float64)
        self.c = counts.astype(np.float64)
        self.t, w = _std_normal_rule(nodes)
        self.logw = np.log(w)
        self.J = items.shape[1]

    def _eta(self, theta):
        a, b = theta[: self.J], theta[self.J:]
        return a[:, None] * (self.t[None, :] - b[:, None]), a, b  # (J, Q)

    def value_grad(self, theta):
        eta, a, b = self._eta(theta)
        # log P(pattern | node) = sum_j y eta - softplus(eta)
        ll = self.Y @ eta + np.sum(log_expit(-eta), axis=0)[None, :]
        lse = ll + self.logw[None, :]
        logL = logsumexp(lse, axis=1)
        post = np.exp(lse - logL[:, None]) * self.c[:, None]  # (P, Q), count-weighted
        P = expit(eta)
        dEta = self.Y.T @ post - P * post.sum(axis=0)[None, :]  # (J, Q)
        ga = np.sum(dEta * (self.t[None, :] - b[:, None]), axis=1)
        gb = -a * np.sum(dEta, axis=1)
        return float(self.c @ logL), np.concatenate([ga, gb])

    def hessian(self, theta, eps: float = 1e-5):
        k = theta.shape[0]
        H = np.empty((k, k))
        for i in range(k):
            e = np.zeros(k)
            e[i] = eps
            H[:, i] = (self.value_grad(theta + e)[1] - self.value_grad(theta - e)[1]) / (2 * eps)
        return 0.5 * (H + H.T)


def fit_2pl(items, item_names=None, nodes: int = N_NODES, max_iter: int = 500,
            gtol: float = 1e-6) -> IrtFit:
    """Marginal maximum likelihood 2PL fit with a standard-normal latent trait.

    Quasi-Newton (L-BFGS-B) on all item parameters jointly, followed by a
    short Newton polish; standard errors come from the pseudo-inverse of the
    numerically differentiated observed information.

    Parameters
    ----------
    items : array_like of {0, 1}, shape (n, J)
    """
    Y = np.asarray(items)
    if Y.ndim != 2 or Y.shape[1] < 2:
        raise DataError("need a binary matrix with at least 2 items", stage="irt")
    if not np.all((Y == 0) | (Y == 1)):
        raise DataError("items must be 0/1", stage="irt")
    J = Y.shape[1]
    names = tuple(item_names) if item_names is not None else tuple(f"item{j + 1}" for j in range(J))
    means = Y.mean(axis=0)
    const = [names[j] for j in range(J) if means[j] in (0.0, 1.0)]
    if const:
        raise DataError(f"constant item(s): {', '.join(const)}", stage="irt")
    lik = _MarginalLikelihood(Y, nodes)
    # logit of the endorsement rate, shrunk for the unit-variance latent
    x0 = np.concatenate([np.ones(J), -np.log(means / (1 - means)) / 1.7])

    def obj(theta):
        v, g = lik.value_grad(theta)
        return -v, -g

    bounds = [(-PARAM_BOUND, PARAM_BOUND)] * (2 * J)
    res = minimize(obj, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": max_iter, "gtol": gtol, "ftol": 1e-15, "maxcor": 20})
    theta = np.clip(res.x, -PARAM_BOUND, PARAM_BOUND)
    value, grad = lik.value_grad(theta)
    iters = int(res.nit)
    for _ in range(20):
        if np.max(np.abs(grad)) < gtol or iters >= max_iter:
            break
        H = lik.hessian(theta)
        try:
            step = np.linalg.solve(-H, grad)
        except np.linalg.LinAlgError:
            break
        cand = np.clip(theta + step, -PARAM_BOUND, PARAM_BOUND)
        cv, cg = lik.value_grad(cand)
        if not cv >= value:
            break
        theta, value, grad = cand, cv, cg
        iters += 1
    converged = bool(np.max(np.abs(grad)) < gtol)
    cov = np.linalg.pinv(-lik.hessian(theta))
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None)).reshape(2, J).T
    return IrtFit(theta[:J].copy(), theta[J:].copy(), se, float(value), converged, iters, names)


@dataclass(frozen=True)
class MonotonicitySuggestion:
    direction: Direction | None
    label: str
    rationale: str

    def as_dict(self) -> dict:
        return {"direction": self.direction.value if self.direction else None,
                "label": self.label, "rationale": self.rationale}


def monotonicity_check(fit: IrtFit, treat_item: int, second_item: int,
                       outcome_monotone: bool = True) -> MonotonicitySuggestion:
    """Suggest a bounds direction from the fitted discriminations.

    alpha2 >= alpha1 > 0 gives the increasing selection chain (mu1 is the
    upper bound); alpha2 <= alpha1 < 0 the decreasing one (mu2 upper).
    The suggestion relies on the outcome being non-decreasing in (x, u, a),
    which the data cannot verify.
    """
    a1 = float(fit.discriminations[treat_item])
    a2 = float(fit.discriminations[second_item])
    tag = f"alpha1={a1:.4f}, alpha2={a2:.4f}"
    if not outcome_monotone:
        return MonotonicitySuggestion(None, "inconclusive",
                                      f"{tag}; outcome monotonicity not attested")
    if a2 >= a1 > 0:
        return MonotonicitySuggestion(
            Direction.MU1_UPPER, "increasing",
            f"{tag}: alpha2 >= alpha1 > 0, selection chain h(0,0) <= h(1,0) <= h(0,1) <= h(1,1); "
            "differential-effect estimator is the upper bound")
    if a2 <= a1 < 0:
        return MonotonicitySuggestion(
            Direction.MU2_UPPER, "decreasing",
            f"{tag}: alpha2 <= alpha1 < 0, selection chain h(0,0) >= h(1,0) >= h(0,1) >= h(1,1); "
            "IPW estimator is the upper bound")
    return MonotonicitySuggestion(None, "inconclusive",
                                  f"{tag}: discriminations do not satisfy either sufficient ordering")


@dataclass(frozen=True)
class HOracleSpec:
    """Inputs of the h(a, b) integrals.

    ``f_a(x, u, a)`` must accept broadcastable arrays. The latent u is standard
    normal and independent of x; x is integrated over ``x_nodes`` with
    probability weights ``x_weights`` (default: a single point at 0).
    """

    f_a: Callable
    alpha1: float
    alpha2: float
    beta1: float = 0.0
    beta2: float = 0.0
    x_nodes: tuple[float, ...] = (0.0,)
    x_weights: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        w = np.asarray(self.x_weights, dtype=np.float64)
        if len(self.x_nodes) != w.shape[0] or np.any(w < 0):
            raise ValueError("x_nodes and x_weights must match and be non-negative")
        if abs(float(w.sum()) - 1.0) > 1e-10:
            raise ValueError("x_weights must sum to 1")


def _h_quadrature(spec: HOracleSpec, a: int, b: int, m: int) -> float:
    t, w = _std_normal_rule(m)
    pab = joint_prob(spec.alpha1, spec.beta1, spec.alpha2, spec.beta2, a, b, t)
    den = float(np.sum(w * pab))
    if not den > 0.0:
        raise EstimationError(f"zero denominator mass for h({a},{b})", stage="irt")
    xs = np.asarray(spec.x_nodes, dtype=np.float64)
    xw = np.asarray(spec.x_weights, dtype=np.float64)
    f = np.broadcast_to(spec.f_a(xs[:, None], t[None, :], a), (xs.shape[0], t.shape[0]))
    num = float(xw @ (f @ (w * pab)))
    return num / den


def h_oracle(spec: HOracleSpec, a: int, b: int, rtol: float = 1e-6, max_nodes: int = 641) -> float:
    """h(a, b) = E[f_a(X, U) | Z1=a, Z2=b] by Gauss-Hermite quadrature in u.

    The node count starts at 41 and doubles until successive values agree to
    ``rtol`` (relative, with an absolute floor of ``rtol`` near zero).
    """
    m = N_NODES
    prev = _h_quadrature(spec, a, b, m)
    while m < max_nodes:
        m = 2 * m - 1
        cur = _h_quadrature(spec, a, b, m)
        if abs(cur - prev) <= rtol * max(abs(cur), 1.0):
            return cur
        prev = cur
    return prev


def h_chain(spec: HOracleSpec, rtol: float = 1e-6) -> dict[tuple[int, int], float]:
    return {(a, b): h_oracle(spec, a, b, rtol) for a in (0, 1) for b in (0, 1)}


def h_monte_carlo(spec: HOracleSpec, draws: int = 10_000_000, seed: int = 0,
                  chunk: int = 1_000_000) -> dict[tuple[int, int], MCValue]:
    """Self-normalized Monte Carlo estimate of all four h(a, b) from shared draws."""
    rng = np.random.default_rng(seed)
    xs = np.asarray(spec.x_nodes, dtype=np.float64)
    xw = np.asarray(spec.x_weights, dtype=np.float64)
    acc = {(a, b): RatioAccumulator() for a in (0, 1) for b in (0, 1)}
    done = 0
    while done < draws:
        k = min(chunk, draws - done)
        u = rng.standard_normal(k)
        x = xs[rng.choice(xs.shape[0], size=k, p=xw)] if xs.shape[0] > 1 else np.full(k, xs[0])
        f = {a: np.broadcast_to(spec.f_a(x, u, a), (k,)) for a in (0, 1)}
        for (a, b), r in acc.items():
            r.add(joint_prob(spec.alpha1, spec.beta1, spec.alpha2, spec.beta2, a, b, u), f[a])
        done += k
    return {key: r.result() for key, r in acc.items()}
