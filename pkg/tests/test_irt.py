import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import expit

from diffbound.ate import Direction
from diffbound.errors import DataError
from diffbound.irt import (HOracleSpec, IrtFit, fit_2pl, h_chain, h_monte_carlo, h_oracle,
                           item_prob, joint_prob, monotonicity_check)

par = st.floats(-4, 4)


def test_item_prob_examples():
    assert item_prob(2.7, 0.4, 0.4) == 0.5
    np.testing.assert_allclose(item_prob(0.0, 1.0, np.linspace(-5, 5, 7)), 0.5)
    assert item_prob(1.0, 0.0, 2.0) == pytest.approx(0.8807970780, abs=1e-10)


@given(a1=par, b1=par, a2=par, b2=par, u=st.floats(-8, 8))
def test_joint_prob_properties(a1, b1, a2, b2, u):
    tot = sum(joint_prob(a1, b1, a2, b2, a, b, u) for a in (0, 1) for b in (0, 1))
    assert tot == pytest.approx(1.0, abs=1e-12)
    marg = joint_prob(a1, b1, a2, b2, 1, 0, u) + joint_prob(a1, b1, a2, b2, 1, 1, u)
    assert marg == pytest.approx(item_prob(a1, b1, u), abs=1e-12)
    marg2 = joint_prob(a1, b1, a2, b2, 0, 1, u) + joint_prob(a1, b1, a2, b2, 1, 1, u)
    assert marg2 == pytest.approx(item_prob(a2, b2, u), abs=1e-12)


def test_joint_prob_closed_form():
    rng = np.random.default_rng(0)
    a1, b1, a2, b2 = 0.8, -0.3, 1.7, 0.6
    for u in rng.normal(0, 2, 100):
        for a in (0, 1):
            for b in (0, 1):
                num = math.exp(a * a1 * (u - b1) + b * a2 * (u - b2))
                den = (1 + math.exp(a1 * (u - b1))) * (1 + math.exp(a2 * (u - b2)))
                assert joint_prob(a1, b1, a2, b2, a, b, u) == pytest.approx(num / den, abs=1e-12)
    assert joint_prob(1.1, 0.2, 1.1, 0.2, 1, 0, 0.7) == joint_prob(1.1, 0.2, 1.1, 0.2, 0, 1, 0.7)


def _items(alpha, beta, n, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(n)
    p = expit(np.asarray(alpha)[None, :] * (u[:, None] - np.asarray(beta)[None, :]))
    return (rng.random(p.shape) < p).astype(int)


def test_fit_2pl_recovery_and_dominance():
    alpha = np.array([0.5, 1.5, 1.0, 2.0])
    beta = np.zeros(4)
    Y = _items(alpha, beta, 5000, 1)
    fit = fit_2pl(Y, item_names=["a", "b", "c", "d"])
    assert fit.converged
    assert np.all(np.abs(fit.discriminations - alpha) < 0.2)
    assert list(np.argsort(fit.discriminations)) == list(np.argsort(alpha))
    assert np.all(np.isfinite(fit.std_errors)) and np.all(fit.std_errors > 0)
    # log-likelihood at the estimate dominates the generating parameters
    from diffbound.irt import _MarginalLikelihood
    lik = _MarginalLikelihood(Y, 41)
    assert fit.log_likelihood >= lik.value_grad(np.r_[alpha, beta])[0]
    rows = fit.rows()
    assert rows[0][0] == "a" and len(rows[0]) == 5


def test_fit_2pl_degenerate_items():
    rng = np.random.default_rng(3)
    base = _items([1.0, 1.0], [0.0, 0.0], 800, 3)
    Y = np.column_stack([base[:, 0], base[:, 0], base[:, 1]])
    fit = fit_2pl(Y)
    assert np.all(np.isfinite(fit.discriminations)) and np.all(np.isfinite(fit.std_errors))
    assert isinstance(fit.converged, bool)
    with pytest.raises(DataError, match="constant"):
        fit_2pl(np.column_stack([np.ones(50, int), rng.integers(0, 2, 50)]))
    with pytest.raises(DataError):
        fit_2pl(rng.integers(0, 2, (50, 1)))
    with pytest.raises(DataError):
        fit_2pl(np.full((5, 2), 2))


def _fake(a1, a2):
    return IrtFit(np.array([a1, a2]), np.zeros(2), np.zeros((2, 2)), 0.0, True)


def test_monotonicity_examples():
    s = monotonicity_check(_fake(0.19, 0.84), 0, 1)
    assert s.direction is Direction.MU1_UPPER and s.label == "increasing"
    s = monotonicity_check(_fake(-0.5, -1.2), 0, 1)
    assert s.direction is Direction.MU2_UPPER
    s = monotonicity_check(_fake(1.2, 0.3), 0, 1)
    assert s.direction is None and s.label == "inconclusive"
    s = monotonicity_check(_fake(0.19, 0.84), 0, 1, outcome_monotone=False)
    assert s.direction is None
    assert s.as_dict()["direction"] is None


def test_h_oracle_examples():
    zero = HOracleSpec(lambda x, u, a: 0.0 * u, 1.0, 2.0)
    assert all(v == 0.0 for v in h_chain(zero).values())
    sym = HOracleSpec(lambda x, u, a: np.tanh(u) + x, 1.3, 1.3, 0.2, 0.2,
                      x_nodes=(-1.0, 1.0), x_weights=(0.5, 0.5))
    assert h_oracle(sym, 1, 0) == pytest.approx(h_oracle(sym, 0, 1), abs=1e-12)
    spec = HOracleSpec(lambda x, u, a: u, 1.0, 2.0)
    h = h_chain(spec)
    assert h[0, 0] <= h[1, 0] <= h[0, 1] <= h[1, 1]
    mc = h_monte_carlo(spec, draws=2_000_000, seed=5)
    for k in h:
        assert mc[k].within(h[k], 4.0)
    with pytest.raises(ValueError):
        HOracleSpec(lambda x, u, a: u, 1.0, 2.0, x_nodes=(0.0, 1.0), x_weights=(0.5, 0.6))


def test_h_oracle_quadrature_converged():
    spec = HOracleSpec(lambda x, u, a: np.exp(0.5 * u), 1.5, 3.0, -0.5, 0.5)
    a = h_oracle(spec, 1, 1)
    b = h_oracle(spec, 1, 1, rtol=1e-10)
    assert a == pytest.approx(b, rel=1e-5)
