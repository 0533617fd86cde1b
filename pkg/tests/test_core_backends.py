"""The compiled kernels and the numpy fallback implement the same functions."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffbound import _backend, _core_py
from conftest import BACKENDS

pytestmark = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")
C = BACKENDS[-1]
P = _core_py


def test_backend_selected():
    assert _backend.BACKEND in ("cython", "python")


@settings(max_examples=40)
@given(seed=st.integers(0, 10_000), n=st.integers(30, 300), p=st.integers(1, 5),
       ridge=st.sampled_from([0.0, 0.5]))
def test_irls_agree(seed, n, p, ridge):
    rng = np.random.default_rng(seed)
    D = np.column_stack([np.ones(n), rng.standard_normal((n, p))])
    t = (rng.random(n) < 0.4).astype(float)
    bc, ic, sc, trc = C.irls_logistic(D, t, 100, 1e-8, ridge, 30.0)
    bp, ip, sp, trp = P.irls_logistic(D, t, 100, 1e-8, ridge, 30.0)
    assert sc == sp
    if sc == P.STATUS_CONVERGED:
        np.testing.assert_allclose(bc, bp, atol=1e-7)
        assert trc[-1] == pytest.approx(trp[-1], rel=1e-12, abs=1e-9)


@settings(max_examples=40)
@given(seed=st.integers(0, 10_000), n=st.integers(3, 120), kind=st.sampled_from([0, 1]))
def test_loo_cv_agree(seed, n, kind):
    rng = np.random.default_rng(seed)
    xs = rng.standard_normal(n)
    ys = rng.standard_normal(n)
    grid = np.geomspace(0.01, 3.0, 12)
    a = C.loo_cv_scores(xs, ys, grid, kind)
    b = P.loo_cv_scores(xs, ys, grid, kind)
    np.testing.assert_array_equal(np.isnan(a), np.isnan(b))
    np.testing.assert_allclose(a[~np.isnan(a)], b[~np.isnan(b)], rtol=1e-10, atol=1e-12)


@settings(max_examples=60)
@given(seed=st.integers(0, 10_000), L=st.integers(1, 300), G=st.integers(1, 50),
       ties=st.booleans(), data=st.data())
def test_shifted_max_quantiles_exact(seed, L, G, ties, data):
    rng = np.random.default_rng(seed)
    r1 = rng.standard_normal(L)
    r2 = rng.standard_normal(L)
    if ties:
        r1, r2 = np.round(r1), np.round(r2)
    s1 = rng.standard_normal(G)
    s2 = rng.standard_normal(G)
    k = data.draw(st.integers(0, L - 1))
    a = C.shifted_max_quantiles(r1, r2, s1, s2, k)
    b = P.shifted_max_quantiles(r1, r2, s1, s2, k)
    direct = np.array([np.sort(np.maximum(s1[g] - r1, s2[g] - r2))[k] for g in range(G)])
    np.testing.assert_array_equal(a, direct)
    np.testing.assert_array_equal(b, direct)


def test_quantile_index_range_checked():
    with pytest.raises(ValueError):
        C.shifted_max_quantiles(np.zeros(3), np.zeros(3), np.zeros(1), np.zeros(1), 3)


def test_irls_status_codes(core):
    rng = np.random.default_rng(0)
    x = rng.standard_normal(200)
    D = np.column_stack([np.ones(200), x])
    assert core.irls_logistic(D, (x > 0).astype(float), 100, 1e-8, 0.0, 30.0)[2] == P.STATUS_DIVERGED
    Dsing = np.column_stack([np.ones(200), x, 2 * x])
    t = (rng.random(200) < 0.5).astype(float)
    assert core.irls_logistic(Dsing, t, 100, 1e-8, 0.0, 30.0)[2] == P.STATUS_SINGULAR
    _, it, st_, _ = core.irls_logistic(D, t, 1, 1e-8, 0.0, 30.0)
    assert (it, st_) == (1, P.STATUS_MAX_ITER)


def test_irls_trace_non_decreasing(core):
    rng = np.random.default_rng(1)
    D = np.column_stack([np.ones(500), rng.standard_normal((500, 3)) * 3])
    t = (rng.random(500) < 1 / (1 + np.exp(-D @ [0.1, 1.5, -1.0, 0.7]))).astype(float)
    _, _, status, trace = core.irls_logistic(D, t, 100, 1e-8, 0.0, 30.0)
    assert status == P.STATUS_CONVERGED
    assert np.all(np.diff(trace) >= 0)
