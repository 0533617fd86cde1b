import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import diffbound.inference as inf
from diffbound.ate import Direction, variance_dim
from diffbound.data import Dataset
from diffbound.errors import FitError, InferenceError
from diffbound.inference import (BootstrapDraws, EstimatorConfig, accept_many, bootstrap_estimates,
                                 confidence_region, oriented, quantile_index, two_step_test,
                                 worker_count)
from diffbound.sim import SimConfig, generate
from algo_fixtures import FIXTURES, compare_all, reference_accept, taus_for
from conftest import make_dataset


def normal_draws(seed, L=1000, e1=1.0, e2=2.0, s1=1.0, s2=1.5, n=500):
    rng = np.random.default_rng(seed)
    return BootstrapDraws(e1 + s1 / np.sqrt(n) * rng.standard_normal(L),
                          e2 + s2 / np.sqrt(n) * rng.standard_normal(L), s1, s2, n, seed, e1, e2)


def test_quantile_index():
    assert quantile_index(0.5, 10) == 4
    assert quantile_index(0.95, 20) == 18
    assert quantile_index(0.955, 20) == 19
    assert quantile_index(0.995, 1000) == 994
    assert quantile_index(1.0, 7) == 6
    assert quantile_index(0.0, 7) == 0


def test_fixture_decisions_match_reference():
    total, bad = compare_all(two_step_test)
    assert bad == 0 and total == 3 * 3 * 121
    total, bad = compare_all(lambda bd, t, a, b: accept_many(bd, [t], a, b)[0])
    assert bad == 0


def test_fixture_decisions_are_not_trivial():
    # each fixture has both accepted and rejected tau at the default levels
    for bd in FIXTURES.values():
        dec = {reference_accept(bd, t, 0.05, 0.005) for t in taus_for(bd)}
        assert dec == {True, False}


def test_forced_examples():
    bd = normal_draws(0)
    assert not two_step_test(bd, -5.0)
    wide = normal_draws(1, s1=20.0, s2=20.0, n=100)
    assert two_step_test(wide, 1.5)


def test_degenerate_draws_collapse():
    bd = BootstrapDraws(np.full(200, 1.2), np.full(200, 3.7), 0.4, 0.6, 100, 0, 1.2, 3.7)
    reg = confidence_region(bd)
    span = (3.7 - 1.2) + 16 * 0.6
    assert reg.lower == pytest.approx(1.2, abs=2e-4 * span)
    assert reg.upper == pytest.approx(3.7, abs=2e-4 * span)
    assert reg.contiguous and not reg.warnings


def test_region_contains_estimates_and_orientation():
    bd = normal_draws(2)
    reg = confidence_region(bd)
    assert reg.lower < 1.0 < 2.0 < reg.upper and reg.contiguous
    assert reg.contains(1.5) and not reg.contains(reg.upper + 1)
    flipped = BootstrapDraws(bd.w2, bd.w1, bd.sigma2_hat, bd.sigma1_hat, bd.n, bd.seed, 2.0, 1.0)
    reg2 = confidence_region(flipped, direction=Direction.MU1_UPPER)
    assert (reg2.lower, reg2.upper) == (reg.lower, reg.upper)
    reg3 = confidence_region(flipped, direction=Direction.POINT)
    assert (reg3.lower, reg3.upper) == (reg.lower, reg.upper)
    assert oriented(bd, Direction.MU2_UPPER) is bd
    d = reg.as_dict()
    assert d["n_boot"] == 1000 and d["grid_points"] == 2001


def test_region_scan_is_monotone_from_each_side():
    for seed in range(5):
        bd = normal_draws(seed)
        grid = np.linspace(-1, 4, 3001)
        acc = accept_many(bd, grid)
        idx = np.flatnonzero(acc)
        assert idx.size and idx[-1] - idx[0] + 1 == idx.size


def test_no_tau_accepted():
    bd = BootstrapDraws(np.full(200, 10.0), np.full(200, 0.0), 0.01, 0.01, 100, 0, 10.0, 0.0)
    with pytest.raises(InferenceError, match="no tau accepted"):
        confidence_region(bd)


def test_level_and_input_errors():
    bd = normal_draws(0, L=100)
    with pytest.raises(InferenceError):
        two_step_test(bd, 0.0, alpha=0.05, beta=0.05)
    with pytest.raises(InferenceError):
        two_step_test(bd, np.nan)
    with pytest.raises(InferenceError):
        BootstrapDraws([1.0, np.inf], [1.0, 2.0], 1.0, 1.0, 10)
    with pytest.raises(InferenceError):
        BootstrapDraws([1.0], [1.0, 2.0], 1.0, 1.0, 10)


@settings(max_examples=40)
@given(seed=st.integers(0, 10_000), tau=st.floats(-1, 4))
def test_replicate_order_invariance(seed, tau):
    bd = normal_draws(seed % 50, L=200)
    perm = np.random.default_rng(seed).permutation(200)
    pb = BootstrapDraws(bd.w1[perm], bd.w2[perm], bd.sigma1_hat, bd.sigma2_hat, bd.n)
    assert two_step_test(bd, tau) == two_step_test(pb, tau)


def test_beta_stability():
    # endpoint noise across independent L=1000 bootstrap sets vs the effect of a smaller beta
    lows, highs, dl, dh = [], [], [], []
    for seed in range(8):
        bd = normal_draws(100 + seed)
        a = confidence_region(bd, beta=0.005)
        b = confidence_region(bd, beta=0.001)
        lows.append(a.lower)
        highs.append(a.upper)
        dl.append(abs(a.lower - b.lower))
        dh.append(abs(a.upper - b.upper))
    assert np.mean(dl) < np.ptp(lows)
    assert np.mean(dh) < np.ptp(highs)


def test_bootstrap_degenerate_and_deterministic(rng):
    d = make_dataset(rng, n=150)
    const = d.with_y(np.full(d.n, 3.0))
    bd = bootstrap_estimates(const, L=100, seed=4, workers=1)
    assert np.all(bd.w1 == 0.0)
    zero = d.with_y(np.zeros(d.n))
    bd = bootstrap_estimates(zero, L=100, seed=4, workers=1)
    assert np.all(bd.w1 == 0.0) and np.all(bd.w2 == 0.0)
    a = bootstrap_estimates(d, L=120, seed=9, workers=1)
    b = bootstrap_estimates(d, L=120, seed=9, workers=3)
    assert a.w1.tobytes() == b.w1.tobytes() and a.w2.tobytes() == b.w2.tobytes()
    c = bootstrap_estimates(d, L=120, seed=10, workers=1)
    assert not np.array_equal(a.w1, c.w1)
    with pytest.raises(InferenceError):
        bootstrap_estimates(d, L=99)


def test_bootstrap_persistent_failure(rng, monkeypatch):
    d = make_dataset(rng, n=100)
    est = inf.full_sample_estimate(d, EstimatorConfig())

    def boom(*_):
        raise FitError("forced")

    monkeypatch.setattr(inf, "_replicate_pair", boom)
    with pytest.raises(InferenceError, match="after 10 redraws"):
        bootstrap_estimates(d, L=100, estimate=est, workers=1)


def test_worker_count(monkeypatch):
    assert worker_count(3) == 3
    monkeypatch.setenv("DIFFBOUND_THREADS", "2")
    assert worker_count() == 2
    monkeypatch.setenv("DIFFBOUND_THREADS", "junk")
    assert worker_count() >= 1


@pytest.mark.slow
def test_bootstrap_sd_matches_sandwich():
    d = generate(SimConfig(n=1000, p=0.7), seed=11)
    bd = bootstrap_estimates(d, L=1000, seed=1)
    sd = np.std(bd.w1, ddof=1)
    assert abs(sd / np.sqrt(variance_dim(d)) - 1) < 0.25


def test_cate_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig(target="cate")
    with pytest.raises(ValueError):
        EstimatorConfig(target="att")
