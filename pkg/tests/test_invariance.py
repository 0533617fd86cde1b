"""Location, scale, permutation and seed properties of the estimators.

Each property bumps ``CASES`` once per generated example so the acceptance
suite can report how many random cases were exercised.
"""
import json
import re
import tempfile
from collections import Counter
from pathlib import Path

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from diffbound.ate import (Direction, aipw_estimate, ate_bounds, dim_estimate, ipw_estimate,
                           variance_aipw, variance_dim, variance_ipw)
from diffbound.cate import CateKernels, KernelSpec, cate_bounds, cate_variances, mu1_at, mu2_at
from diffbound.cli import RunConfig, run_ate
from diffbound.data import ColumnMap, Dataset, differential_masks, write_csv
from diffbound.inference import bootstrap_estimates
from diffbound.propensity import fit_logistic, fit_outcome_regression
from conftest import make_dataset

CASES: Counter = Counter()

seeds = st.integers(0, 2**31 - 1)
shifts = st.floats(-1e3, 1e3, allow_nan=False)
KERN = CateKernels(KernelSpec("gaussian", 0.7), KernelSpec("gaussian", 0.9), KernelSpec("gaussian", 0.8))


def close(a, b, scale):
    return abs(a - b) <= 1e-9 * (1.0 + scale)


def _data(seed, n=150):
    return make_dataset(np.random.default_rng(seed), n=n)


@settings(max_examples=300)
@given(seed=seeds, b=shifts, c=shifts)
def test_ate_location_shift(seed, b, c):
    # Y -> Y + b + c z1: the constant b leaves effects alone, the treated shift c moves them by c
    CASES["ate_location"] += 1
    d = _data(seed)
    m = fit_logistic(d)
    ds = d.with_y(d.y + b + c * d.z1)
    scale = abs(b) + abs(c) + float(np.max(np.abs(d.y)))
    assert close(dim_estimate(ds), dim_estimate(d) + c, scale)
    # the IPW contrast is linear in Y, so it moves by b and c times the contrasts of 1 and z1
    one = ipw_estimate(d.with_y(np.ones(d.n)), m)
    treated = ipw_estimate(d.with_y(d.z1.astype(float)), m)
    assert close(ipw_estimate(ds, m), ipw_estimate(d, m) + b * one + c * treated, scale * 100)
    # AIPW with a refitted outcome model moves by exactly c
    a0 = aipw_estimate(d, m, fit_outcome_regression(d))
    a1 = aipw_estimate(ds, m, fit_outcome_regression(ds))
    assert close(a1, a0 + c, scale * 100)
    # variances
    assert close(variance_dim(ds), variance_dim(d), scale ** 2)
    dc = d.with_y(d.y + b)
    assert close(variance_aipw(dc, m, fit_outcome_regression(dc)),
                 variance_aipw(d, m, fit_outcome_regression(d)), scale ** 2 * 1e4)
    # the bound built from the differential effect moves with it
    b0 = ate_bounds(d, m, Direction.POINT)
    b1 = ate_bounds(ds, m, Direction.POINT)
    assert close(b1.mu1_hat, b0.mu1_hat + c, scale) and close(b1.sigma1_hat, b0.sigma1_hat, scale)


@settings(max_examples=200)
@given(seed=seeds, b=shifts, c=shifts, x0=st.floats(-1.5, 1.5))
def test_cate_location_shift(seed, b, c, x0):
    CASES["cate_location"] += 1
    d = _data(seed)
    m = fit_logistic(d)
    ds = d.with_y(d.y + b + c * d.z1)
    scale = abs(b) + abs(c) + float(np.max(np.abs(d.y)))
    assert close(mu1_at(ds, x0, KERN.k1, KERN.k2), mu1_at(d, x0, KERN.k1, KERN.k2) + c, scale)
    one = mu2_at(d.with_y(np.ones(d.n)), m, x0, KERN.k3)
    treated = mu2_at(d.with_y(d.z1.astype(float)), m, x0, KERN.k3)
    assert close(mu2_at(ds, m, x0, KERN.k3),
                 mu2_at(d, m, x0, KERN.k3) + b * one + c * treated, scale * 100)
    v0 = cate_variances(d, m, x0, KERN.k1, KERN.k2, KERN.k3)[0]
    v1 = cate_variances(ds, m, x0, KERN.k1, KERN.k2, KERN.k3)[0]
    assert close(v1, v0, scale ** 2 * 10)


@settings(max_examples=150)
@given(seed=seeds, c10=shifts, c01=shifts)
def test_cell_shift_leaves_variance(seed, c10, c01):
    CASES["cell_shift"] += 1
    d = _data(seed)
    i1, i2 = differential_masks(d)
    y = d.y + c10 * i1 + c01 * i2
    ds = d.with_y(y)
    scale = abs(c10) + abs(c01) + float(np.max(np.abs(d.y)))
    assert close(variance_dim(ds), variance_dim(d), scale ** 2)
    assert close(dim_estimate(ds), dim_estimate(d) + c10 - c01, scale)


@settings(max_examples=150)
@given(seed=seeds, a=st.floats(0.01, 100.0))
def test_scale(seed, a):
    CASES["scale"] += 1
    d = _data(seed)
    m = fit_logistic(d)
    ds = d.with_y(a * d.y)
    assert np.isclose(dim_estimate(ds), a * dim_estimate(d), rtol=1e-10, atol=1e-12)
    assert np.isclose(ipw_estimate(ds, m), a * ipw_estimate(d, m), rtol=1e-10, atol=1e-12)
    assert np.isclose(variance_dim(ds), a * a * variance_dim(d), rtol=1e-10)
    assert np.isclose(variance_ipw(ds, m), a * a * variance_ipw(d, m), rtol=1e-10)


@settings(max_examples=200)
@given(seed=seeds, pseed=seeds)
def test_row_permutation(seed, pseed):
    CASES["permutation"] += 1
    d = _data(seed)
    perm = np.random.default_rng(pseed).permutation(d.n)
    dp = d.take(perm)
    m, mp = fit_logistic(d), fit_logistic(dp)
    assert np.allclose(m.coefficients, mp.coefficients, atol=1e-9)
    b, bp = ate_bounds(d, m), ate_bounds(dp, mp)
    for f in ("mu1_hat", "mu2_hat", "sigma1_hat", "sigma2_hat", "tau_minus", "tau_plus"):
        assert np.isclose(getattr(b, f), getattr(bp, f), rtol=1e-9, atol=1e-10)
    c, cp = cate_bounds(d, m, 0.2, KERN), cate_bounds(dp, mp, 0.2, KERN)
    for f in ("mu1x", "mu2x", "sigma1x_hat", "sigma2x_hat"):
        assert np.isclose(getattr(c, f), getattr(cp, f), rtol=1e-9, atol=1e-10)


@settings(max_examples=30)
@given(seed=seeds, boot_seed=st.integers(0, 10_000))
def test_seed_reproducibility(seed, boot_seed):
    CASES["seed"] += 1
    d = _data(seed, n=120)
    a = bootstrap_estimates(d, L=100, seed=boot_seed, workers=1)
    b = bootstrap_estimates(d, L=100, seed=boot_seed, workers=2)
    assert a.w1.tobytes() == b.w1.tobytes() and a.w2.tobytes() == b.w2.tobytes()
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "d.csv"
        write_csv(Dataset(d.y, d.z1, d.z2, d.x), path)
        cfg = RunConfig("ate", input=str(path), columns=ColumnMap(x=("x1", "x2")),
                        direction=Direction.POINT, n_boot=100, seed=boot_seed)
        r1, r2 = run_ate(cfg).to_json(), run_ate(cfg).to_json()
    strip = lambda s: re.sub(r'"timestamp": "[^"]*"', "", s)  # noqa: E731
    assert strip(r1) == strip(r2)
    assert json.loads(r1)["provenance"]["seed"] == boot_seed


PROPERTIES = [test_ate_location_shift, test_cate_location_shift, test_cell_shift_leaves_variance,
              test_scale, test_row_permutation, test_seed_reproducibility]
