import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from recdev.bandwidth import BandwidthSchedule
from recdev.densities import GaussianDensity
from recdev.estimator import (
    RecursiveEstimator,
    batch_values,
    bias_normalizer,
    bias_ratio_limit,
    bias_sup_bound,
    decompose,
    expected_estimate,
)
from recdev.kernels import builtin_kernel

SCHED = BandwidthSchedule(kind="power", c=0.7, a=0.3)


def _naive(kernel, schedule, X, grid, alpha=None):
    # direct transcription of the defining average, one term at a time
    d = kernel.dimension
    p = d + (sum(alpha) if alpha else 0)
    alpha = alpha if alpha is not None else (0,) * d
    out = np.zeros(len(grid))
    for i, xi in enumerate(X, start=1):
        h = schedule.h(i)
        out += kernel.deriv_eval(alpha, (grid - xi) / h) / h**p
    return out / len(X)


@pytest.mark.parametrize("d,alpha", [(1, None), (1, (1,)), (2, None), (2, (1, 0))])
def test_streaming_equals_batch_equals_naive(d, alpha):
    rng = np.random.Generator(np.random.Philox(key=np.array([3, 0], dtype=np.uint64)))
    kernel = builtin_kernel("gaussian", d)
    # keep a (d + 2|alpha|) < 1 across every parametrization
    sched = BandwidthSchedule(kind="power", c=0.7, a=0.2)
    X = rng.normal(size=(400, d))
    grid = rng.normal(size=(7, d))
    est = RecursiveEstimator(kernel, sched, grid, alpha=alpha)
    for row in X:
        est.update(row)
    stream = est.values()
    batch = batch_values(kernel, sched, X, grid, alpha=alpha)
    naive = _naive(kernel, sched, X, grid, alpha=alpha)
    assert_allclose(stream, batch, rtol=0, atol=1e-12)
    assert_allclose(stream, naive, rtol=0, atol=1e-12)


def test_update_batch_matches_single_updates():
    kernel = builtin_kernel("epanechnikov", 1)
    rng = np.random.Generator(np.random.Philox(key=np.array([4, 0], dtype=np.uint64)))
    X = rng.normal(size=(100, 1))
    grid = np.linspace(-2, 2, 5).reshape(-1, 1)
    one = RecursiveEstimator(kernel, SCHED, grid)
    for row in X:
        one.update(row)
    many = RecursiveEstimator(kernel, SCHED, grid)
    many.update_batch(X[:37])
    many.update_batch(X[37:])
    assert many.count == one.count == 100
    assert_allclose(many.values(), one.values(), rtol=0, atol=0)


def test_estimator_is_order_sensitive():
    # h_i attaches to arrival order, so permuting the stream moves the value
    kernel = builtin_kernel("gaussian", 1)
    X = np.array([[0.0], [2.0], [-1.0], [0.5]])
    grid = np.array([[0.0]])
    fwd = batch_values(kernel, SCHED, X, grid)
    rev = batch_values(kernel, SCHED, X[::-1], grid)
    assert abs(fwd[0] - rev[0]) > 1e-6


def test_values_requires_data_and_reset_clears():
    kernel = builtin_kernel("gaussian", 1)
    est = RecursiveEstimator(kernel, SCHED, np.array([[0.0]]))
    with pytest.raises(ValueError):
        est.values()
    est.update(np.array([0.3]))
    assert est.count == 1
    est.reset()
    assert est.count == 0
    with pytest.raises(ValueError):
        est.values()


@given(st.integers(min_value=1, max_value=60))
@settings(max_examples=20, deadline=None)
def test_streaming_prefix_consistency(n):
    # after n updates the state equals a fresh batch over the first n rows
    kernel = builtin_kernel("gaussian", 1)
    rng = np.random.Generator(np.random.Philox(key=np.array([9, 0], dtype=np.uint64)))
    X = rng.normal(size=(n, 1))
    grid = np.array([[0.0], [0.8]])
    est = RecursiveEstimator(kernel, SCHED, grid)
    est.update_batch(X)
    assert_allclose(est.values(), batch_values(kernel, SCHED, X, grid), atol=1e-13)


def test_expected_estimate_gaussian_convolution_oracle():
    from scipy.stats import norm

    # K and f standard normal: E K_h * f at x is a normal pdf with the
    # bandwidth folded into the variance, averaged over the schedule
    kernel = builtin_kernel("gaussian", 1)
    f = GaussianDensity(mean=[0.0], sigma=[1.0])
    n = 50
    hs = SCHED.values(n)
    for x in (0.0, 0.9):
        ref = np.mean(norm.pdf(x, scale=np.sqrt(1.0 + hs**2)))
        ours = expected_estimate(kernel, SCHED, f, n, np.array([[x]]))[0]
        assert_allclose(ours, ref, rtol=1e-11)


def test_expected_estimate_derivative_case():
    from scipy.stats import norm

    kernel = builtin_kernel("gaussian", 1)
    f = GaussianDensity(mean=[0.0], sigma=[1.0])
    n = 30
    hs = SCHED.values(n)
    x = 0.4
    # differentiating the smoothed density: mean of N(0, 1 + h_i^2) slopes
    s2 = 1.0 + hs**2
    ref = np.mean(-x / s2 * norm.pdf(x, scale=np.sqrt(s2)))
    ours = expected_estimate(kernel, SCHED, f, n, np.array([[x]]), alpha=(1,))[0]
    assert_allclose(ours, ref, rtol=1e-10)


def test_decompose_identity():
    kernel = builtin_kernel("gaussian", 1)
    f = GaussianDensity(mean=[0.0], sigma=[1.0])
    rng = np.random.Generator(np.random.Philox(key=np.array([12, 0], dtype=np.uint64)))
    X = f.sample(rng, 200)
    dec = decompose(kernel, SCHED, f, X, np.array([[0.2]]))
    assert_allclose(dec.estimate - dec.target, dec.bias + dec.fluctuation, atol=1e-12)
    assert_allclose(dec.mean - dec.target, dec.bias, atol=1e-14)


def test_bias_normalizer():
    n = 1000
    expected = math.fsum(SCHED.h(i) ** 2 for i in range(1, n + 1)) / n
    assert_allclose(bias_normalizer(SCHED, 2, n), expected, rtol=1e-13)


def test_bias_ratio_limit_gaussian():
    kernel = builtin_kernel("gaussian", 1)
    f = GaussianDensity(mean=[0.0], sigma=[1.0])
    lim = bias_ratio_limit(kernel, f, 2, np.array([[0.0]]))[0]
    # ((-1)^2/2!) m_2(K) f''(0) with m_2 = 1
    assert_allclose(lim, -1.0 / (2 * math.sqrt(2 * math.pi)), rtol=1e-12)


def test_bias_ratio_converges_to_limit():
    kernel = builtin_kernel("gaussian", 1)
    f = GaussianDensity(mean=[0.0], sigma=[1.0])
    pt = np.array([[0.0]])
    lim = bias_ratio_limit(kernel, f, 2, pt)[0]
    errs = []
    for n in (200, 2000, 20000):
        ratio = (expected_estimate(kernel, SCHED, f, n, pt)[0] - f.pdf(pt)[0]) / bias_normalizer(
            SCHED, 2, n
        )
        errs.append(abs(ratio - lim))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.02 * abs(lim)


def test_bias_sup_bound_holds_at_every_n():
    kernel = builtin_kernel("gaussian", 1)
    f = GaussianDensity(mean=[0.0], sigma=[1.0])
    m2 = f.max_abs_derivative(2)
    bound = bias_sup_bound(kernel, 2, m2)
    assert_allclose(bound, m2 / 2.0, rtol=1e-9)  # gaussian second abs moment is 1
    grid = np.linspace(-2.5, 2.5, 11).reshape(-1, 1)
    targets = f.pdf(grid)
    for n in (1, 7, 100, 500):
        sup_norm = np.max(
            np.abs(expected_estimate(kernel, SCHED, f, n, grid) - targets)
        ) / bias_normalizer(SCHED, 2, n)
        assert sup_norm <= bound * (1 + 1e-9)


def test_bias_ratio_limit_vanishes_at_inflection():
    # at |x| = 1 the second derivative of the standard normal is zero
    kernel = builtin_kernel("gaussian", 1)
    f = GaussianDensity(mean=[0.0], sigma=[1.0])
    lim = bias_ratio_limit(kernel, f, 2, np.array([[1.0]]))[0]
    assert abs(lim) < 1e-14
