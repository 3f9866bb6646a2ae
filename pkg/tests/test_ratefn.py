import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from recdev.bandwidth import ScalingSequence
from recdev.kernels import KernelModel, builtin_kernel
from recdev.ratefn import (
    PsiEvaluator,
    RateValue,
    UniformRateSpec,
    phi_maximizer,
    pointwise_rate_density,
    quadratic_rate,
    uniform_cgf_limit,
    uniform_rate,
)

GAUSS = builtin_kernel("gaussian", 1)
EPAN = builtin_kernel("epanechnikov", 1)


def _psi_oracle_1d(kernel, a, u, zmax):
    # independent route: scipy nested quadrature of the defining integral
    from scipy.integrate import quad

    def inner(s):
        val, _ = quad(
            lambda z: math.expm1(
                s**a * u * float(kernel.eval(np.array([[z]]))[0]) / (1 - a)
            ),
            -zmax,
            zmax,
            epsabs=1e-13,
            limit=200,
        )
        return s ** (-a) * val

    out, _ = quad(inner, 0.0, 1.0, epsabs=1e-12, limit=200)
    return out


@pytest.mark.parametrize(
    "kernel,a,u,zmax",
    [
        (GAUSS, 0.3, 1.0, 9.0),
        (GAUSS, 0.3, -2.0, 9.0),
        (EPAN, 0.25, 1.0, 1.0),
        (EPAN, 0.25, -3.0, 1.0),
    ],
)
def test_psi_matches_nested_quad_oracle(kernel, a, u, zmax):
    ours = float(PsiEvaluator(kernel, a).psi(u))
    ref = _psi_oracle_1d(kernel, a, u, zmax)
    assert_allclose(ours, ref, rtol=5e-10)


def test_psi_at_zero_and_slope():
    ev = PsiEvaluator(GAUSS, 0.3)
    assert float(ev.psi(0.0)) == 0.0
    assert_allclose(ev.prime_at_zero, 1.0 / 0.7, rtol=1e-15)
    assert_allclose(float(ev.psi_prime(0.0)), 1.0 / 0.7, rtol=1e-9)


def test_psi_prime_matches_central_difference():
    ev = PsiEvaluator(GAUSS, 0.3)
    for u in (-3.0, -0.5, 0.4, 2.0):
        h = 1e-5 * max(1.0, abs(u))
        fd = (float(ev.psi(u + h)) - float(ev.psi(u - h))) / (2 * h)
        assert_allclose(float(ev.psi_prime(u)), fd, rtol=1e-7)


@given(st.floats(min_value=-20.0, max_value=4.0))
@settings(max_examples=30, deadline=None)
def test_psi_strictly_convex(u):
    ev = PsiEvaluator(GAUSS, 0.3)
    assert float(ev.psi_second(u)) > 0.0


def test_psi_negative_saturation_compact_support():
    # u -> -inf: psi tends to -(measure of positive support)/(1 - a d)
    ev = PsiEvaluator(EPAN, 0.25)
    floor = -2.0 / 0.75
    v50, v1000 = float(ev.psi(-50.0)), float(ev.psi(-1000.0))
    assert floor < v1000 < v50 < 0.0
    assert abs(v1000 - floor) < 0.02


def test_psi_vectorized_matches_scalar():
    ev = PsiEvaluator(GAUSS, 0.3)
    us = np.array([-2.0, -0.3, 0.0, 0.7, 1.9])
    vec = ev.psi(us)
    assert_allclose(vec, [float(ev.psi(float(u))) for u in us], rtol=1e-12)


def test_legendre_branches():
    ev_g = PsiEvaluator(GAUSS, 0.3)
    assert not ev_g.legendre(-0.4).finite  # negative deviations impossible
    assert not ev_g.legendre(0.0).finite  # unbounded positive support
    ev_e = PsiEvaluator(EPAN, 0.3)
    at_zero = ev_e.legendre(0.0)
    assert at_zero.finite
    assert_allclose(at_zero.value, 2.0 / 0.7, rtol=1e-12)
    # strict minimum of the conjugate sits at the mean 1/(1-ad)
    assert ev_g.legendre(1.0 / 0.7).value <= 1e-10
    assert ev_e.legendre(1.0 / 0.7).value <= 1e-10


def test_legendre_matches_grid_supremum():
    ev = PsiEvaluator(GAUSS, 0.25)
    us = np.linspace(-40.0, 12.0, 4001)
    psis = ev.psi(us)
    for t in (0.4, 1.0 / 0.75, 2.5):
        grid_sup = float(np.max(us * t - psis))
        val = ev.legendre(t).value
        assert val >= grid_sup - 1e-9
        assert val <= grid_sup + 5e-4  # grid misses the exact maximizer


def test_legendre_derivative_is_inverse_prime():
    ev = PsiEvaluator(GAUSS, 0.3)
    for t in (0.6, 1.1, 2.0, 3.5):
        h = 1e-5
        fd = (ev.legendre(t + h).value - ev.legendre(t - h).value) / (2 * h)
        assert_allclose(fd, ev.inverse_prime(t), atol=2e-6, rtol=1e-6)


@given(st.floats(min_value=0.08, max_value=6.0))
@settings(max_examples=25, deadline=None)
def test_inverse_prime_round_trip(t):
    ev = PsiEvaluator(GAUSS, 0.3)
    u = ev.inverse_prime(t)
    assert_allclose(float(ev.psi_prime(u)), t, rtol=1e-8, atol=1e-10)


@given(st.floats(min_value=0.05, max_value=4.0), st.floats(min_value=0.05, max_value=4.0))
@settings(max_examples=25, deadline=None)
def test_legendre_convexity(t1, t2):
    ev = PsiEvaluator(EPAN, 0.2)
    mid = ev.legendre(0.5 * (t1 + t2)).value
    assert mid <= 0.5 * (ev.legendre(t1).value + ev.legendre(t2).value) + 1e-9


def test_rate_value_contract():
    assert RateValue.of(-1e-12).value == 0.0
    with pytest.raises(ValueError):
        RateValue.of(-1e-3)
    inf = RateValue.infinite()
    assert not inf.finite and inf.csv_str() == "inf"
    assert float(RateValue.of(0.25)) == 0.25
    assert RateValue.of(0.25).csv_str() == "0.25"


def test_pointwise_rate_density_floor_and_zero():
    fx = 0.35
    ev_e = PsiEvaluator(EPAN, 0.3)
    assert pointwise_rate_density(ev_e, fx, 0.0).value == 0.0
    # estimator of a density cannot undershoot below 0: floor at t = -f(x)
    at_floor = pointwise_rate_density(ev_e, fx, -fx)
    assert at_floor.finite
    assert_allclose(at_floor.value, 2.0 * fx, rtol=1e-12)
    assert not pointwise_rate_density(ev_e, fx, -fx - 1e-12).finite
    ev_g = PsiEvaluator(GAUSS, 0.3)
    assert not pointwise_rate_density(ev_g, fx, -fx).finite
    assert pointwise_rate_density(ev_g, fx, 0.4).finite


def test_pointwise_rate_degenerate_point():
    ev = PsiEvaluator(GAUSS, 0.3)
    assert pointwise_rate_density(ev, 0.0, 0.0).value == 0.0
    assert not pointwise_rate_density(ev, 0.0, 0.1).finite


def test_quadratic_rate_closed_form():
    fx = 1.0 / math.sqrt(2 * math.pi)
    l2 = 1.0 / (2 * math.sqrt(math.pi))
    val = quadratic_rate(fx, l2, a=0.3, d=1, alpha_order=0, t=0.2)
    assert_allclose(val.value, 0.16172093894896455, rtol=1e-14)
    assert_allclose(val.value, 0.04 * (1 - 0.09) / (2 * fx * l2), rtol=1e-14)
    # derivative case widens the variance through the kernel derivative norm
    val1 = quadratic_rate(fx, GAUSS.l2_norm_sq((1,)), a=0.2, d=1, alpha_order=1, t=0.2)
    assert_allclose(
        val1.value, 0.04 * (1 - 0.36) / (2 * fx * (1.0 / (4 * math.sqrt(math.pi)))), rtol=1e-9
    )


def test_quadratic_rate_domain_errors():
    with pytest.raises(ValueError):
        quadratic_rate(0.4, 0.3, a=0.5, d=1, alpha_order=1, t=0.1)
    with pytest.raises(ValueError):
        quadratic_rate(-0.1, 0.3, a=0.2, d=1, alpha_order=0, t=0.1)


def _quad_spec(sup_density=None):
    fx = sup_density if sup_density is not None else 1.0 / math.sqrt(2 * math.pi)
    return UniformRateSpec(
        mode="quadratic",
        sup_density=fx,
        kernel=GAUSS,
        a=0.3,
        alpha=(0,),
        scaling=ScalingSequence(kind="power", b=0.1),
    )


def _ldp_spec(kernel=GAUSS, a=0.3, sup_density=0.5):
    return UniformRateSpec(
        mode="ldp_density",
        sup_density=sup_density,
        kernel=kernel,
        a=a,
        alpha=(0,),
        scaling=ScalingSequence(kind="constant_one"),
    )


def test_uniform_rate_quadratic_symmetric():
    spec = _quad_spec()
    plus, minus, tilde = uniform_rate(spec, 0.2)
    assert plus.value == minus.value == tilde.value
    assert_allclose(tilde.value, 0.16172093894896455, rtol=1e-14)


def test_uniform_rate_ldp_two_sided_min():
    spec = _ldp_spec(sup_density=0.5)
    plus, minus, tilde = uniform_rate(spec, 0.2)
    assert plus.finite and minus.finite
    assert tilde.value == min(plus.value, minus.value)
    # down-crossings are harder than up-crossings for a density estimator
    assert minus.value > plus.value
    # crossing below zero density is impossible under a positive kernel
    _, minus_far, _ = uniform_rate(spec, 0.5 + 1e-9)
    assert not minus_far.finite


@given(st.floats(min_value=0.02, max_value=1.5))
@settings(max_examples=25, deadline=None)
def test_phi_maximizer_duality_quadratic(delta):
    spec = _quad_spec()
    for signed in (delta, -delta):
        u = phi_maximizer(spec, signed)
        g = uniform_rate(spec, abs(signed))[0 if signed > 0 else 1]
        assert abs(u * signed - uniform_cgf_limit(spec, u) - g.value) <= 1e-8


@given(st.floats(min_value=0.02, max_value=0.9))
@settings(max_examples=20, deadline=None)
def test_phi_maximizer_duality_ldp(delta):
    spec = _ldp_spec(sup_density=0.5)
    plus, minus, _ = uniform_rate(spec, delta)
    for signed, g in ((delta, plus), (-delta, minus)):
        if not g.finite:
            continue
        u = phi_maximizer(spec, signed)
        assert abs(u * signed - uniform_cgf_limit(spec, u) - g.value) <= 1e-8


def test_uniform_cgf_limit_quadratic_closed_form():
    spec = _quad_spec()
    u = 0.8
    expected = 0.5 * u * u * spec.sup_density * GAUSS.l2_norm_sq((0,)) / (1 - 0.09)
    assert_allclose(uniform_cgf_limit(spec, u), expected, rtol=1e-12)


def test_uniform_spec_validation():
    with pytest.raises(ValueError):
        UniformRateSpec(
            mode="ldp_density",
            sup_density=0.5,
            kernel=GAUSS,
            a=0.3,
            alpha=(1,),
            scaling=ScalingSequence(kind="constant_one"),
        )
    with pytest.raises(ValueError):
        UniformRateSpec(
            mode="quadratic",
            sup_density=0.5,
            kernel=GAUSS,
            a=0.6,
            alpha=(1,),
            scaling=ScalingSequence(kind="power", b=0.1),
        )


def test_two_dimensional_psi_slope():
    ev = PsiEvaluator(builtin_kernel("gaussian", 2), 0.2)
    assert_allclose(float(ev.psi_prime(0.0)), 1.0 / (1 - 0.4), rtol=1e-9)
    assert float(ev.psi(0.5)) > 0.5 * ev.prime_at_zero  # convexity above tangent


def _signed_kernel():
    # 1.5 (1 - 2 z^2) on [-1, 1]: unit mass, sign change at |z| = 1/sqrt(2)
    def eval_fn(pts):
        z = pts[:, 0]
        return np.where(np.abs(z) <= 1.0, 1.5 * (1.0 - 2.0 * z * z), 0.0)

    return KernelModel(
        name="signed_parabola",
        dimension=1,
        eval_fn=eval_fn,
        deriv_fn=None,
        support_radius=1.0,
        moment_order=2,
        positive_support_measure=math.sqrt(2.0),
        negative_support_measure=2.0 - math.sqrt(2.0),
        max_derivative_order=0,
    )


def test_signed_kernel_keeps_negative_arguments_finite():
    ev = PsiEvaluator(_signed_kernel(), 0.3)
    assert ev.legendre(1.0 / 0.7).value <= 1e-10
    for t in (-0.8, -0.2, 0.0, 0.4):
        rv = ev.legendre(t)
        assert rv.finite
        assert rv.value > 0


def test_signed_kernel_duality_spans_the_sign_change():
    ev = PsiEvaluator(_signed_kernel(), 0.3)
    us = np.linspace(-8.0, 4.0, 4001)
    psi_vals = ev.psi(us)
    for t in (-0.6, 0.5, 2.0):
        dual = float(np.max(us * t - psi_vals))
        assert ev.legendre(float(t)).value == pytest.approx(dual, abs=5e-5)
    ts = np.linspace(-0.8, 3.0, 25)
    vals = [ev.legendre(float(t)).value for t in ts]
    assert np.all(np.diff(vals, 2) > -1e-9)  # convex across the sign change
