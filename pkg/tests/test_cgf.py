import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from recdev.bandwidth import BandwidthSchedule, ScalingSequence
from recdev.cgf import CgfSpec, cgf_finite_n, cgf_limit, convergence_diagnostic
from recdev.densities import GaussianDensity
from recdev.kernels import builtin_kernel
from recdev.numerics import OverflowGuardError
from recdev.ratefn import PsiEvaluator

KERNEL = builtin_kernel("gaussian", 1)
DENSITY = GaussianDensity(mean=[0.0], sigma=[1.0])


def _spec(c=0.7, a=0.3, scaling=None, alpha=None, point=0.0):
    return CgfSpec(
        kernel=KERNEL,
        schedule=BandwidthSchedule(kind="power", c=c, a=a),
        scaling=scaling or ScalingSequence(kind="constant_one"),
        density=DENSITY,
        point=[point],
        alpha=alpha,
    )


def _finite_n_oracle(spec, u, n):
    # independent route: scipy quadrature per observation, log/expm1 form
    from scipy.integrate import quad
    from scipy.stats import norm

    sch, scal = spec.schedule, spec.scaling
    alpha = spec.alpha.components
    p = KERNEL.dimension + spec.alpha.order
    hs = sch.values(n)
    v = scal.value(n)
    a_n = math.fsum(h ** (1 + 2 * spec.alpha.order) for h in hs)
    x = float(spec.point[0])
    total = 0.0
    for h in hs:
        theta = u * a_n / (n * v * h**p)
        m, _ = quad(
            lambda z: math.expm1(theta * float(KERNEL.deriv_eval(alpha, np.array([[z]]))[0]))
            * norm.pdf(x - h * z),
            -9.0,
            9.0,
            epsabs=1e-14,
            limit=300,
        )
        total += math.log1p(h * m)
    mean_terms = []
    for h in hs:
        val, _ = quad(
            lambda z: float(KERNEL.deriv_eval(alpha, np.array([[z]]))[0])
            * norm.pdf(x - h * z)
            / h**spec.alpha.order,
            -9.0,
            9.0,
            epsabs=1e-14,
            limit=300,
        )
        mean_terms.append(val)
    mean = math.fsum(mean_terms) / n
    return (v**2 / a_n) * total - u * v * mean


def test_finite_n_matches_scipy_oracle_ldp():
    spec = _spec()
    for u, n in ((0.7, 12), (-1.5, 12), (1.0, 40)):
        ours = cgf_finite_n(spec, u, n)
        ref = _finite_n_oracle(spec, u, n)
        assert_allclose(ours, ref, rtol=1e-9, atol=1e-13)


def test_finite_n_matches_scipy_oracle_moderate():
    spec = _spec(scaling=ScalingSequence(kind="power", b=0.1))
    for u, n in ((0.8, 15), (-0.6, 25)):
        ours = cgf_finite_n(spec, u, n)
        ref = _finite_n_oracle(spec, u, n)
        assert_allclose(ours, ref, rtol=1e-9, atol=1e-13)


def test_finite_n_matches_scipy_oracle_derivative():
    spec = _spec(
        c=0.5, a=0.2, scaling=ScalingSequence(kind="power", b=0.1), alpha=(1,), point=0.4
    )
    ours = cgf_finite_n(spec, 0.9, 10)
    ref = _finite_n_oracle(spec, 0.9, 10)
    assert_allclose(ours, ref, rtol=1e-8, atol=1e-13)


def test_regime_classification():
    assert _spec().regime == "ldp"
    assert _spec(scaling=ScalingSequence(kind="power", b=0.1)).regime == "moderate"
    assert (
        _spec(c=0.5, a=0.2, scaling=ScalingSequence(kind="constant_one"), alpha=(1,)).regime
        == "moderate"
    )


def test_limit_ldp_closed_form():
    spec = _spec()
    fx = DENSITY.pdf(np.array([0.0]))[0]
    psi = PsiEvaluator(KERNEL, 0.3)
    for u in (-1.0, 0.5, 1.5):
        expected = fx * 0.7 * float(psi.psi(u)) - u * fx
        assert_allclose(cgf_limit(spec, u), expected, rtol=1e-10)
    assert cgf_limit(spec, 0.0) == 0.0


def test_limit_moderate_closed_form():
    spec = _spec(scaling=ScalingSequence(kind="power", b=0.1))
    fx = DENSITY.pdf(np.array([0.0]))[0]
    l2 = 1.0 / (2 * math.sqrt(math.pi))
    for u in (-2.0, 1.0):
        assert_allclose(cgf_limit(spec, u), u * u * fx * l2 / (2 * (1 - 0.09)), rtol=1e-12)


def test_limit_moderate_derivative_closed_form():
    spec = _spec(c=0.5, a=0.2, scaling=ScalingSequence(kind="power", b=0.1), alpha=(1,))
    fx = DENSITY.pdf(np.array([0.0]))[0]
    l2d = 1.0 / (4 * math.sqrt(math.pi))  # squared L2 norm of the kernel slope
    m = 0.2 * 3
    assert_allclose(cgf_limit(spec, 1.0), fx * l2d / (2 * (1 - m * m)), rtol=1e-12)


def test_vector_u_matches_scalars():
    spec = _spec(scaling=ScalingSequence(kind="power", b=0.1))
    us = np.array([-1.0, -0.2, 0.4, 1.3])
    vec = cgf_finite_n(spec, us, 30)
    scal = [cgf_finite_n(spec, float(u), 30) for u in us]
    assert_allclose(vec, scal, rtol=1e-12)


def test_finite_n_is_convex_in_u():
    spec = _spec()
    us = np.linspace(-2.0, 2.0, 9)
    vals = cgf_finite_n(spec, us, 25)
    second = np.diff(vals, 2)
    assert np.all(second > 0)
    # normalized cumulant transform vanishes at u = 0
    assert abs(cgf_finite_n(spec, 0.0, 25)) < 1e-14


def test_convergence_diagnostic_gaps_shrink():
    spec = _spec(c=0.3)
    conv = convergence_diagnostic(spec, [0.5, 1.0], [100, 1000, 10000])
    assert conv.finite_n.shape == (3, 2)
    assert conv.gaps_decrease
    assert conv.sup_gap[-1] < 0.05 * np.max(np.abs(conv.limit))


def test_overflow_guard_trips_before_exp():
    spec = _spec()
    with pytest.raises(OverflowGuardError):
        cgf_finite_n(spec, 1e9, 10)


def test_diagnostic_input_validation():
    spec = _spec()
    with pytest.raises(ValueError):
        convergence_diagnostic(spec, [], [10, 20])
    with pytest.raises(ValueError):
        convergence_diagnostic(spec, [1.0], [20, 10])
