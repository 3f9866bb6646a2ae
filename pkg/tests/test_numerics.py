import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from recdev.numerics import (
    EXP_ARG_LIMIT,
    NeumaierSum,
    OverflowGuardError,
    QuadratureError,
    check_exp_bound,
    compensated_cumsum,
    gauss_legendre_panels,
    integrate_to_tol,
    tanh_sinh,
)


def test_gauss_legendre_polynomial_exactness():
    # order-16 nodes integrate polynomials up to degree 31 exactly
    x, w = gauss_legendre_panels(-1.0, 3.0, panels=2)
    for k in (0, 3, 10, 17):
        exact = (3.0 ** (k + 1) - (-1.0) ** (k + 1)) / (k + 1)
        assert_allclose(w @ x**k, exact, rtol=1e-13)


def test_gauss_legendre_matches_quad_oracle():
    from scipy.integrate import quad

    f = lambda t: np.exp(-(t**2)) * np.cos(3 * t)
    x, w = gauss_legendre_panels(-4.0, 4.0, panels=8)
    ref, _ = quad(f, -4.0, 4.0, epsabs=1e-14)
    assert_allclose(w @ f(x), ref, atol=1e-13)


def test_tanh_sinh_endpoint_singularities():
    # integrable endpoint singularities that defeat fixed Gauss rules
    x, w = tanh_sinh(0.0, 1.0, level=6)
    assert_allclose(w @ (1.0 / np.sqrt(x)), 2.0, rtol=1e-12)
    assert_allclose(w @ np.log(1.0 / x), 1.0, rtol=1e-12)


def test_tanh_sinh_plain_interval():
    x, w = tanh_sinh(-2.0, 5.0, level=5)
    assert_allclose(w @ np.exp(-x), math.exp(2) - math.exp(-5), rtol=1e-12)
    assert x.min() >= -2.0 and x.max() <= 5.0


def test_integrate_to_tol_converges_and_reports_failure():
    val = integrate_to_tol(lambda x: np.exp(-(x**2)), -6.0, 6.0, tol=1e-12)
    assert_allclose(val, math.sqrt(math.pi), rtol=1e-11)
    with pytest.raises(QuadratureError):
        # nowhere-resolvable oscillation at a coarse level budget
        integrate_to_tol(lambda x: np.sin(1e7 * x), 0.0, 1.0, tol=1e-14, max_level=1)


def test_check_exp_bound():
    check_exp_bound(EXP_ARG_LIMIT - 1.0, "unit test")
    with pytest.raises(OverflowGuardError):
        check_exp_bound(EXP_ARG_LIMIT + 1.0, "unit test")


@given(
    st.lists(
        st.floats(min_value=-1e12, max_value=1e12, allow_nan=False),
        min_size=1,
        max_size=200,
    )
)
@settings(max_examples=60, deadline=None)
def test_neumaier_matches_fsum(values):
    acc = NeumaierSum()
    for v in values:
        acc.add(v)
    assert_allclose(acc.total, math.fsum(values), rtol=1e-15, atol=1e-300)


def test_neumaier_cancellation():
    # naive summation loses the tiny term entirely
    acc = NeumaierSum()
    for v in (1e16, 1.0, -1e16):
        acc.add(v)
    assert acc.total == 1.0


@given(
    st.lists(
        st.floats(min_value=-1e8, max_value=1e8, allow_nan=False),
        min_size=1,
        max_size=100,
    )
)
@settings(max_examples=60, deadline=None)
def test_compensated_cumsum_matches_fsum_prefixes(values):
    arr = np.asarray(values, dtype=np.float64)
    out = compensated_cumsum(arr)
    ref = [math.fsum(values[: k + 1]) for k in range(len(values))]
    assert_allclose(out, ref, rtol=1e-14, atol=1e-300)


def test_compensated_cumsum_shape_and_empty():
    assert compensated_cumsum(np.array([])).shape == (0,)
    out = compensated_cumsum(np.array([2.0]))
    assert out.shape == (1,) and out[0] == 2.0
