import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qsm.special import (
    N_CAP, hermite_function, hermite_function_ft, hermite_functions, hermite_poly, i_power,
)


@pytest.mark.parametrize("n,x,expected", [(0, 3.7, 1.0), (1, 0.5, 1.0), (4, 0.0, 12.0),
                                          (3, 1.0, -4.0)])
def test_hermite_poly_values(n, x, expected):
    assert hermite_poly(n, x) == pytest.approx(expected)


def test_hermite_function_origin():
    assert hermite_function(0, 0.0) == pytest.approx(0.7511255444649425, abs=1e-15)
    assert hermite_function(1, 0.0) == 0.0


def _direct(n, x):
    return math.exp(-x * x / 2) * hermite_poly(n, x) / math.sqrt(
        2.0 ** n * math.factorial(n) * math.sqrt(math.pi))


def test_direct_formula_n6():
    assert hermite_function(6, 1.3) == pytest.approx(_direct(6, 1.3), rel=1e-13)


def test_recurrence_matches_direct_formula():
    x = np.linspace(-5, 5, 41)
    phi = hermite_functions(15, x)
    for n in range(16):
        ref = np.array([_direct(n, v) for v in x])
        # relative to the function's scale: pointwise ratios blow up at nodes
        np.testing.assert_allclose(phi[n], ref, rtol=0, atol=1e-12 * np.max(np.abs(ref)))


def test_orthonormality_gauss_legendre():
    x, w = np.polynomial.legendre.leggauss(200)
    x, w = 12.0 * x, 12.0 * w
    phi = hermite_functions(20, x)
    gram = (phi * w) @ phi.T
    np.testing.assert_allclose(gram, np.eye(21), atol=1e-10)


def test_no_overflow_at_cap():
    x = np.linspace(-40, 40, 161)
    assert np.all(np.isfinite(hermite_functions(N_CAP, x)))


def test_order_validation():
    with pytest.raises(ValueError):
        hermite_function(N_CAP + 1, 0.0)
    with pytest.raises(ValueError):
        hermite_function(-1, 0.0)
    with pytest.raises(ValueError):
        hermite_functions(2.5, 0.0)


def test_fourier_image_cases():
    s = math.sqrt(2 * math.pi)
    assert hermite_function_ft(0, 0.0) == pytest.approx(s * math.pi ** -0.25)
    assert hermite_function_ft(2, 1.0) == pytest.approx(-s * hermite_function(2, 1.0))
    v = hermite_function_ft(1, 0.7)
    assert v.real == 0.0 and v.imag == pytest.approx(s * hermite_function(1, 0.7))


@pytest.mark.parametrize("n", [0, 1, 2, 3, 7])
def test_fourier_image_is_the_transform(n):
    # int dx e^{-ipx} phi_n(x) = sqrt(2 pi) (-i)^n phi_n(p); the sign-flipped
    # kernel e^{+ipx} gives the i^n convention used here
    x, w = np.polynomial.legendre.leggauss(400)
    x, w = 20.0 * x, 20.0 * w
    for p in (0.0, 0.4, 1.7):
        num = np.sum(w * np.exp(1j * p * x) * hermite_function(n, x))
        assert num == pytest.approx(hermite_function_ft(n, p), abs=1e-12)


@given(st.integers(min_value=0, max_value=10_000))
def test_i_power_cycle(n):
    assert i_power(n) == 1j ** (n % 4)
    assert i_power(n) * i_power(4 - n % 4) == 1
