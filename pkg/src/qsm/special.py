"""Hermite polynomials and the orthonormal Hermite functions.

The Hermite functions are the energy eigenfunctions of the dimensionless
harmonic oscillator H = (P^2 + Q^2)/2.  They are evaluated with the
normalized three-term recurrence so that no factorial ever appears; the
bare polynomial recurrence is kept for low orders and for tests.
"""

import numpy as np

N_CAP = 512

_PI_QUARTER = np.pi ** -0.25
_SQRT_2PI = np.sqrt(2.0 * np.pi)
_I_POWERS = (1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j)


def _check_order(n):
    if int(n) != n or n < 0:
        raise ValueError(f"Hermite order must be a non-negative integer, got {n!r}")
    if n > N_CAP:
        raise ValueError(f"Hermite order {n} exceeds cap {N_CAP}")
    return int(n)


def hermite_poly(n, x):
    """Physicists' Hermite polynomial H_n(x) by the bare recurrence.

    Overflows for large n*x; use :func:`hermite_function` there.
    """
    n = _check_order(n)
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = 2.0 * x
    for k in range(1, n):
        h_prev, h = h, 2.0 * x * h - 2.0 * k * h_prev
    return h if h.ndim else float(h)


def hermite_functions(n_max, x):
    """Return phi_0(x) ... phi_{n_max}(x) stacked along a new leading axis.

    Parameters
    ----------
    n_max : int
        Highest order included.
    x : array_like
        Evaluation points, any shape.

    Returns
    -------
    ndarray, shape (n_max + 1,) + x.shape
    """
    n_max = _check_order(n_max)
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = _PI_QUARTER * np.exp(-0.5 * x * x)
    if n_max >= 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for k in range(1, n_max):
        out[k + 1] = (np.sqrt(2.0 / (k + 1)) * x * out[k]
                      - np.sqrt(k / (k + 1.0)) * out[k - 1])
    return out


def hermite_function(n, x):
    """Orthonormal Hermite function phi_n(x) = e^{-x^2/2} H_n(x) / sqrt(2^n n! sqrt(pi))."""
    n = _check_order(n)
    val = hermite_functions(n, x)[n]
    return val if val.ndim else float(val)


def i_power(n):
    """i**n exactly, without floating-point drift in the phase."""
    return _I_POWERS[int(n) % 4]


def hermite_function_ft(n, p):
    """Fourier image of phi_n: int dq e^{ipq} phi_n(q) = i^n sqrt(2 pi) phi_n(p)."""
    n = _check_order(n)
    val = i_power(n) * _SQRT_2PI * np.asarray(hermite_function(n, p))
    return val if val.ndim else complex(val)
