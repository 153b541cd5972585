"""Commutation function W of the harmonic oscillator in three representations.

``weighted_*`` functions return the phase-space weight e^{-beta H} W rather
than W alone; that product is what enters every integral and it stays finite
where W itself is large.  Inputs P and Q are arrays whose trailing axis is
the spatial dimension d; a scalar is promoted to a single 1-D point.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .special import N_CAP, _PI_QUARTER, hermite_functions, i_power
from .state import SeriesTruncation, WMethod

_SQRT_2PI = np.sqrt(2.0 * np.pi)


def as_phase_point(P, Q):
    """Broadcast P and Q to a common float shape (..., d)."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.ndim == 0:
        P = P[None]
    if Q.ndim == 0:
        Q = Q[None]
    P, Q = np.broadcast_arrays(P, Q)
    if P.shape[-1] not in (1, 2, 3):
        raise ValueError(f"trailing axis must be the dimension (1-3), got shape {P.shape}")
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(Q))):
        raise ValueError("phase point has non-finite components")
    return P, Q


def hamiltonian(P, Q):
    """Dimensionless oscillator energy (P^2 + Q^2)/2 summed over dimensions."""
    return 0.5 * np.sum(P * P + Q * Q, axis=-1)


def _unwrap(val):
    return complex(val) if np.ndim(val) == 0 else val


# --------------------------------------------------------------------------
# exact energy-state series

def series_1d(P, Q, beta, trunc=SeriesTruncation(), energy=False):
    """One-dimensional weighted series, elementwise over broadcast inputs.

    Returns e^{-iPQ} sum_n i^n sqrt(2 pi) e^{-beta(n+1/2)} phi_n(P) phi_n(Q),
    with an extra factor (n + 1/2) per term when ``energy`` is set.  ``beta``
    may be an array, which is how per-mode level spacings are passed in.
    """
    P, Q, beta = np.broadcast_arrays(np.asarray(P, float), np.asarray(Q, float),
                                     np.asarray(beta, float))
    # the adaptive stop must not fire before the Hermite functions reach
    # their classical turning point at the largest |P|, |Q| in the batch
    x2max = float(np.max(np.maximum(P * P, Q * Q), initial=0.0))
    n_floor = int(np.ceil(0.5 * (x2max - 1.0))) + 1

    fp_prev = _PI_QUARTER * np.exp(-0.5 * P * P)
    fq_prev = _PI_QUARTER * np.exp(-0.5 * Q * Q)
    fp = np.sqrt(2.0) * P * fp_prev
    fq = np.sqrt(2.0) * Q * fq_prev
    boltz = np.exp(-0.5 * beta)
    ratio = np.exp(-beta)

    total = np.zeros(P.shape, dtype=complex)
    quiet = 0
    for n in range(trunc.n_max + 1):
        if n == 0:
            a, b = fp_prev, fq_prev
        elif n == 1:
            a, b = fp, fq
        else:
            k = n - 1
            c1 = np.sqrt(2.0 / (k + 1))
            c2 = np.sqrt(k / (k + 1.0))
            fp_prev, fp = fp, c1 * P * fp - c2 * fp_prev
            fq_prev, fq = fq, c1 * Q * fq - c2 * fq_prev
            a, b = fp, fq
        mag = _SQRT_2PI * boltz * a * b
        if energy:
            mag = mag * (n + 0.5)
        total += i_power(n) * mag
        boltz = boltz * ratio
        if trunc.adaptive:
            quiet = quiet + 1 if float(np.max(np.abs(mag), initial=0.0)) < trunc.tail_tol else 0
            if quiet >= 3 and n >= n_floor:
                break
    return np.exp(-1j * P * Q) * total


def series_term(n, P, Q, beta):
    """The n-th term of :func:`series_1d`, phase factor e^{-iPQ} included."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    phi_p = hermite_functions(n, P)[n]
    phi_q = hermite_functions(n, Q)[n]
    out = np.exp(-1j * P * Q) * i_power(n) * _SQRT_2PI * np.exp(-beta * (n + 0.5)) * phi_p * phi_q
    return _unwrap(out)


def weighted_w_energy_series(P, Q, beta, trunc=SeriesTruncation()):
    """e^{-beta H(P,Q)} W(P,Q) from the energy-state series.

    The d-dimensional oscillator is separable, so the result is the product
    of one-dimensional series over the trailing axis.

    >>> round(weighted_w_energy_series(0.0, 0.0, 2.0).real, 5)
    0.51556
    """
    P, Q = as_phase_point(P, Q)
    out = np.prod(series_1d(P, Q, beta, trunc), axis=-1)
    return _unwrap(out)


def weighted_wh_energy_series(P, Q, beta, trunc=SeriesTruncation()):
    """e^{-beta H} H W_H: the series with each state weighted by its energy.

    The factor H is kept multiplied in so nothing is divided by H(P,Q).
    Equals -d/dbeta of :func:`weighted_w_energy_series`.
    """
    P, Q = as_phase_point(P, Q)
    plain = series_1d(P, Q, beta, trunc)
    ener = series_1d(P, Q, beta, trunc, energy=True)
    d = P.shape[-1]
    out = np.zeros(P.shape[:-1], dtype=complex)
    for a in range(d):
        term = ener[..., a]
        for b in range(d):
            if b != a:
                term = term * plain[..., b]
        out = out + term
    return _unwrap(out)


def mehler_weighted_w(P, Q, beta):
    """Closed form of e^{-beta H} W for the oscillator, from the Mehler kernel.

    (cosh b)^{-d/2} exp(-tanh(b) (P^2+Q^2)/2 - i P.Q (1 - sech b)).
    Independent of the series; used as a reference.
    """
    P, Q = as_phase_point(P, Q)
    d = P.shape[-1]
    out = (np.cosh(beta) ** (-0.5 * d)
           * np.exp(-np.tanh(beta) * hamiltonian(P, Q)
                    - 1j * np.sum(P * Q, axis=-1) * (1.0 - 1.0 / np.cosh(beta))))
    return _unwrap(out)


# --------------------------------------------------------------------------
# big-W temperature expansion

def big_w_coefficients(P, Q):
    """Temperature-expansion coefficients W_0..W_5 of the oscillator.

    Returns a list of six complex arrays, each symmetric under P <-> Q.
    """
    P, Q = as_phase_point(P, Q)
    d = P.shape[-1]
    p2 = np.sum(P * P, axis=-1)
    q2 = np.sum(Q * Q, axis=-1)
    r = np.sum(P * Q, axis=-1)
    s = p2 + q2
    one = np.ones_like(r, dtype=complex)
    return [
        one,
        0.0 * one,
        -d / 4.0 - 0.5j * r + 0j,
        s / 6.0 + 0j,
        (3 * d * d + 4 * d) / 96.0 + 1j * (3 * d + 5) / 24.0 * r - r * r / 8.0,
        -(5 * d + 8) / 120.0 * s - 1j * r * s / 12.0,
    ]


def w_big_expansion(P, Q, beta, order=5):
    """W = sum_{n <= order} W_n beta^n (not multiplied by the Boltzmann factor)."""
    if not 0 <= order <= 5:
        raise ValueError(f"big-W order must lie in [0, 5], got {order}")
    coeffs = big_w_coefficients(P, Q)
    out = sum(coeffs[n] * beta ** n for n in range(order + 1))
    return _unwrap(out)


def _w_big_dbeta(P, Q, beta, order):
    coeffs = big_w_coefficients(P, Q)
    return sum(n * coeffs[n] * beta ** (n - 1) for n in range(1, order + 1))


# --------------------------------------------------------------------------
# small-w expansion of ln W

def small_w_terms(P, Q, beta):
    """w_1..w_4 of the oscillator, with hbar = 1 already absorbed."""
    P, Q = as_phase_point(P, Q)
    d = P.shape[-1]
    s = np.sum(P * P + Q * Q, axis=-1)
    r = np.sum(P * Q, axis=-1)
    b = beta
    return [
        -0.5j * b ** 2 * r,
        b ** 3 * s / 6.0 - d * b ** 2 / 4.0 + 0j,
        5j * b ** 4 * r / 24.0,
        -b ** 5 * s / 15.0 + d * b ** 4 / 24.0 + 0j,
    ]


def _small_w_dbeta_terms(P, Q, beta):
    P, Q = as_phase_point(P, Q)
    d = P.shape[-1]
    s = np.sum(P * P + Q * Q, axis=-1)
    r = np.sum(P * Q, axis=-1)
    b = beta
    return [
        -1j * b * r,
        b ** 2 * s / 2.0 - d * b / 2.0 + 0j,
        5j * b ** 3 * r / 6.0,
        -b ** 4 * s / 3.0 + d * b ** 3 / 6.0 + 0j,
    ]


def w_small_expansion(P, Q, beta, order=4):
    """W = exp(w_1 + ... + w_order)."""
    if not 1 <= order <= 4:
        raise ValueError(f"small-w order must lie in [1, 4], got {order}")
    terms = small_w_terms(P, Q, beta)
    return _unwrap(np.exp(sum(terms[:order])))


@dataclass
class PotentialDerivatives:
    """Callbacks returning derivatives of U at a position q (shape (d,)).

    grad -> (d,), hess -> (d, d), third -> (d, d, d), fourth -> (d, d, d, d).
    Orders 1-2 need grad and hess, order 3 adds third, order 4 adds fourth.
    """

    grad: Callable
    hess: Optional[Callable] = None
    third: Optional[Callable] = None
    fourth: Optional[Callable] = None


def _require(derivs, order):
    needed = {1: ("grad",), 2: ("grad", "hess"), 3: ("grad", "hess", "third"),
              4: ("grad", "hess", "third", "fourth")}[order]
    missing = [name for name in needed if getattr(derivs, name) is None]
    if missing:
        raise ValueError(f"order {order} needs derivative callbacks: {', '.join(missing)}")


def general_small_w_terms(derivs, p, q, beta, order=4):
    """w_1..w_order for an arbitrary potential at a single point (m = hbar = 1)."""
    if not 1 <= order <= 4:
        raise ValueError(f"small-w order must lie in [1, 4], got {order}")
    _require(derivs, order)
    p = np.atleast_1d(np.asarray(p, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    b = beta
    g = np.atleast_1d(np.asarray(derivs.grad(q), dtype=float))
    out = [-0.5j * b ** 2 * (p @ g)]
    if order == 1:
        return out

    h = np.atleast_2d(np.asarray(derivs.hess(q), dtype=float))
    lap = np.trace(h)
    out.append(b ** 3 / 6.0 * (p @ h @ p)
               + 0.5 * (b ** 3 / 3.0 * (g @ g) - b ** 2 / 2.0 * lap) + 0j)
    if order == 2:
        return out

    t = np.asarray(derivs.third(q), dtype=float).reshape((q.size,) * 3)
    grad_lap = np.einsum("acc->a", t)
    out.append(1j * b ** 4 / 24.0 * np.einsum("abc,a,b,c->", t, p, p, p)
               + 5j * b ** 4 / 24.0 * (p @ h @ g)
               - 1j * b ** 3 / 6.0 * (p @ grad_lap))
    if order == 3:
        return out

    f = np.asarray(derivs.fourth(q), dtype=float).reshape((q.size,) * 4)
    ph = p @ h
    out.append(-b ** 5 / 120.0 * np.einsum("abce,a,b,c,e->", f, p, p, p, p)
               + b ** 4 / 16.0 * np.einsum("abcc,a,b->", f, p, p)
               - b ** 5 / 15.0 * (ph @ ph)
               - 3.0 * b ** 5 / 40.0 * np.einsum("abc,a,b,c->", t, p, p, g)
               - b ** 3 / 24.0 * np.einsum("aacc->", f)
               + 5.0 * b ** 4 / 48.0 * (g @ grad_lap)
               + b ** 4 / 24.0 * np.sum(h * h)
               - b ** 5 / 15.0 * (g @ h @ g) + 0j)
    return out


def w_general_small(derivs, p, q, beta, order=4):
    """W = exp(sum of general-potential w_n) at one phase point."""
    return complex(np.exp(sum(general_small_w_terms(derivs, p, q, beta, order))))


# --------------------------------------------------------------------------
# dispatch on representation

def weighted_w(P, Q, beta, method=WMethod()):
    """e^{-beta H} W for the chosen representation."""
    if method.kind == "exact":
        return weighted_w_energy_series(P, Q, beta, method.truncation)
    P, Q = as_phase_point(P, Q)
    boltz = np.exp(-beta * hamiltonian(P, Q))
    if method.kind == "classical":
        return _unwrap(boltz + 0j)
    if method.kind == "bigw":
        return _unwrap(boltz * w_big_expansion(P, Q, beta, method.order))
    return _unwrap(boltz * w_small_expansion(P, Q, beta, method.order))


def weighted_wh(P, Q, beta, method=WMethod()):
    """e^{-beta H} H W_H, i.e. -d/dbeta of :func:`weighted_w`."""
    if method.kind == "exact":
        return weighted_wh_energy_series(P, Q, beta, method.truncation)
    P, Q = as_phase_point(P, Q)
    h = hamiltonian(P, Q)
    boltz = np.exp(-beta * h)
    if method.kind == "classical":
        return _unwrap(boltz * h + 0j)
    if method.kind == "bigw":
        w = w_big_expansion(P, Q, beta, method.order)
        dw = _w_big_dbeta(P, Q, beta, method.order)
    else:
        w = w_small_expansion(P, Q, beta, method.order)
        dw = w * sum(_small_w_dbeta_terms(P, Q, beta)[:method.order])
    return _unwrap(boltz * (h * w - dw))


__all__ = [
    "N_CAP", "as_phase_point", "hamiltonian", "series_1d", "series_term",
    "weighted_w_energy_series", "weighted_wh_energy_series", "mehler_weighted_w",
    "big_w_coefficients", "w_big_expansion", "small_w_terms", "w_small_expansion",
    "PotentialDerivatives", "general_small_w_terms", "w_general_small",
    "weighted_w", "weighted_wh",
]
