"""Symbolic temperature-expansion recursion for the oscillator's W_n.

Polynomials in the components of P and Q are stored as a dict from an
exponent tuple (P_1..P_d, Q_1..Q_d) to an exact complex-rational
coefficient.  Gradients act on Q only.  Only small orders (n <= 12) are
needed, so nothing here is tuned for speed.
"""

from fractions import Fraction

import numpy as np

MAX_ORDER = 12


class CRational:
    """Exact complex number with Fraction parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    def __add__(self, other):
        return CRational(self.re + other.re, self.im + other.im)

    def __mul__(self, other):
        return CRational(self.re * other.re - self.im * other.im,
                         self.re * other.im + self.im * other.re)

    def __eq__(self, other):
        return self.re == other.re and self.im == other.im

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"({self.re}{'+' if self.im >= 0 else '-'}{abs(self.im)}i)"


class Poly:
    """Polynomial in P_alpha, Q_alpha with exact complex-rational coefficients."""

    def __init__(self, d, terms=None):
        self.d = d
        self.terms = {k: v for k, v in (terms or {}).items() if v}

    @classmethod
    def const(cls, d, c):
        c = c if isinstance(c, CRational) else CRational(c)
        return cls(d, {(0,) * (2 * d): c})

    @classmethod
    def p(cls, d, alpha):
        key = [0] * (2 * d)
        key[alpha] = 1
        return cls(d, {tuple(key): CRational(1)})

    @classmethod
    def q(cls, d, alpha):
        key = [0] * (2 * d)
        key[d + alpha] = 1
        return cls(d, {tuple(key): CRational(1)})

    def __add__(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v if k in out else v
        return Poly(self.d, out)

    def __mul__(self, other):
        if not isinstance(other, Poly):
            c = other if isinstance(other, CRational) else CRational(other)
            return Poly(self.d, {k: v * c for k, v in self.terms.items()})
        out = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                out[k] = out[k] + v1 * v2 if k in out else v1 * v2
        return Poly(self.d, out)

    __rmul__ = __mul__

    def __eq__(self, other):
        return self.d == other.d and self.terms == other.terms

    def dq(self, alpha):
        """Partial derivative with respect to Q_alpha."""
        idx = self.d + alpha
        out = {}
        for k, v in self.terms.items():
            if k[idx]:
                nk = list(k)
                nk[idx] -= 1
                out[tuple(nk)] = v * CRational(k[idx])
        return Poly(self.d, out)

    def laplacian(self):
        out = Poly(self.d)
        for a in range(self.d):
            out = out + self.dq(a).dq(a)
        return out

    def swap_pq(self):
        d = self.d
        return Poly(d, {k[d:] + k[:d]: v for k, v in self.terms.items()})

    def __call__(self, P, Q):
        """Evaluate at arrays of shape (..., d)."""
        P = np.asarray(P, dtype=float)
        Q = np.asarray(Q, dtype=float)
        out = np.zeros(np.broadcast(P, Q).shape[:-1], dtype=complex)
        for k, v in self.terms.items():
            mono = complex(v)
            for a in range(self.d):
                mono = mono * P[..., a] ** k[a] * Q[..., a] ** k[self.d + a]
            out = out + mono
        return out

    def __repr__(self):
        return f"Poly(d={self.d}, {len(self.terms)} terms)"


def _dot(a, b):
    return sum((x * y for x, y in zip(a, b)), Poly(a[0].d))


def sho_invariants(d):
    """Return (P^2, Q^2, R) as Poly objects for dimension d."""
    ps = [Poly.p(d, a) for a in range(d)]
    qs = [Poly.q(d, a) for a in range(d)]
    return _dot(ps, ps), _dot(qs, qs), _dot(ps, qs)


def sho_recursion(d, n_max):
    """Build W_0..W_{n_max} for the oscillator by the temperature recursion.

    W_{n+1} = [-d W_{n-1} - 2 Q.grad W_{n-1} + Q^2 W_{n-2} + lap W_n
               + 2i P.grad W_n - 2i R W_{n-1}] / (2(n+1))
    """
    if not 0 <= n_max <= MAX_ORDER:
        raise ValueError(f"recursion order must lie in [0, {MAX_ORDER}], got {n_max}")
    _, q2, r = sho_invariants(d)
    ps = [Poly.p(d, a) for a in range(d)]
    qs = [Poly.q(d, a) for a in range(d)]
    zero = Poly(d)
    coeffs = [Poly.const(d, 1), zero]
    for n in range(1, n_max):
        wn, wm1 = coeffs[n], coeffs[n - 1]
        wm2 = coeffs[n - 2] if n >= 2 else zero
        grad_n = [wn.dq(a) for a in range(d)]
        grad_m1 = [wm1.dq(a) for a in range(d)]
        acc = (wm1 * (-d)
               + _dot(qs, grad_m1) * (-2)
               + q2 * wm2
               + wn.laplacian()
               + _dot(ps, grad_n) * CRational(0, 2)
               + r * wm1 * CRational(0, -2))
        coeffs.append(acc * CRational(Fraction(1, 2 * (n + 1))))
    return coeffs[:n_max + 1]


def printed_coefficients(d):
    """The closed-form W_0..W_5 as Poly objects, for comparison with the recursion."""
    p2, q2, r = sho_invariants(d)
    one = Poly.const(d, 1)
    f = Fraction
    return [
        one,
        Poly(d),
        one * CRational(f(-d, 4)) + r * CRational(0, f(-1, 2)),
        (p2 + q2) * CRational(f(1, 6)),
        one * CRational(f(3 * d * d + 4 * d, 96)) + r * CRational(0, f(3 * d + 5, 24))
        + r * r * CRational(f(-1, 8)),
        (p2 + q2) * CRational(f(-(5 * d + 8), 120)) + r * (p2 + q2) * CRational(0, f(-1, 12)),
    ]


class BigWEvaluator:
    """Evaluator for W(P, Q; beta) = sum_n W_n beta^n from recursion output."""

    def __init__(self, d, n_max):
        self.d = d
        self.n_max = n_max
        self.coefficients = tuple(sho_recursion(d, n_max))

    def __call__(self, P, Q, beta):
        out = 0.0
        for n, c in enumerate(self.coefficients):
            out = out + c(P, Q) * beta ** n
        return out


def w_big_recursion_sho(n_max, d=1):
    """Return a :class:`BigWEvaluator` holding W_0..W_{n_max}."""
    return BigWEvaluator(d, n_max)
