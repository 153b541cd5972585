"""Permutation-loop phase factor and the loop compactness cut-off.

A loop configuration is a pair of arrays P, Q of shape (..., l, d): l
phase points in d dimensions, with any number of leading batch axes.
With hbar = 1 the factor for a cyclic loop 1 -> 2 -> ... -> l -> 1 is

    eta = (+-1)^{l-1} exp(i sum_j (q_j - q_{j+1}) . p_j),

indices taken cyclically.  The momentum-labelled mirror is its complex
conjugate, so only this one form is implemented.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class CutoffPolicy:
    r_cut_q: Optional[float] = None
    r_cut_p: Optional[float] = None

    def __post_init__(self):
        for v in (self.r_cut_q, self.r_cut_p):
            if v is not None and not v > 0:
                raise ValueError(f"cut-off radius must be positive, got {v}")

    @classmethod
    def uniform(cls, r):
        return cls(r, r) if r is not None else cls()

    @property
    def active(self):
        return self.r_cut_q is not None or self.r_cut_p is not None


def _loop_arrays(P, Q):
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.shape != Q.shape:
        raise ValueError(f"P and Q shapes differ: {P.shape} vs {Q.shape}")
    if P.ndim < 2:
        raise ValueError("loop arrays need shape (..., l, d)")
    return P, Q


def loop_phase(P, Q):
    """Real phase sum_j (q_j - q_{j+1}) . p_j of a loop, batched."""
    P, Q = _loop_arrays(P, Q)
    dq = Q - np.roll(Q, -1, axis=-2)
    return np.sum(dq * P, axis=(-2, -1))


def eta_loop(P, Q, sign=1):
    """Loop symmetrization factor; exactly 1 for a single-point loop.

    >>> eta_loop([[0.0], [0.0]], [[1.0], [1.0]], sign=-1)
    (-1+0j)
    """
    P, Q = _loop_arrays(P, Q)
    l = P.shape[-2]
    out = sign ** (l - 1) * np.exp(1j * loop_phase(P, Q))
    return complex(out) if out.ndim == 0 else out


def eta_loop_p(P, Q, sign=1):
    """Momentum-labelled mirror of :func:`eta_loop` (its complex conjugate)."""
    return np.conj(eta_loop(P, Q, sign))


def cutoff_accept(P, Q, policy):
    """True where every cyclically consecutive pair is within the cut-off.

    Differences are bounded per Cartesian component.
    """
    P, Q = _loop_arrays(P, Q)
    ok = np.ones(P.shape[:-2], dtype=bool)
    if policy.r_cut_q is not None:
        dq = np.abs(Q - np.roll(Q, -1, axis=-2))
        ok &= np.all(dq <= policy.r_cut_q, axis=(-2, -1))
    if policy.r_cut_p is not None:
        dp = np.abs(P - np.roll(P, -1, axis=-2))
        ok &= np.all(dp <= policy.r_cut_p, axis=(-2, -1))
    return bool(ok) if ok.ndim == 0 else ok
