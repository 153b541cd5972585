"""Shared value types: thermodynamic state, series truncation, W representation.

Everything is in oscillator units: energies in hbar*omega, momenta in
sqrt(m hbar omega), positions in sqrt(hbar / m omega), so hbar = m = omega = 1.
Phase-space points are plain arrays whose trailing axis is the spatial
dimension; complex weights are numpy complex values.
"""

import math
from dataclasses import dataclass

from .special import N_CAP

BOSON = 1
FERMION = -1


class DivergenceError(ValueError):
    """Fugacity at or beyond the ideal-oscillator condensation bound."""


@dataclass(frozen=True)
class ThermoState:
    beta: float
    z: float = 1.0
    d: int = 1
    sign: int = BOSON

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.z > 0:
            raise ValueError(f"fugacity must be positive, got {self.z}")
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.sign not in (BOSON, FERMION):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")

    @property
    def z_bound(self):
        return math.exp(self.d * self.beta / 2.0)

    def check_convergent(self):
        """Raise DivergenceError unless z < exp(d*beta/2)."""
        if self.z >= self.z_bound:
            raise DivergenceError(
                f"loop series diverges: z={self.z} >= exp(d*beta/2)={self.z_bound:.6g}"
                f" (beta={self.beta}, d={self.d})")

    def with_beta(self, beta):
        return ThermoState(beta, self.z, self.d, self.sign)


@dataclass(frozen=True)
class SeriesTruncation:
    """Energy-series truncation.

    ``n_max`` is the highest quantum number kept per degree of freedom.
    With ``adaptive`` the sum also stops once three consecutive terms fall
    below ``tail_tol`` everywhere.
    """

    n_max: int = N_CAP
    tail_tol: float = 1e-12
    adaptive: bool = True

    def __post_init__(self):
        if not 0 <= self.n_max <= N_CAP:
            raise ValueError(f"n_max must lie in [0, {N_CAP}], got {self.n_max}")
        if not self.tail_tol > 0:
            raise ValueError("tail_tol must be positive")

    @classmethod
    def fixed(cls, n_max):
        """Exactly the states 0..n_max, no early stop."""
        return cls(n_max=n_max, adaptive=False)


@dataclass(frozen=True)
class WMethod:
    """Which representation of the commutation function to use.

    kind is one of ``exact`` (energy series), ``bigw`` (temperature
    expansion of W), ``smallw`` (expansion of ln W) or ``classical`` (W = 1).
    """

    kind: str = "exact"
    truncation: SeriesTruncation = SeriesTruncation()
    order: int = 5

    def __post_init__(self):
        if self.kind not in ("exact", "bigw", "smallw", "classical"):
            raise ValueError(f"unknown W method {self.kind!r}")
        if self.kind == "bigw" and not 0 <= self.order <= 5:
            raise ValueError("big-W order must lie in [0, 5]")
        if self.kind == "smallw" and not 1 <= self.order <= 4:
            raise ValueError("small-w order must lie in [1, 4]")

    @classmethod
    def exact(cls, n_max=None, tail_tol=1e-12):
        if n_max is None:
            return cls("exact", SeriesTruncation(tail_tol=tail_tol))
        return cls("exact", SeriesTruncation.fixed(n_max))

    @classmethod
    def big_w(cls, order=5):
        return cls("bigw", order=order)

    @classmethod
    def small_w(cls, order=4):
        return cls("smallw", order=order)

    @classmethod
    def classical(cls):
        return cls("classical")

    @property
    def separable(self):
        """True when the weight is a product of one-dimensional factors."""
        return self.kind in ("exact", "classical")

    def label(self):
        if self.kind == "exact":
            t = self.truncation
            return f"exact(n_max={t.n_max})" if not t.adaptive else f"exact(tol={t.tail_tol:g})"
        if self.kind in ("bigw", "smallw"):
            return f"{self.kind}(order={self.order})"
        return "classical"
