"""Closed forms for the ideal harmonic-oscillator gas.

Grand potentials are reported as -beta*Omega (dimensionless) and energies
in units of hbar*omega.  Loop sums run over cyclic permutation loops of
length l; the textbook form enumerates single-particle states instead.
Both need z < exp(d*beta/2).
"""

import math

import numpy as np

from .state import ThermoState

L_MAX_CAP = 10_000
DEFAULT_L_MAX = 50


def _check_l_max(l_max):
    if not 1 <= l_max <= L_MAX_CAP:
        raise ValueError(f"l_max must lie in [1, {L_MAX_CAP}], got {l_max}")


def single_loop_sum(beta, l, d):
    """sum over states of exp(-l beta eps_n) = [e^{-l beta/2} / (1 - e^{-l beta})]^d."""
    x = l * beta
    return (math.exp(-0.5 * x) / -math.expm1(-x)) ** d


def loop_term(ts: ThermoState, l):
    """Signed l-loop contribution (+-1)^{l-1} z^l/l * sum_n e^{-l beta eps_n}."""
    return ts.sign ** (l - 1) * ts.z ** l / l * single_loop_sum(ts.beta, l, ts.d)


def grand_potential_ideal_sho(ts: ThermoState, l_max=DEFAULT_L_MAX):
    """-beta*Omega summed over loops 1..l_max.

    >>> round(grand_potential_ideal_sho(ThermoState(0.2), 1), 4)
    4.9917
    """
    ts.check_convergent()
    _check_l_max(l_max)
    return math.fsum(loop_term(ts, l) for l in range(1, l_max + 1))


def default_n_cap(ts: ThermoState, tol=1e-14):
    """Lattice cap per axis so the largest neglected Boltzmann factor is below tol."""
    # z e^{-beta(d/2 + n)} < tol on the first neglected shell
    n = (math.log(ts.z / tol) / ts.beta) - ts.d / 2.0
    return max(1, int(math.ceil(n)))


def grand_potential_textbook(ts: ThermoState, n_cap=None):
    """-+ sum_n ln(1 -+ z e^{-beta eps_n}) over the d-dimensional state lattice."""
    ts.check_convergent()
    if n_cap is None:
        n_cap = default_n_cap(ts)
    s = ts.sign
    levels = np.arange(n_cap + 1, dtype=float)
    # energies of the lattice n in [0, n_cap]^d, built by outer sums
    eps = np.zeros(())
    for _ in range(ts.d):
        eps = np.add.outer(eps, levels)
    eps = eps.ravel() + ts.d / 2.0
    terms = np.log1p(-s * ts.z * np.exp(-ts.beta * eps))
    return float(-s * math.fsum(terms))


def loop_energy_term(ts: ThermoState, l):
    """Signed l-loop energy contribution, d/dbeta of -loop_term (sign flipped)."""
    x = l * ts.beta
    em = -math.expm1(-x)
    base = math.exp(-0.5 * x) / em
    deriv = (math.exp(-0.5 * x) + math.exp(-1.5 * x)) / em ** 2
    return ts.sign ** (l - 1) * ts.z ** l * 0.5 * ts.d * base ** (ts.d - 1) * deriv


def average_energy_ideal_sho(ts: ThermoState, l_max=DEFAULT_L_MAX):
    """Average energy d(beta Omega)/d beta summed over loops 1..l_max."""
    ts.check_convergent()
    _check_l_max(l_max)
    return math.fsum(loop_energy_term(ts, l) for l in range(1, l_max + 1))

