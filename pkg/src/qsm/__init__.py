"""Phase-space quantum statistical mechanics of the harmonic-oscillator gas.

The commutation function W turns the quantum partition function into a
classical-looking phase-space integral.  This package evaluates W for the
oscillator in several representations, the permutation-loop
symmetrization factor, closed-form reference results, quadrature and
Monte Carlo loop integrals, and a local harmonic approximation for
interacting particles.
"""

from .state import BOSON, FERMION, DivergenceError, SeriesTruncation, ThermoState, WMethod
from .commutation import weighted_w, weighted_wh, mehler_weighted_w
from .symmetrization import CutoffPolicy, eta_loop, cutoff_accept
from .analytic import grand_potential_ideal_sho, average_energy_ideal_sho
from .quadrature import (
    QuadratureGrid, McSampler, monomer_grand_potential, loop_grand_potential,
    average_energy_loops, mc_loop_grand_potential,
)

__version__ = "0.1.0"
