"""Plasmon-mediated collective emission of quantum emitters near a metal nanosphere."""

from .geometry import (
    SILVER,
    DrudeModel,
    Emitter,
    EmitterSet,
    NanoSphere,
    NumericalControls,
    SystemConfig,
    place_pair,
    place_polar,
    place_ring,
    validate,
)
from .greens import (
    drude_permittivity,
    effective_dipole,
    free_projection,
    multipole_coefficient,
    scattered_projection,
    total_projection,
)
from .lindblad import (
    DickeBasis,
    EmissionTrace,
    InvariantError,
    build_liouvillian,
    build_operators,
    evolve,
    extended_dicke_rates,
    ideal_cascade,
    simulate,
    two_emitter_analytic,
)
from .modes import LSPModeSet, extract_modes, find_resonance, lowdin, weak_coupling_ratio
from .rates import (
    ConvergenceError,
    RateMatrices,
    classical_eigenstates,
    collective_rates,
    gamma_delta_matrices_modes,
    gamma_matrix_green,
)

__version__ = "0.1.0"
