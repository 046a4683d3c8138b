"""Single-excitation simulations of a giant atom with complex coupling phases."""

from __future__ import annotations

__version__ = "0.1.0"

from .bic_analysis import BicReport, BicState, bic_exists, build_bic, verify_bic_numerically
from .collision_sim import (
    BeamSplitterMap,
    BinChainState,
    chirality_coefficients,
    collide_step,
    emission_fractions,
    run_collisions,
    unitarity_deviation,
)
from .core_model import (
    AmplitudeState,
    DerivedConstants,
    SystemConfig,
    build_hamiltonian,
    coupling_in_momentum_space,
    gauge_fix,
    load_config,
)
from .dde_engine import DdeSpec, asymptotic_amplitude, integrate, laplace_transform_amplitude
from .field_tools import (
    FieldComponents,
    compare_with_lattice_field,
    delay_feedback_amplitude,
    field_at_coupling_points,
)
from .lattice_sim import evolve, evolve_eigenbasis, fit_decay_rate
from .markov_analysis import (
    PhaseVector,
    lindblad_rate,
    markov_residuals,
    markovianity_deviation,
    solve_markov_phases,
)
from .trajectory import Trajectory

__all__ = [
    "AmplitudeState", "BeamSplitterMap", "BicReport", "BicState", "BinChainState",
    "DdeSpec", "DerivedConstants", "FieldComponents", "PhaseVector", "SystemConfig",
    "Trajectory", "asymptotic_amplitude", "bic_exists", "build_bic", "build_hamiltonian",
    "chirality_coefficients", "collide_step", "compare_with_lattice_field",
    "coupling_in_momentum_space", "delay_feedback_amplitude", "emission_fractions",
    "evolve", "evolve_eigenbasis", "field_at_coupling_points", "fit_decay_rate", "gauge_fix",
    "integrate", "laplace_transform_amplitude", "lindblad_rate", "load_config",
    "markov_residuals", "markovianity_deviation", "run_collisions", "solve_markov_phases",
    "unitarity_deviation", "verify_bic_numerically",
]
