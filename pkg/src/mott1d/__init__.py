"""Numerical laboratory for a 1-D test particle exciting two localized oscillators.

The package computes joint excitation probabilities of two harmonic
oscillators coupled to a fast test particle, both by direct numerical
evaluation of the second-order time-dependent perturbation series
(`duhamel`) and by stationary-phase asymptotic formulas with computable
error bounds (`stationary`, `oscint`).  `report` and `cli` drive
parameter sweeps that contrast oscillators placed on the same side vs.
opposite sides of the origin.
"""

from .params import (
    PhysicalParams,
    DimensionlessParams,
    ValidationReport,
    derive_dimensionless,
    scaling_family,
    validate_assumptions,
)
from .specfun import (
    GaussianPacket,
    Potential,
    SpectralProfile,
    bump_potential,
    hermite_fn,
    pair_transform,
    potential_transform,
    spectral_profile,
    weighted_sobolev_norm,
)
from .oscint import StripIntegrand, ExpansionResult, brute_strip, expand_strip
from .duhamel import (
    GridFunction,
    OracleConfig,
    Oracle,
    coupling_potential,
    f1_oracle,
    f2_both_excited_oracle,
    free_propagate,
    probability_oracle,
)
from .stationary import (
    BoundReport,
    PhaseSpec,
    f1_leading,
    f1_minus_bound,
    f2_leading,
    p_minus_bound,
    p_plus_leading,
    s_correction_bound,
)
from .report import ComparisonRow, ExperimentSpec, fit_rate, run_experiment

__all__ = [
    "PhysicalParams",
    "DimensionlessParams",
    "ValidationReport",
    "derive_dimensionless",
    "scaling_family",
    "validate_assumptions",
    "GaussianPacket",
    "Potential",
    "SpectralProfile",
    "bump_potential",
    "hermite_fn",
    "pair_transform",
    "potential_transform",
    "spectral_profile",
    "weighted_sobolev_norm",
    "StripIntegrand",
    "ExpansionResult",
    "brute_strip",
    "expand_strip",
    "GridFunction",
    "OracleConfig",
    "Oracle",
    "coupling_potential",
    "f1_oracle",
    "f2_both_excited_oracle",
    "free_propagate",
    "probability_oracle",
    "BoundReport",
    "PhaseSpec",
    "f1_leading",
    "f1_minus_bound",
    "f2_leading",
    "p_minus_bound",
    "p_plus_leading",
    "s_correction_bound",
    "ComparisonRow",
    "ExperimentSpec",
    "fit_rate",
    "run_experiment",
]

__version__ = "0.1.0"
