"""Numerical laboratory for a measurement-and-feedback-controlled double
quantum dot operated as an autonomous work extractor.

Layout:
    params      parameters, bath rates, feedback logic, eigenbasis
    liouville   vectorized Lindblad generators and counting channels
    spectral    generalized-Hermite steady-state solver (quantum/classical)
    reduced     fast-detector, analytic, classical, and eigenbasis models
    energetics  power, heat, and the control-energy decomposition
    trajectory  stochastic pure-state unraveling with filtered detection
    presets     pinned parameter sets for the reference sweeps
    cli         the ``demon`` command-line entry point
"""

from .params import (
    ConfigTag,
    DetectorParams,
    InvalidParameterError,
    LevelConfiguration,
    RateOverride,
    SystemParams,
    feedback_levels,
)
from .spectral import SolveResult, solve_steady
from .reduced import error_probability, heat_analytic, power_analytic
from .energetics import EnergyFlows, ParticleCurrents, energy_flows

__version__ = "0.1.0"

__all__ = [
    "ConfigTag",
    "DetectorParams",
    "EnergyFlows",
    "InvalidParameterError",
    "LevelConfiguration",
    "ParticleCurrents",
    "RateOverride",
    "SolveResult",
    "SystemParams",
    "energy_flows",
    "error_probability",
    "feedback_levels",
    "heat_analytic",
    "power_analytic",
    "solve_steady",
    "__version__",
]
