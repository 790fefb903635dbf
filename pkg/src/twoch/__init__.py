"""Solitary-wave trains of a two-component Camassa-Holm type system.

    u_t + u u_x + (1 - d^2)^{-1} d(u^2 + u_x^2/2 + eta + eta^2/2) = 0
    eta_t + ((1 + eta) u)_x = 0

on a periodic grid: exact travelling profiles, a pseudospectral RK4
integrator, conserved and localized functionals, modulation fitting, the
constrained Hessian spectrum and a command-line experiment harness.
"""
from __future__ import annotations

from .backend import available as available_backends
from .coercivity import (
    CoercivityReport,
    HessianOperator,
    assemble_hessian,
    constrained_spectrum,
    quadratic_form_lambda,
    weight_condition_check,
)
from .config import ConfigError, RunConfig, load_config
from .dynamics import BreakdownError, CFLError, StepperConfig, Trajectory, evolve, rhs, step_rk4
from .functionals import (
    Partition,
    energy_E,
    energy_F,
    localized_energies,
    multiplier_bound_check,
    variational_derivatives,
)
from .grid import Field, Grid, State, deriv, helmholtz, helmholtz_inverse, x_inner, x_norm
from .modulation import ModulationError, ModulationModel, decompose_a, fit_modulation, track
from .solitary import ProfileError, SolitaryWave, TrainSpec, profile, stationary_residual, train
from .weights import WeightPsi, audit_weight

__version__ = "0.1.0"

__all__ = [
    "BreakdownError", "CFLError", "CoercivityReport", "ConfigError", "Field", "Grid",
    "HessianOperator", "ModulationError", "ModulationModel", "Partition", "ProfileError",
    "RunConfig", "SolitaryWave", "State", "StepperConfig", "Trajectory", "TrainSpec",
    "WeightPsi", "assemble_hessian", "audit_weight", "available_backends",
    "constrained_spectrum", "decompose_a", "deriv", "energy_E", "energy_F", "evolve",
    "fit_modulation", "helmholtz", "helmholtz_inverse", "load_config", "localized_energies",
    "multiplier_bound_check", "profile", "quadratic_form_lambda", "rhs", "stationary_residual",
    "step_rk4", "track", "train", "variational_derivatives", "weight_condition_check",
    "x_inner", "x_norm",
]
