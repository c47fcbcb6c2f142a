"""Numerical verification toolkit for degenerate parabolic-hyperbolic SPDEs with Levy noise on bounded domains."""

from .entropy_calculus import (
    DiffusionModel,
    EntropyApprox,
    FluxModel,
    beta_kernel_limit,
    entropy_flux,
    kirchhoff,
)
from .entropy_verifier import AdmissibleTriple, TestFunction, admissible, lambda_functional, mc_entropy_check
from .harness import ToleranceModel, contraction_experiment, kato_report, viscosity_convergence
from .mollify import ConeSpec, GridFunction, mollify_shifted
from .noise import AtomicLevyMeasure, JumpCoefficient, NoisePath, StableLikeLevyMeasure, make_noise_path
from .viscous_solver import ProblemSpec, SolverConfig, Trajectory, solve_path, step

__version__ = "0.1.0"

__all__ = [
    "AdmissibleTriple",
    "AtomicLevyMeasure",
    "ConeSpec",
    "DiffusionModel",
    "EntropyApprox",
    "FluxModel",
    "GridFunction",
    "JumpCoefficient",
    "NoisePath",
    "ProblemSpec",
    "SolverConfig",
    "StableLikeLevyMeasure",
    "TestFunction",
    "ToleranceModel",
    "Trajectory",
    "admissible",
    "beta_kernel_limit",
    "contraction_experiment",
    "entropy_flux",
    "kato_report",
    "kirchhoff",
    "lambda_functional",
    "make_noise_path",
    "mc_entropy_check",
    "mollify_shifted",
    "solve_path",
    "step",
    "viscosity_convergence",
]
