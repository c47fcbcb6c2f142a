"""Named initial data, test functions and the problems used across experiments."""

from __future__ import annotations

import numpy as np

from .entropy_calculus import EntropyApprox, burgers_flux, linear_diffusion, power_diffusion, zero_flux
from .entropy_verifier import AdmissibleTriple, TestFunction
from .noise import AtomicLevyMeasure, JumpCoefficient
from .viscous_solver import BrownianCoefficient, ProblemSpec


def bump(x, center=0.5, half_width=0.25):
    s = (np.asarray(x, dtype=float) - center) / half_width
    return np.where(np.abs(s) < 1, (1 - s * s) ** 4, 0.0)


PROFILES = {
    "zero": lambda x: np.zeros_like(np.asarray(x, dtype=float)),
    "sine": lambda x: np.sin(np.pi * np.asarray(x, dtype=float)),
    "sine2": lambda x: np.sin(2 * np.pi * np.asarray(x, dtype=float)),
    "bump": bump,
    "step": lambda x: np.where((np.asarray(x) >= 0.3) & (np.asarray(x) <= 0.6), 1.0, 0.0),
}


def reference_problem(sigma=0.2, lam_star=0.5, u0="sine2", T=0.5):
    """Burgers flux, degenerate power diffusion, linear Brownian and two-atom jump noise."""
    return ProblemSpec(
        flux=burgers_flux(4.0),
        diffusion=power_diffusion(2.0, 4.0),
        brownian=BrownianCoefficient(sigma, "linear"),
        jump=JumpCoefficient(lam_star, "linear"),
        levy=AtomicLevyMeasure(),
        u0=PROFILES[u0],
        T=T,
        name="burgers-power-levy",
    )


def heat_problem(sigma=0.2, u0="sine2", T=0.5):
    """u_t = u_xx + sigma u dW: the calibration problem for the tolerance model."""
    return ProblemSpec(
        flux=zero_flux(),
        diffusion=linear_diffusion(1.0),
        brownian=BrownianCoefficient(sigma, "linear"),
        u0=PROFILES[u0],
        T=T,
        name="stochastic-heat",
    )


# interior bump; a second interior bump for k < 0 and a wide one (crossing the boundary) otherwise
PSI_A = TestFunction(0.5, 0.3, 0.0, 0.6)
PSI_B_INTERIOR = TestFunction(0.3, 0.2, 0.25, 0.3)
PSI_B_WIDE = TestFunction(0.5, 0.75, 0.25, 0.5)


def reference_triples(k_values=(-0.5, 0.0, 0.7), xi=0.02, orientation="plus"):
    beta = EntropyApprox(xi, orientation)
    out = []
    for k in k_values:
        inner = k < 0 if orientation == "plus" else k > 0
        for name, psi in (("A", PSI_A), ("B", PSI_B_INTERIOR if inner else PSI_B_WIDE)):
            out.append(AdmissibleTriple(k, psi, beta, f"k={k:g},psi={name},{orientation}"))
    return out
