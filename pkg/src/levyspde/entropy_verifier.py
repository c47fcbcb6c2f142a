"""Discrete entropy functional along computed trajectories.

All space integrals use trapezoidal weights on the solver nodes (the dual-cell
midpoint rule, with half weight on the two boundary nodes). Time integrals use
the left endpoint of each step, which is also the Ito evaluation point, and the
jump terms use the pre-jump states recorded by the solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .entropy_calculus import EntropyApprox, entropy_flux_array, kirchhoff_array
from .errors import GridMismatchError, InvalidParameterError, QuadratureError
from .noise import NoisePath
from .viscous_solver import ProblemSpec, Trajectory, coupled_ensemble

TERMS = ("transport", "ito", "ito_correction", "jump_martingale", "jump_compensation", "dissipation", "initial")


def _bump(s):
    inside = np.abs(s) < 1.0
    q = np.where(inside, 1.0 - s * s, 0.0)
    return q**4, np.where(inside, -8.0 * s * q**3, 0.0), np.where(inside, -8.0 * q**3 + 48.0 * s * s * q**2, 0.0)


@dataclass(frozen=True)
class TestFunction:
    """psi(t, x) = amplitude * b((t - tc)/tw) * b((x - xc)/xw), b(s) = (1 - s^2)^4 on |s| < 1."""

    x_center: float
    x_half_width: float
    t_center: float = 0.0
    t_half_width: float = 1.0
    amplitude: float = 1.0

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.x_half_width <= 0 or self.t_half_width <= 0 or self.amplitude < 0:
            raise InvalidParameterError("test function needs positive widths and amplitude >= 0")

    @property
    def x_support(self):
        return (self.x_center - self.x_half_width, self.x_center + self.x_half_width)

    @property
    def t_support(self):
        return (self.t_center - self.t_half_width, self.t_center + self.t_half_width)

    def interior(self, domain):
        lo, hi = self.x_support
        return lo > domain[0] and hi < domain[1]

    def evaluate(self, t, x):
        """(psi, psi_t, psi_x, psi_xx) on the tensor grid t[:, None], x[None, :]."""
        t = np.asarray(t, dtype=float)[:, None]
        x = np.asarray(x, dtype=float)[None, :]
        bt, dbt, _ = _bump((t - self.t_center) / self.t_half_width)
        bx, dbx, ddbx = _bump((x - self.x_center) / self.x_half_width)
        a = self.amplitude
        return (
            a * bt * bx,
            a * dbt / self.t_half_width * bx,
            a * bt * dbx / self.x_half_width,
            a * bt * ddbx / self.x_half_width**2,
        )


@dataclass(frozen=True)
class CombinedTestFunction:
    """Nonnegative combination sum_k c_k psi_k."""

    terms: tuple

    __test__ = False

    def interior(self, domain):
        return all(tf.interior(domain) for c, tf in self.terms if c > 0)

    def evaluate(self, t, x):
        parts = [(c, tf.evaluate(t, x)) for c, tf in self.terms]
        return tuple(sum(c * p[i] for c, p in parts) for i in range(4))


@dataclass(frozen=True)
class AdmissibleTriple:
    k: float
    psi: TestFunction
    beta: EntropyApprox
    label: str = ""


def admissible(triple: AdmissibleTriple, domain=(0.0, 1.0)):
    """k < 0 forces an interior test function for the plus entropy; mirrored for minus."""
    k = triple.k if triple.beta.orientation == "plus" else -triple.k
    return k >= 0 or triple.psi.interior(domain)


def edge_curvature(beta, U, k):
    """Mean of beta''(u - k) over each edge for the piecewise linear interpolant of U.

    Equals the divided difference of beta' across the edge, so a transition
    layer of width xi narrower than a cell is still integrated exactly.
    """
    d1 = beta.d1(U - k)
    du = np.diff(U, axis=-1)
    mid = beta.d2(0.5 * (U[..., 1:] + U[..., :-1]) - k)
    small = np.abs(du) < 1e-12
    return np.where(small, mid, np.diff(d1, axis=-1) / np.where(small, 1.0, du))


def _edge_mean(v):
    return 0.5 * (v[..., 1:] + v[..., :-1])


def _space_weights(x):
    dx = x[1] - x[0]
    w = np.full(len(x), dx)
    w[0] = w[-1] = 0.5 * dx
    return w


def lambda_functional(
    traj: Trajectory,
    noise: NoisePath,
    triple: AdmissibleTriple,
    problem: ProblemSpec,
    quad_tol=1e-8,
    breakdown=False,
):
    """Discrete entropy functional for one path; optionally the per-term dict."""
    if not admissible(triple, problem.domain):
        raise InvalidParameterError(f"triple {triple.label or triple} is not admissible")
    if traj.save_every != 1 or len(traj.times) != noise.steps + 1 or not math.isclose(traj.dt, noise.dt):
        raise GridMismatchError("trajectory and noise path must share the full time grid")
    k, beta = triple.k, triple.beta
    x, t = traj.x, traj.times
    U = traj.states[:-1]  # left endpoints
    tl = t[:-1]
    dt = traj.dt
    w = _space_weights(x)
    psi, psi_t, psi_x, psi_xx = triple.psi.evaluate(tl, x)
    F, Phi = problem.flux, problem.diffusion

    r = U - k
    b0, b1 = beta(r), beta.d1(r)
    Fb = entropy_flux_array(F, beta, U, k)
    Pb = entropy_flux_array(Phi, beta, U, k)
    if quad_tol is not None:
        check = traj.states[:1]
        for model, val in ((F, Fb[:1]), (Phi, Pb[:1])):
            err = float(np.max(np.abs(entropy_flux_array(model, beta, check, k, nodes=32) - val)))
            if err > quad_tol:
                raise QuadratureError("entropy flux rule not resolved", achieved=err)
    out = dict.fromkeys(TERMS, 0.0)
    out["transport"] = dt * float(np.sum((b0 * psi_t - Fb * psi_x + Pb * psi_xx) @ w))

    phi = problem.brownian(U)
    out["ito"] = float(np.sum(((phi * b1 * psi) @ w) * noise.dW))
    curv = edge_curvature(beta, U, k)
    out["ito_correction"] = 0.5 * dt * traj.dx * float(np.sum(curv * _edge_mean(phi**2 * psi)))

    o, y, m = problem.levy.nodes()
    if problem.jump.lam_star > 0 and len(m):
        comp_mart = 0.0
        comp = 0.0
        for oq, yq, mq in zip(o, y, m):
            nu = problem.jump(U, oq, yq)
            shifted = beta(r + nu)
            comp_mart += mq * float(np.sum(((shifted - b0) * psi) @ w))
            comp += mq * float(np.sum(((shifted - b0 - nu * b1) * psi) @ w))
        jumps = 0.0
        for rec in traj.jumps:
            pre = rec.pre_state
            nu = problem.jump(pre, rec.o, rec.y)
            ps = triple.psi.evaluate(np.array([rec.tau]), x)[0][0]
            jumps += float(np.sum((beta(pre - k + nu) - beta(pre - k)) * ps * w))
        out["jump_martingale"] = jumps - dt * comp_mart
        out["jump_compensation"] = dt * comp

    G = kirchhoff_array(Phi, U)
    grad2 = (np.diff(G, axis=-1) / traj.dx) ** 2
    out["dissipation"] = -dt * traj.dx * float(np.sum(grad2 * curv * _edge_mean(psi)))

    psi0 = triple.psi.evaluate(np.array([t[0]]), x)[0][0]
    out["initial"] = float(np.sum(beta(traj.states[0] - k) * psi0 * w))
    total = float(sum(out[name] for name in TERMS))
    return (total, out) if breakdown else total


@dataclass
class EntropyCheckResult:
    label: str
    values: np.ndarray
    failures: list = field(default_factory=list)
    clamps: int = 0

    @property
    def mean(self):
        return float(np.mean(self.values))

    @property
    def half_width_95(self):
        n = len(self.values)
        return 1.96 * float(np.std(self.values, ddof=1)) / math.sqrt(n) if n > 1 else math.inf

    @property
    def p05(self):
        return float(np.percentile(self.values, 5))


def mc_entropy_check(problem, config, triples, n_paths, master_seed, chunk=25, quad_tol=1e-8):
    """Monte Carlo of the entropy functional for one triple or a list of triples."""
    if n_paths < 2:
        raise InvalidParameterError("need at least two paths")
    single = isinstance(triples, AdmissibleTriple)
    triples = [triples] if single else list(triples)
    for tr in triples:
        if not admissible(tr, problem.domain):
            raise InvalidParameterError(f"triple {tr.label or tr} is not admissible")
    values = [[] for _ in triples]
    clamps = [0]

    def reduce(results, noises):
        for traj, nz in zip(results[0], noises):
            clamps[0] += traj.clamps
            for j, tr in enumerate(triples):
                values[j].append(lambda_functional(traj, nz, tr, problem, quad_tol))

    failures = coupled_ensemble(problem, [(config, None)], n_paths, master_seed, reduce, chunk)
    out = [EntropyCheckResult(tr.label, np.array(v), failures, clamps[0]) for tr, v in zip(triples, values)]
    return out[0] if single else out
