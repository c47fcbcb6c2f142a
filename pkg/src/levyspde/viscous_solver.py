"""Operator-split finite-volume scheme for the viscous stochastic problem on (a, b).

Grid: ``cells`` uniform cells with ``cells + 1`` nodes; the two boundary nodes
carry the Dirichlet value 0 and every interior node owns the dual cell of
width dx around it. One time step applies, in order,

1. explicit Engquist-Osher convection for ``u_t = d/dx F(u)``,
2. implicit diffusion ``u - dt * Lap_h(Phi(u) + eps*u) = u*`` by damped Newton,
3. the Euler-Maruyama increment ``phi(u^n) dW`` and the jump compensator
   ``-dt * int nu(u^n; z) m(dz)``, both at the start-of-step state,
4. the jumps of the step in time order, each using the pre-jump state.

Paths are advanced as a batch (leading axis); each path converges on its own
so results do not depend on which other paths share the batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .entropy_calculus import DiffusionModel, FluxModel, kirchhoff_array, zero_diffusion, zero_flux
from .errors import (
    DivergenceError,
    GridMismatchError,
    InvalidParameterError,
    LevySPDEError,
    ModelViolationError,
    NewtonError,
)
from .noise import (
    JumpCoefficient,
    NoisePath,
    check_jump_coefficient,
    compensator_rate,
    make_noise_path,
    no_jumps,
)


@dataclass(frozen=True)
class BrownianCoefficient:
    """phi(u) = sigma * shape(u) with a 1-Lipschitz shape vanishing at 0."""

    sigma: float = 0.0
    shape: str = "linear"

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.shape == "linear":
            return self.sigma * u
        if self.shape == "sine":
            return self.sigma * np.sin(u)
        raise InvalidParameterError(f"unknown Brownian shape {self.shape!r}")

    @property
    def lipschitz(self):
        return abs(self.sigma)


@dataclass(frozen=True)
class ProblemSpec:
    flux: FluxModel = field(default_factory=zero_flux)
    diffusion: DiffusionModel = field(default_factory=zero_diffusion)
    brownian: BrownianCoefficient = field(default_factory=BrownianCoefficient)
    jump: JumpCoefficient = field(default_factory=JumpCoefficient)
    levy: object = field(default_factory=no_jumps)
    u0: Callable | np.ndarray = None
    T: float = 1.0
    domain: tuple = (0.0, 1.0)
    bound: float = 4.0
    name: str = "problem"

    def __post_init__(self):
        if self.T <= 0:
            raise InvalidParameterError("T must be positive")
        if not self.domain[1] > self.domain[0]:
            raise InvalidParameterError("empty domain")
        violations = check_assumptions(self)
        if violations:
            raise ModelViolationError("; ".join(violations))

    @property
    def length(self):
        return self.domain[1] - self.domain[0]

    @property
    def state_bound(self):
        return min(self.bound, self.flux.bound, self.diffusion.bound)

    def initial_values(self, x):
        x = np.asarray(x, dtype=float)
        if self.u0 is None:
            u = np.zeros_like(x)
        elif callable(self.u0):
            u = np.asarray(self.u0(x), dtype=float) * np.ones_like(x)
        else:
            u = np.asarray(self.u0, dtype=float)
            if u.shape != x.shape:
                raise GridMismatchError(f"u0 has shape {u.shape}, grid has {x.shape}")
            u = u.copy()
        u[0] = u[-1] = 0.0
        return u


def check_assumptions(problem: ProblemSpec, samples=2000, seed=2024):
    """Randomized sampling of the structural assumptions; returns messages."""
    rng = np.random.default_rng(seed)
    M = problem.state_bound if math.isfinite(problem.state_bound) else 10.0
    u = rng.uniform(-M, M, samples)
    v = rng.uniform(-M, M, samples)
    out = []
    F, Phi, phi = problem.flux, problem.diffusion, problem.brownian
    if abs(float(F(0.0))) > 0:
        out.append("F(0) != 0")
    if np.any(np.abs(F(u) - F(v)) > F.lipschitz * np.abs(u - v) * (1 + 1e-12) + 1e-14):
        out.append("F not Lipschitz with the declared constant")
    if abs(float(Phi(0.0))) > 0:
        out.append("Phi(0) != 0")
    if np.any((u - v) * (Phi(u) - Phi(v)) < -1e-14):
        out.append("Phi not nondecreasing")
    if np.any(Phi.dPhi(u) < 0) or np.any(Phi.dPhi(u) > Phi.lipschitz * (1 + 1e-12)):
        out.append("Phi' outside [0, L_Phi]")
    if abs(float(phi(0.0))) > 0:
        out.append("phi(0) != 0")
    if np.any(np.abs(phi(u) - phi(v)) > phi.lipschitz * np.abs(u - v) * (1 + 1e-12) + 1e-14):
        out.append("phi not Lipschitz")
    if check_jump_coefficient(problem.jump, problem.levy):
        out.append("jump coefficient violates monotonicity/Lipschitz bound")
    return out


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 0.01
    cells: int = 100
    steps: int = 1000
    newton_tol: float = 1e-10
    newton_maxit: int = 50
    flux_scheme: str = "engquist-osher"
    cfl_safety: float = 0.9
    save_every: int = 1

    def __post_init__(self):
        if self.epsilon < 0:
            raise InvalidParameterError("epsilon must be nonnegative")
        if self.cells < 2 or self.steps < 1 or self.save_every < 1:
            raise InvalidParameterError("need cells >= 2, steps >= 1, save_every >= 1")
        if not 0 < self.cfl_safety < 1:
            raise InvalidParameterError("cfl_safety must lie in (0, 1)")
        if self.flux_scheme != "engquist-osher":
            raise InvalidParameterError(f"unsupported flux scheme {self.flux_scheme!r}")

    def grid(self, problem):
        a, b = problem.domain
        return np.linspace(a, b, self.cells + 1)

    def dx(self, problem):
        return problem.length / self.cells

    def dt(self, problem):
        return problem.T / self.steps

    def check_cfl(self, problem):
        c = problem.flux.lipschitz * self.dt(problem) / self.dx(problem)
        if c > self.cfl_safety:
            raise InvalidParameterError(
                f"CFL number {c:.3g} exceeds safety factor {self.cfl_safety}"
            )
        return c


@dataclass(frozen=True)
class JumpRecord:
    step: int
    tau: float
    o: float
    y: float
    pre_state: np.ndarray


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    x: np.ndarray
    states: np.ndarray
    dt: float
    save_every: int
    newton_iterations: np.ndarray
    jumps: list
    clamps: int = 0
    seed: int | None = None
    path: int | None = None

    @property
    def full_resolution(self):
        return self.save_every == 1

    @property
    def dx(self):
        return float(self.x[1] - self.x[0])

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            np.array_equal(self.times, other.times)
            and np.array_equal(self.states, other.states)
            and np.array_equal(self.newton_iterations, other.newton_iterations)
            and len(self.jumps) == len(other.jumps)
            and all(
                (a.step, a.tau, a.o, a.y) == (b.step, b.tau, b.o, b.y)
                and np.array_equal(a.pre_state, b.pre_state)
                for a, b in zip(self.jumps, other.jumps)
            )
            and self.clamps == other.clamps
        )

    def to_csv(self):
        lines = ["# levyspde trajectory v1", "t,x,u"]
        for t, row in zip(self.times, self.states):
            lines.extend(f"{t!r},{xi!r},{ui!r}" for xi, ui in zip(self.x.tolist(), row.tolist()))
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# one step


def _convect(u, dt, dx, flux):
    # Engquist-Osher flux for u_t + (-F(u))_x = 0 on every edge
    h = -flux.decreasing(u[..., :-1]) - flux.increasing(u[..., 1:])
    out = u.copy()
    out[..., 1:-1] -= dt / dx * (h[..., 1:] - h[..., :-1])
    return out


def _diffusion_residual(u, rhs, r, B):
    b = B(u)
    b[..., 0] = b[..., -1] = 0.0
    res = np.zeros_like(u)
    res[..., 1:-1] = u[..., 1:-1] - rhs[..., 1:-1] - r * (b[..., :-2] - 2.0 * b[..., 1:-1] + b[..., 2:])
    return res


def _newton_direction(u, res, r, dB):
    """Solve J delta = res for every path in the batch with one banded solve."""
    P, n1 = u.shape
    m = n1 - 2
    d = dB(u[:, 1:-1])
    ab = np.empty((3, P * m))
    off = (-r * d).reshape(-1)
    ab[1] = (1.0 + 2.0 * r * d).reshape(-1)
    ab[0] = off
    ab[2] = off
    ab[0].reshape(P, m)[:, 0] = 0.0
    ab[2].reshape(P, m)[:, -1] = 0.0
    delta = np.zeros_like(u)
    delta[:, 1:-1] = solve_banded((1, 1), ab, res[:, 1:-1].reshape(-1), check_finite=False).reshape(P, m)
    return delta


def _bisection_sweeps(u, rhs, r, B, sweeps, lo, hi):
    """Red-black nonlinear Gauss-Seidel with per-cell bisection (fallback)."""
    u = u.copy()
    n = u.shape[-1]
    for _ in range(sweeps):
        for parity in (1, 2):
            idx = np.arange(parity, n - 1, 2)
            bl = B(u[:, idx - 1])
            br = B(u[:, idx + 1])
            bl[:, idx - 1 == 0] = 0.0
            br[:, idx + 1 == n - 1] = 0.0
            target = rhs[:, idx] + r * (bl + br)
            a = np.full(target.shape, lo)
            b = np.full(target.shape, hi)
            for _ in range(60):
                mid = 0.5 * (a + b)
                f = mid + 2.0 * r * B(mid) - target
                a = np.where(f < 0, mid, a)
                b = np.where(f < 0, b, mid)
            u[:, idx] = 0.5 * (a + b)
    return u


def _solve_diffusion(rhs, dt, dx, diffusion, epsilon, tol, maxit, bound):
    r = dt / dx**2
    if diffusion.lipschitz == 0 and epsilon == 0:
        return rhs.copy(), np.zeros(rhs.shape[0], dtype=int)
    B = lambda v: diffusion.Phi(v) + epsilon * v
    dB = lambda v: diffusion.dPhi(v) + epsilon
    u = rhs.copy()
    iters = np.zeros(u.shape[0], dtype=int)
    res = _diffusion_residual(u, rhs, r, B)
    rnorm = np.max(np.abs(res), axis=-1)
    active = rnorm > tol
    used_fallback = False
    it = 0
    while np.any(active):
        if it >= maxit:
            if used_fallback:
                raise NewtonError(
                    f"Newton did not converge in {maxit} iterations",
                    residual=float(np.max(rnorm)),
                )
            lim = max(bound, float(np.max(np.abs(rhs))) + 1.0)
            sub = _bisection_sweeps(u[active], rhs[active], r, B, 50, -lim, lim)
            u[active] = sub
            res[active] = _diffusion_residual(sub, rhs[active], r, B)
            rnorm[active] = np.max(np.abs(res[active]), axis=-1)
            active = rnorm > tol
            used_fallback = True
            it = 0
            continue
        it += 1
        ia = np.flatnonzero(active)
        ua, ra = u[ia], res[ia]
        delta = _newton_direction(ua, ra, r, dB)
        lam = np.ones(len(ia))
        old = rnorm[ia]
        for _ in range(30):
            trial = ua - lam[:, None] * delta
            tres = _diffusion_residual(trial, rhs[ia], r, B)
            tnorm = np.max(np.abs(tres), axis=-1)
            ok = (tnorm <= (1.0 - 1e-4 * lam) * old) | (tnorm <= tol)
            if np.all(ok):
                break
            lam = np.where(ok, lam, 0.5 * lam)
        u[ia], res[ia], rnorm[ia] = trial, tres, tnorm
        iters[ia] += 1
        active = rnorm > tol
    return u, iters


def _advance(u, n, dt, dx, dW, jumps, problem, config, rate):
    """Advance a batch ``u`` (P, N+1) by one step; returns (u, iters, records)."""
    start = u
    v = _convect(u, dt, dx, problem.flux)
    v, iters = _solve_diffusion(
        v, dt, dx, problem.diffusion, config.epsilon, config.newton_tol,
        config.newton_maxit, problem.state_bound,
    )
    inner = start[:, 1:-1]
    v[:, 1:-1] += problem.brownian(inner) * dW[:, None]
    if rate:
        v[:, 1:-1] -= dt * rate * problem.jump.h(inner)
    records = []
    for p, plist in enumerate(jumps):
        for tau, o, y in plist:
            pre = v[p].copy()
            records.append((p, JumpRecord(n, tau, o, y, pre)))
            v[p, 1:-1] += problem.jump(pre[1:-1], o, y)
    v[:, 0] = v[:, -1] = 0.0
    return v, iters, records


def step(state, dt, dW, jumps_in_step, problem: ProblemSpec, config: SolverConfig):
    """One step for a single path (1-d ``state``) or a batch (2-d, one row per path).

    ``jumps_in_step`` is a list of (tau, o, y) for a single path, or a list of
    such lists for a batch.
    """
    u = np.asarray(state, dtype=float)
    single = u.ndim == 1
    if single:
        u = u[None, :]
        jumps_in_step = [list(jumps_in_step)]
    dW = np.broadcast_to(np.asarray(dW, dtype=float), (u.shape[0],))
    dx = problem.length / (u.shape[-1] - 1)
    if not np.all(np.isfinite(u)):
        raise DivergenceError("non-finite state")
    rate = compensator_rate(problem.jump, problem.levy)
    v, _, _ = _advance(u, 0, dt, dx, dW, jumps_in_step, problem, config, rate)
    if not np.all(np.isfinite(v)):
        raise DivergenceError("non-finite state after step")
    M = problem.state_bound
    v = np.clip(v, -M, M)
    return v[0] if single else v


def solve_paths(problem: ProblemSpec, config: SolverConfig, noises, u0=None):
    """Solve one path per NoisePath, advancing them together. Returns Trajectories."""
    config.check_cfl(problem)
    noises = list(noises)
    if not noises:
        return []
    for nz in noises:
        if nz.steps != config.steps or not math.isclose(nz.T, problem.T):
            raise GridMismatchError(
                f"noise grid (T={nz.T}, steps={nz.steps}) does not match "
                f"config (T={problem.T}, steps={config.steps})"
            )
    P = len(noises)
    x = config.grid(problem)
    dx, dt = config.dx(problem), config.dt(problem)
    if u0 is None:
        u0 = problem.initial_values(x)
    u = np.tile(np.asarray(u0, dtype=float), (P, 1))
    u[:, 0] = u[:, -1] = 0.0
    rate = compensator_rate(problem.jump, problem.levy)
    by_step = [nz.jumps_by_step() for nz in noises]
    dW = np.stack([nz.dW for nz in noises])
    M = problem.state_bound
    saved_idx = list(range(0, config.steps + 1, config.save_every))
    states = np.empty((P, len(saved_idx), len(x)))
    states[:, 0] = u
    iters = np.zeros((P, config.steps), dtype=np.int32)
    records = [[] for _ in range(P)]
    clamps = np.zeros(P, dtype=int)
    k = 1
    for n in range(config.steps):
        jumps = [bs[n] for bs in by_step]
        try:
            u, it, recs = _advance(u, n, dt, dx, dW[:, n], jumps, problem, config, rate)
        except NewtonError as exc:
            exc.step = n
            raise
        iters[:, n] = it
        for p, rec in recs:
            records[p].append(rec)
        if not np.all(np.isfinite(u)):
            raise DivergenceError(f"non-finite state at step {n}", step=n)
        over = np.abs(u) > M
        if np.any(over):
            clamps += over.sum(axis=-1)
            u = np.clip(u, -M, M)
        if (n + 1) % config.save_every == 0:
            states[:, k] = u
            k += 1
    times = np.array(saved_idx, dtype=float) * dt
    return [
        Trajectory(
            times=times,
            x=x,
            states=states[p],
            dt=dt,
            save_every=config.save_every,
            newton_iterations=iters[p],
            jumps=records[p],
            clamps=int(clamps[p]),
            seed=noises[p].seed,
            path=noises[p].path,
        )
        for p in range(P)
    ]


def solve_path(problem: ProblemSpec, config: SolverConfig, noise: NoisePath, u0=None) -> Trajectory:
    return solve_paths(problem, config, [noise], u0=u0)[0]


def coupled_ensemble(problem: ProblemSpec, runs, n_paths, master_seed, on_chunk, chunk=25, first_path=0):
    """Solve every ``(config, u0)`` run on the same noise paths, chunk by chunk.

    ``on_chunk(results, noises)`` receives one list of Trajectories per run.
    A path that fails in any run is dropped from its chunk and reported in
    the returned list of (path, message) pairs.
    """
    runs = list(runs)
    if len({cfg.steps for cfg, _ in runs}) != 1:
        raise GridMismatchError("coupled runs must share the time grid")
    steps = runs[0][0].steps
    failures = []
    end = first_path + n_paths
    for s in range(first_path, end, chunk):
        noises = [make_noise_path(problem.levy, problem.T, steps, master_seed, p) for p in range(s, min(s + chunk, end))]
        try:
            results = [solve_paths(problem, cfg, noises, u0) for cfg, u0 in runs]
        except LevySPDEError:
            results, ok = [[] for _ in runs], []
            for nz in noises:
                try:
                    single = [solve_paths(problem, cfg, [nz], u0)[0] for cfg, u0 in runs]
                except (NewtonError, DivergenceError) as exc:
                    failures.append((nz.path, str(exc)))
                    continue
                for lst, tr in zip(results, single):
                    lst.append(tr)
                ok.append(nz)
            noises = ok
        if noises:
            on_chunk(results, noises)
    return failures


def zero_noise(problem: ProblemSpec, config: SolverConfig, seed=0, path=0):
    return NoisePath(seed, path, problem.T, config.steps, np.zeros(config.steps), ())


# --------------------------------------------------------------------------
# a-priori statistics


def _time_integral(times, values):
    return float(np.trapezoid(values, times)) if len(times) > 1 else 0.0


def energy_series(traj: Trajectory):
    return np.sum(traj.states**2, axis=-1) * traj.dx


def gradient_energy_series(traj: Trajectory, G=None):
    v = traj.states if G is None else G(traj.states)
    g = np.diff(v, axis=-1) / traj.dx
    return np.sum(g**2, axis=-1) * traj.dx


def apriori_statistics(ensemble, problem: ProblemSpec, config: SolverConfig):
    """Monte Carlo estimates of sup_t E||u||^2, eps*int E||grad u||^2 and int E||grad G(u)||^2."""
    ensemble = list(ensemble)
    if not ensemble:
        raise InvalidParameterError("empty ensemble")
    times = ensemble[0].times
    G = lambda v: kirchhoff_array(problem.diffusion, v)
    e = np.mean([energy_series(tr) for tr in ensemble], axis=0)
    gu = np.mean([gradient_energy_series(tr) for tr in ensemble], axis=0)
    gg = np.mean([gradient_energy_series(tr, G) for tr in ensemble], axis=0)
    return {
        "sup_energy": float(np.max(e)),
        "viscous_dissipation": config.epsilon * _time_integral(times, gu),
        "kirchhoff_dissipation": _time_integral(times, gg),
    }
