import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyspde.entropy_calculus import (
    FluxModel,
    burgers_flux,
    linear_diffusion,
    power_diffusion,
)
from levyspde.errors import (
    DivergenceError,
    GridMismatchError,
    InvalidParameterError,
    ModelViolationError,
)
from levyspde.noise import AtomicLevyMeasure, JumpCoefficient, make_noise_path, no_jumps
from levyspde.reference import PROFILES, bump, reference_problem
from levyspde.viscous_solver import (
    BrownianCoefficient,
    ProblemSpec,
    SolverConfig,
    apriori_statistics,
    coupled_ensemble,
    solve_path,
    solve_paths,
    step,
    zero_noise,
)

SMALL = SolverConfig(epsilon=0.01, cells=40, steps=200)


def noise_for(problem, config, seed=1, path=0):
    return make_noise_path(problem.levy, problem.T, config.steps, seed, path)


def test_zero_is_a_fixed_point():
    problem = reference_problem(u0="zero")
    for p in range(3):
        traj = solve_path(problem, SMALL, noise_for(problem, SMALL, 5, p))
        assert np.all(traj.states == 0.0)


def test_dirichlet_boundary_and_determinism():
    problem = reference_problem()
    nz = noise_for(problem, SMALL, 3)
    a = solve_path(problem, SMALL, nz)
    b = solve_path(problem, SMALL, nz)
    assert a == b
    assert np.all(a.states[:, 0] == 0.0) and np.all(a.states[:, -1] == 0.0)
    assert a.states.shape == (SMALL.steps + 1, SMALL.cells + 1)


def test_batch_matches_single_paths():
    problem = reference_problem()
    noises = [noise_for(problem, SMALL, 4, p) for p in range(4)]
    batch = solve_paths(problem, SMALL, noises)
    for nz, traj in zip(noises, batch):
        alone = solve_path(problem, SMALL, nz)
        assert np.allclose(traj.states, alone.states, rtol=0, atol=1e-12)


def test_heat_matches_discrete_eigenmode():
    # implicit Euler multiplies the first sine mode by 1/(1 + 4 r sin^2(pi dx / 2)) per step
    problem = ProblemSpec(diffusion=linear_diffusion(1.0), u0=PROFILES["sine"], T=0.1)
    config = SolverConfig(epsilon=0.0, cells=50, steps=100)
    traj = solve_path(problem, config, zero_noise(problem, config))
    dx, dt = config.dx(problem), config.dt(problem)
    lam = 1.0 / (1.0 + 4.0 * dt / dx**2 * math.sin(math.pi * dx / 2) ** 2)
    expected = lam**config.steps * np.sin(np.pi * traj.x)
    assert np.allclose(traj.states[-1], expected, atol=1e-10)
    # and the continuous decay to within discretization error
    assert np.allclose(traj.states[-1], math.exp(-math.pi**2 * 0.1) * np.sin(np.pi * traj.x), atol=2e-3)


def test_maximum_principle_for_pure_viscosity():
    problem = ProblemSpec(u0=PROFILES["step"], T=0.2)
    config = SolverConfig(epsilon=0.05, cells=60, steps=100)
    traj = solve_path(problem, config, zero_noise(problem, config))
    peaks = np.max(np.abs(traj.states), axis=-1)
    assert np.all(np.diff(peaks) <= 1e-14)
    assert peaks[-1] < peaks[0]


def test_nothing_to_do_keeps_state():
    problem = ProblemSpec(u0=PROFILES["bump"], T=0.1)
    config = SolverConfig(epsilon=0.0, cells=20, steps=10)
    traj = solve_path(problem, config, zero_noise(problem, config))
    assert np.all(traj.states == traj.states[0])


def test_jump_splice_oracle():
    # no transport or diffusion: between jumps u shrinks by (1 - dt * rate), each jump multiplies by 1 + lam g(y)
    lam = 0.5
    spec = AtomicLevyMeasure()
    problem = ProblemSpec(jump=JumpCoefficient(lam), levy=spec, u0=PROFILES["sine"], T=1.0)
    config = SolverConfig(epsilon=0.0, cells=10, steps=50)
    nz = make_noise_path(spec, 1.0, 50, seed=8)
    assert nz.jumps, "seed chosen so that the path has jumps"
    traj = solve_path(problem, config, nz)
    rate = lam * (0.5 + 0.3)
    factor = 1.0
    for jumps in nz.jumps_by_step():
        factor *= 1.0 - config.dt(problem) * rate
        for _, _, y in jumps:
            factor *= 1.0 + lam * min(1.0, abs(y))
    u0 = problem.initial_values(traj.x)
    assert np.allclose(traj.states[-1], factor * u0, atol=1e-13)
    assert len(traj.jumps) == len(nz.jumps)
    assert all(np.array_equal(r.pre_state[1:-1] != 0, u0[1:-1] != 0) for r in traj.jumps)


def test_brownian_step_is_euler_maruyama():
    problem = ProblemSpec(brownian=BrownianCoefficient(0.3), u0=PROFILES["sine"], T=1.0)
    config = SolverConfig(epsilon=0.0, cells=10, steps=5)
    nz = make_noise_path(no_jumps(), 1.0, 5, seed=2)
    traj = solve_path(problem, config, nz)
    expected = np.prod(1.0 + 0.3 * nz.dW) * problem.initial_values(traj.x)
    assert np.allclose(traj.states[-1], expected, atol=1e-14)


@settings(max_examples=6, deadline=None)
@given(seed=st.integers(0, 10_000), lift=st.floats(0.0, 0.5))
def test_comparison_principle(seed, lift):
    problem = reference_problem()
    config = SolverConfig(epsilon=0.01, cells=40, steps=200)
    x = config.grid(problem)
    u1 = problem.initial_values(x)
    u2 = u1 - lift * bump(x)
    nz = noise_for(problem, config, seed)
    a = solve_path(problem, config, nz, u0=u1)
    b = solve_path(problem, config, nz, u0=u2)
    assert np.all(a.states >= b.states - 1e-12)


def test_cfl_violation_is_rejected():
    problem = reference_problem()
    config = SolverConfig(cells=100, steps=10)
    with pytest.raises(InvalidParameterError, match="CFL"):
        solve_path(problem, config, noise_for(problem, config))


def test_noise_grid_mismatch():
    problem = reference_problem()
    nz = make_noise_path(problem.levy, problem.T, 100, 1)
    with pytest.raises(GridMismatchError):
        solve_path(problem, SMALL, nz)
    with pytest.raises(GridMismatchError):
        coupled_ensemble(problem, [(SMALL, None), (SolverConfig(steps=400, cells=40), None)], 1, 0, lambda r, n: None)


def test_initial_array_shape_checked():
    problem = ProblemSpec(u0=np.zeros(5))
    with pytest.raises(GridMismatchError):
        problem.initial_values(np.linspace(0, 1, 11))


def test_step_rejects_non_finite_state():
    problem = ProblemSpec()
    with pytest.raises(DivergenceError):
        step(np.array([0.0, np.nan, 0.0]), 0.01, 0.0, [], problem, SolverConfig())


def test_step_matches_solver():
    problem = reference_problem()
    config = SolverConfig(epsilon=0.01, cells=40, steps=200)
    nz = noise_for(problem, config, 6)
    traj = solve_path(problem, config, nz)
    u = traj.states[0]
    for n, jumps in enumerate(nz.jumps_by_step()[:20]):
        u = step(u, config.dt(problem), nz.dW[n], jumps, problem, config)
    assert np.allclose(u, traj.states[20], atol=1e-12)


def test_model_violations_are_caught():
    liar = FluxModel("liar", lambda u: 3.0 * np.asarray(u), lambda u: 3.0 + 0 * np.asarray(u), 1.0,
                     lambda u: 3.0 * np.asarray(u), lambda u: 0 * np.asarray(u))
    with pytest.raises(ModelViolationError, match="Lipschitz"):
        ProblemSpec(flux=liar)
    bad_jump = JumpCoefficient(1.0, g=lambda o, y: 3.0 + 0 * np.asarray(y))
    with pytest.raises(ModelViolationError, match="jump"):
        ProblemSpec(jump=bad_jump, levy=AtomicLevyMeasure())


def test_solver_config_validation():
    with pytest.raises(InvalidParameterError):
        SolverConfig(epsilon=-1.0)
    with pytest.raises(InvalidParameterError):
        SolverConfig(cells=1)
    with pytest.raises(InvalidParameterError):
        SolverConfig(flux_scheme="godunov")


def test_apriori_statistics_vanish_for_zero_data():
    problem = reference_problem(u0="zero")
    trajs = solve_paths(problem, SMALL, [noise_for(problem, SMALL, 1, p) for p in range(3)])
    stats = apriori_statistics(trajs, problem, SMALL)
    assert stats == {"sup_energy": 0.0, "viscous_dissipation": 0.0, "kirchhoff_dissipation": 0.0}
    with pytest.raises(InvalidParameterError):
        apriori_statistics([], problem, SMALL)


def test_apriori_statistics_oracle():
    # deterministic heat: sup energy is the initial energy 1/2 of sin(pi x)
    problem = ProblemSpec(diffusion=linear_diffusion(1.0), u0=PROFILES["sine"], T=0.05)
    config = SolverConfig(epsilon=0.01, cells=200, steps=200)
    traj = solve_path(problem, config, zero_noise(problem, config))
    stats = apriori_statistics([traj], problem, config)
    assert stats["sup_energy"] == pytest.approx(0.5, rel=1e-4)
    # int ||u_x||^2 dt with u = exp(-(1 + eps) pi^2 t) sin(pi x)
    k = (1 + 0.01) * math.pi**2
    grad = math.pi**2 / 2 * (1 - math.exp(-2 * k * 0.05)) / (2 * k)
    assert stats["kirchhoff_dissipation"] == pytest.approx(grad, rel=1e-2)
    assert stats["viscous_dissipation"] == pytest.approx(0.01 * grad, rel=1e-2)


def test_save_every_thins_output():
    problem = reference_problem()
    config = SolverConfig(epsilon=0.01, cells=40, steps=200, save_every=20)
    traj = solve_path(problem, config, noise_for(problem, config))
    full = solve_path(problem, SMALL, noise_for(problem, SMALL))
    assert len(traj.times) == 11 and not traj.full_resolution
    assert np.array_equal(traj.states, full.states[::20])


def test_trajectory_csv():
    problem = ProblemSpec(u0=PROFILES["sine"], T=0.1)
    config = SolverConfig(cells=4, steps=2)
    text = solve_path(problem, config, zero_noise(problem, config)).to_csv()
    lines = text.splitlines()
    assert lines[:2] == ["# levyspde trajectory v1", "t,x,u"]
    assert len(lines) == 2 + 3 * 5


def test_coupled_ensemble_shares_noise():
    problem = reference_problem()
    seen = []

    def collect(results, noises):
        seen.extend((nz.path, a.states[-1], b.states[-1]) for nz, a, b in zip(noises, *results))

    x = SMALL.grid(problem)
    failures = coupled_ensemble(problem, [(SMALL, None), (SMALL, problem.initial_values(x))], 5, 3, collect, chunk=2)
    assert failures == []
    assert [s[0] for s in seen] == [0, 1, 2, 3, 4]
    assert all(np.array_equal(a, b) for _, a, b in seen)


def test_power_diffusion_batch_converges():
    problem = ProblemSpec(flux=burgers_flux(), diffusion=power_diffusion(), u0=PROFILES["step"], T=0.1)
    config = SolverConfig(epsilon=0.0, cells=50, steps=100)
    traj = solve_path(problem, config, zero_noise(problem, config))
    assert np.all(np.isfinite(traj.states))
    assert traj.newton_iterations.max() <= config.newton_maxit

