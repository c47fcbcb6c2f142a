import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyspde import viscous_solver
from levyspde.entropy_calculus import EntropyApprox, burgers_flux, linear_diffusion, power_diffusion
from levyspde.entropy_verifier import (
    TERMS,
    AdmissibleTriple,
    CombinedTestFunction,
    TestFunction,
    admissible,
    edge_curvature,
    lambda_functional,
    mc_entropy_check,
)
from levyspde.errors import DivergenceError, GridMismatchError, InvalidParameterError, QuadratureError
from levyspde.noise import NoisePath, make_noise_path
from levyspde.reference import PROFILES, reference_problem
from levyspde.viscous_solver import ProblemSpec, SolverConfig, Trajectory, solve_path, zero_noise

CONFIG = SolverConfig(epsilon=0.01, cells=40, steps=200)
INTERIOR = TestFunction(0.5, 0.3, 0.0, 0.6)
WIDE = TestFunction(0.5, 0.8, 0.0, 0.6)
BETA = EntropyApprox(0.05)


def run(problem, config=CONFIG, seed=1, path=0):
    nz = make_noise_path(problem.levy, problem.T, config.steps, seed, path)
    return solve_path(problem, config, nz), nz


def frozen(problem, u, steps=100):
    """A trajectory that stays at ``u`` for the whole horizon."""
    times = np.linspace(0, problem.T, steps + 1)
    x = np.linspace(*problem.domain, len(u))
    traj = Trajectory(times, x, np.tile(u, (steps + 1, 1)), problem.T / steps, 1, np.zeros(steps, int), [])
    return traj, NoisePath(0, 0, problem.T, steps, np.zeros(steps))


def test_admissible_examples():
    assert admissible(AdmissibleTriple(1.0, WIDE, BETA))
    assert not admissible(AdmissibleTriple(-1.0, WIDE, BETA))
    assert admissible(AdmissibleTriple(-1.0, INTERIOR, BETA))
    # the reflected entropy mirrors the constraint
    minus = EntropyApprox(0.05, "minus")
    assert admissible(AdmissibleTriple(-1.0, WIDE, minus))
    assert not admissible(AdmissibleTriple(1.0, WIDE, minus))


def test_inadmissible_triple_rejected():
    problem = reference_problem()
    traj, nz = run(problem)
    with pytest.raises(InvalidParameterError):
        lambda_functional(traj, nz, AdmissibleTriple(-0.5, WIDE, BETA), problem)


def test_zero_state_with_zero_level_is_exactly_zero():
    problem = reference_problem(u0="zero")
    traj, nz = run(problem)
    total, parts = lambda_functional(traj, nz, AdmissibleTriple(0.0, WIDE, BETA), problem, breakdown=True)
    assert total == 0.0
    assert set(parts) == set(TERMS)


def test_zero_state_below_level_telescopes():
    # psi vanishes at T, so the time terms telescope and the space terms integrate derivatives of psi;
    # what is left is the trapezoid error for those derivatives, which falls off fast with dx
    problem = reference_problem(u0="zero")
    psi = TestFunction(0.5, 0.3, 0.0, problem.T)
    residual = []
    for cells in (40, 160):
        config = SolverConfig(epsilon=0.01, cells=cells, steps=800)
        traj, nz = run(problem, config)
        total, parts = lambda_functional(traj, nz, AdmissibleTriple(-0.5, psi, BETA), problem, breakdown=True)
        assert parts["initial"] > 0.1
        residual.append(abs(total))
    assert residual[1] <= 1e-6
    assert residual[1] < residual[0] / 100


@settings(max_examples=10, deadline=None)
@given(c1=st.floats(0, 3), c2=st.floats(0, 3), k=st.sampled_from([-0.3, 0.0, 0.4]))
def test_linear_in_test_function(c1, c2, k):
    problem = reference_problem()
    traj, nz = run(problem, seed=2)
    psi1, psi2 = INTERIOR, TestFunction(0.35, 0.2, 0.2, 0.3)
    combo = CombinedTestFunction(((c1, psi1), (c2, psi2)))
    lam = lambda psi: lambda_functional(traj, nz, AdmissibleTriple(k, psi, BETA), problem)
    assert lam(combo) == pytest.approx(c1 * lam(psi1) + c2 * lam(psi2), rel=1e-10, abs=1e-12)


def test_noise_free_problem_has_no_noise_terms():
    problem = reference_problem(sigma=0.0, lam_star=0.0)
    traj, nz = run(problem)
    _, parts = lambda_functional(traj, nz, AdmissibleTriple(0.0, WIDE, BETA), problem, breakdown=True)
    for name in ("ito", "ito_correction", "jump_martingale", "jump_compensation"):
        assert parts[name] == 0.0
    assert parts["dissipation"] < 0


@pytest.mark.parametrize("k", [-0.5, 0.0, 0.7])
def test_dissipation_never_positive(k):
    problem = reference_problem()
    traj, nz = run(problem, seed=3)
    _, parts = lambda_functional(traj, nz, AdmissibleTriple(k, INTERIOR, BETA), problem, breakdown=True)
    assert parts["dissipation"] <= 0.0
    assert parts["ito_correction"] >= 0.0


def test_converges_under_xi_refinement():
    problem = ProblemSpec(diffusion=linear_diffusion(1.0), u0=PROFILES["sine2"], T=0.2)
    config = SolverConfig(epsilon=0.0, cells=400, steps=400)
    traj = solve_path(problem, config, zero_noise(problem, config))
    nz = zero_noise(problem, config)
    xis = [0.08, 0.04, 0.02, 0.01]
    vals = [lambda_functional(traj, nz, AdmissibleTriple(0.3, WIDE, EntropyApprox(xi)), problem) for xi in xis]
    steps = np.abs(np.diff(vals))
    assert steps[0] > steps[1] > steps[2]
    assert np.all(steps / xis[:-1] <= steps[0] / xis[0] * 1.5)


def test_test_function_derivatives():
    psi = TestFunction(0.45, 0.3, 0.2, 0.4, amplitude=2.0)
    t = np.array([0.05, 0.2, 0.33])
    x = np.linspace(0.2, 0.7, 11)
    h = 1e-5
    val, pt, px, pxx = psi.evaluate(t, x)
    fd_t = (psi.evaluate(t + h, x)[0] - psi.evaluate(t - h, x)[0]) / (2 * h)
    fd_x = (psi.evaluate(t, x + h)[0] - psi.evaluate(t, x - h)[0]) / (2 * h)
    fd_xx = (psi.evaluate(t, x + h)[2] - psi.evaluate(t, x - h)[2]) / (2 * h)
    assert np.max(np.abs(fd_t - pt)) <= 1e-6 * np.max(np.abs(pt))
    assert np.max(np.abs(fd_x - px)) <= 1e-6 * np.max(np.abs(px))
    assert np.max(np.abs(fd_xx - pxx)) <= 1e-6 * np.max(np.abs(pxx))
    assert np.max(val) == 2.0


def test_test_function_support_and_validation():
    psi = TestFunction(0.5, 0.2, 0.0, 0.3)
    assert psi.x_support == pytest.approx((0.3, 0.7))
    assert psi.interior((0.0, 1.0)) and not WIDE.interior((0.0, 1.0))
    vals = psi.evaluate(np.array([0.0, 0.31]), np.array([0.29, 0.5, 0.71]))[0]
    assert vals[0, 0] == 0 and vals[0, 2] == 0 and vals[1, 1] == 0 and vals[0, 1] == 1.0
    with pytest.raises(InvalidParameterError):
        TestFunction(0.5, 0.0)
    with pytest.raises(InvalidParameterError):
        TestFunction(0.5, 0.2, amplitude=-1.0)


@given(
    U=st.lists(st.floats(-2, 2), min_size=2, max_size=12),
    k=st.floats(-1, 1),
    xi=st.floats(0.01, 0.5),
)
def test_edge_curvature_is_mean_of_beta2(U, k, xi):
    beta = EntropyApprox(xi)
    U = np.array(U)
    curv = edge_curvature(beta, U, k)
    assert np.all(curv >= -1e-12)
    assert np.all(curv <= np.pi / (2 * xi) + 1e-9)
    # the edge average of beta'' along the segment, by fine sampling
    s = np.linspace(0, 1, 4001)[:, None]
    seg = U[:-1] + s * np.diff(U)
    mean = np.trapezoid(beta.d2(seg - k), s[:, 0], axis=0)
    assert np.allclose(curv, mean, atol=2e-3 * np.pi / (2 * xi))


def test_heat_problem_entropy_balance():
    # for u_t = u_xx the dissipation term cancels the rest exactly, so only the O(dt) time error is left;
    # viscosity then adds eps * int int beta'' |u_x|^2 psi >= 0 on top
    problem = ProblemSpec(diffusion=linear_diffusion(1.0), u0=PROFILES["sine2"], T=0.5)
    triple = AdmissibleTriple(0.0, WIDE, BETA)
    vals = {}
    for eps, steps in ((0.0, 500), (0.0, 5000), (0.05, 5000)):
        config = SolverConfig(epsilon=eps, cells=100, steps=steps)
        nz = zero_noise(problem, config)
        vals[eps, steps] = lambda_functional(solve_path(problem, config, nz), nz, triple, problem)
    assert abs(vals[0.0, 5000]) < 1e-3
    assert vals[0.0, 500] / vals[0.0, 5000] == pytest.approx(10, rel=0.1)
    assert vals[0.05, 5000] > 0.005


def test_expansion_shock_violates_entropy_inequality():
    # u_t = (u^2/2)_x: a static jump from 1 down to -1 is not an entropy solution, the reverse one is
    problem = ProblemSpec(flux=burgers_flux(), T=0.5)
    x = np.linspace(0, 1, 201)
    psi = TestFunction(0.5, 0.3, 0.0, 0.5)
    bad, nz = frozen(problem, np.where(x < 0.5, 1.0, -1.0))
    good, _ = frozen(problem, np.where(x < 0.5, -1.0, 1.0))
    triple = AdmissibleTriple(0.0, psi, EntropyApprox(0.01))
    assert lambda_functional(bad, nz, triple, problem) < -0.05
    assert lambda_functional(good, nz, triple, problem) > 0.05


def test_grid_mismatch():
    problem = reference_problem()
    config = SolverConfig(epsilon=0.01, cells=40, steps=200, save_every=2)
    traj, _ = run(problem, config)
    nz = make_noise_path(problem.levy, problem.T, 200, 1)
    with pytest.raises(GridMismatchError):
        lambda_functional(traj, nz, AdmissibleTriple(0.0, WIDE, BETA), problem)


def test_unresolved_flux_rule_raises():
    problem = ProblemSpec(diffusion=power_diffusion(1.5, 2.0), u0=PROFILES["sine2"], T=0.1)
    config = SolverConfig(epsilon=0.01, cells=40, steps=50)
    traj = solve_path(problem, config, zero_noise(problem, config))
    nz = zero_noise(problem, config)
    triple = AdmissibleTriple(0.0, WIDE, EntropyApprox(0.3))
    with pytest.raises(QuadratureError):
        lambda_functional(traj, nz, triple, problem, quad_tol=1e-15)
    assert np.isfinite(lambda_functional(traj, nz, triple, problem, quad_tol=None))


def test_mc_check_zero_data_is_exactly_zero():
    problem = reference_problem(u0="zero")
    res = mc_entropy_check(problem, CONFIG, AdmissibleTriple(0.0, WIDE, BETA, "zero"), 4, 9, chunk=2)
    assert res.mean == 0.0 and res.half_width_95 == 0.0
    assert res.label == "zero" and res.failures == []


def test_mc_check_reference_problem():
    problem = reference_problem()
    triples = [AdmissibleTriple(k, INTERIOR, BETA, f"k={k}") for k in (-0.5, 0.0, 0.7)]
    results = mc_entropy_check(problem, CONFIG, triples, 20, 4)
    assert [r.label for r in results] == ["k=-0.5", "k=0.0", "k=0.7"]
    for r in results:
        assert len(r.values) == 20
        # coarse grid, so only a loose tolerance
        assert r.mean + r.half_width_95 >= -0.02


def test_mc_check_reports_failed_paths(monkeypatch):
    real = viscous_solver.solve_paths

    def flaky(problem, config, noises, u0=None):
        if any(nz.path == 2 for nz in noises):
            raise DivergenceError("injected failure")
        return real(problem, config, noises, u0)

    monkeypatch.setattr(viscous_solver, "solve_paths", flaky)
    problem = reference_problem()
    res = mc_entropy_check(problem, CONFIG, AdmissibleTriple(0.0, INTERIOR, BETA), 4, 1, chunk=4)
    assert len(res.values) == 3
    assert res.failures == [(2, "injected failure")]


def test_mc_check_needs_two_paths():
    with pytest.raises(InvalidParameterError):
        mc_entropy_check(reference_problem(), CONFIG, AdmissibleTriple(0.0, INTERIOR, BETA), 1, 1)
