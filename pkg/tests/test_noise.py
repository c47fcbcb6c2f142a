import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from levyspde.errors import InvalidParameterError
from levyspde.quadrature import DEFAULT_TOL
from levyspde.noise import (
    AtomicLevyMeasure,
    JumpCoefficient,
    NoisePath,
    StableLikeLevyMeasure,
    check_jump_coefficient,
    compensator_drift,
    compensator_rate,
    make_noise_path,
    no_jumps,
    sample_brownian,
    sample_jumps,
    stable_like_delta,
)


def test_brownian_variance():
    dW = sample_brownian(1.0, 20000, seed=3)
    assert np.var(dW) * 20000 == pytest.approx(1.0, rel=0.05)
    assert abs(np.mean(dW)) < 4 * math.sqrt(1 / 20000) / math.sqrt(20000)


def test_brownian_deterministic():
    assert np.array_equal(sample_brownian(1.0, 1, 42), sample_brownian(1.0, 1, 42))
    assert not np.array_equal(sample_brownian(1.0, 10, 42), sample_brownian(1.0, 10, 43))
    assert not np.array_equal(sample_brownian(1.0, 10, 42, path=0), sample_brownian(1.0, 10, 42, path=1))


def test_brownian_rejects_bad_arguments():
    with pytest.raises(InvalidParameterError):
        sample_brownian(0.0, 10, 1)
    with pytest.raises(InvalidParameterError):
        sample_brownian(1.0, 0, 1)


def test_jump_count_mean():
    spec = AtomicLevyMeasure()
    assert spec.total_mass == 2.0
    counts = [len(sample_jumps(spec, 1.0, 7, path=p)) for p in range(2000)]
    assert 1.9 <= np.mean(counts) <= 2.1


def test_jump_marks_and_times():
    spec = StableLikeLevyMeasure(alpha=0.8)
    for p in range(50):
        jumps = sample_jumps(spec, 2.0, 5, path=p)
        taus = [j[0] for j in jumps]
        assert taus == sorted(taus)
        assert all(0 < t <= 2.0 for t in taus)
        assert all(abs(y) > spec.delta and abs(y) <= 1 for _, _, y in jumps)


def test_no_jumps_is_empty():
    assert sample_jumps(no_jumps(), 1.0, 1) == []
    assert make_noise_path(no_jumps(), 1.0, 4, 1).jumps == ()


def test_atomic_truncation_drops_small_atoms():
    spec = AtomicLevyMeasure(atoms=((1.0, 0.5, 1.0), (1.0, 1e-4, 3.0)), delta=1e-3)
    assert spec.total_mass == 1.0
    with pytest.raises(InvalidParameterError):
        AtomicLevyMeasure(delta=0.0)
    with pytest.raises(InvalidParameterError):
        AtomicLevyMeasure(atoms=((1.0, 0.5, -1.0),))


@pytest.mark.parametrize("alpha", [0.5, 1.2])
def test_stable_marks_follow_density(alpha):
    spec = StableLikeLevyMeasure(alpha=alpha)
    o, y = spec.sample_marks(np.random.default_rng(0), 4000)
    assert np.all(o == 1)
    d = spec.delta
    cdf = lambda m: (d**-alpha - np.asarray(m) ** -alpha) / (d**-alpha - 1)
    assert stats.kstest(np.abs(y), cdf).pvalue > 1e-3
    assert abs(np.mean(y > 0) - 0.5) < 0.05


@pytest.mark.parametrize("alpha", [0.5, 1.2])
def test_stable_mass_and_quadrature(alpha):
    spec = StableLikeLevyMeasure(alpha=alpha)
    side = integrate.quad(spec.density, spec.delta, 1.0, limit=200)[0]
    assert spec.total_mass == pytest.approx(2 * side, rel=1e-8)
    _, y, w = spec.nodes()
    assert np.sum(w) == pytest.approx(spec.total_mass, rel=1e-8)
    f = lambda o, yy: min(1.0, abs(yy)) ** 2
    ref = 2 * integrate.quad(lambda yy: yy * yy * spec.density(yy), spec.delta, 1.0)[0]
    assert spec.integrate(f) == pytest.approx(ref, rel=1e-7)
    assert float(np.sum(w * y * y)) == pytest.approx(ref, rel=1e-7)


def test_stable_delta_leaves_small_residual():
    alpha = 0.5
    d = stable_like_delta(alpha, 1e-4)
    full = integrate.quad(lambda y: y * y * y ** (-1 - alpha), 0, 1)[0]
    cut = integrate.quad(lambda y: y * y * y ** (-1 - alpha), 0, d)[0]
    assert cut / full == pytest.approx(1e-4, rel=1e-6)


def test_stable_rejects_bad_parameters():
    with pytest.raises(InvalidParameterError):
        StableLikeLevyMeasure(alpha=2.0)
    with pytest.raises(InvalidParameterError):
        StableLikeLevyMeasure(delta=1.5)


def test_compensator_examples():
    spec = AtomicLevyMeasure()
    coef = JumpCoefficient(0.5)
    assert compensator_drift(coef, spec, 0.0) == 0.0
    assert compensator_drift(JumpCoefficient(0.0), spec, 1.3) == 0.0
    # atoms at y = 0.5 and y = -0.3 with unit weight: g = 0.5 and 0.3
    assert compensator_drift(coef, spec, 2.0) == pytest.approx(0.5 * 0.8 * 2.0, abs=1e-15)
    assert compensator_rate(coef, spec) == pytest.approx(0.4, abs=1e-15)
    with pytest.raises(InvalidParameterError):
        compensator_drift(coef, spec, 1.0, quad_tol=0)


@settings(max_examples=25)
@given(u=st.floats(-3, 3), lam=st.floats(0, 2), shape=st.sampled_from(["linear", "tanh", "positive"]))
def test_compensator_separable(u, lam, shape):
    spec = StableLikeLevyMeasure(alpha=0.7)
    coef = JumpCoefficient(lam, shape)
    expected = compensator_rate(coef, spec) * float(coef.h(u))
    # both sides are adaptive quadratures with absolute tolerance DEFAULT_TOL
    slack = DEFAULT_TOL * (1.0 + lam * abs(float(coef.h(u))))
    assert compensator_drift(coef, spec, u) == pytest.approx(expected, rel=1e-8, abs=slack)


@pytest.mark.parametrize("shape", ["linear", "tanh", "positive"])
@pytest.mark.parametrize("spec", [AtomicLevyMeasure(), StableLikeLevyMeasure(), no_jumps()])
def test_shipped_jump_coefficients_satisfy_assumptions(shape, spec):
    assert check_jump_coefficient(JumpCoefficient(0.7, shape), spec) == 0


def test_check_detects_bad_coefficient():
    bad = JumpCoefficient(1.0, "linear", g=lambda o, y: 2.0 * np.abs(y) + 0.5)
    assert check_jump_coefficient(bad, AtomicLevyMeasure()) > 0


def test_jump_coefficient_validation():
    with pytest.raises(InvalidParameterError):
        JumpCoefficient(-1.0)
    with pytest.raises(InvalidParameterError):
        JumpCoefficient(1.0, "cubic")


def test_noise_path_replay_and_csv_round_trip():
    spec = AtomicLevyMeasure()
    a = make_noise_path(spec, 0.5, 40, seed=9, path=3)
    b = make_noise_path(spec, 0.5, 40, seed=9, path=3)
    assert a == b
    back = NoisePath.from_csv(a.to_csv())
    assert back == a
    assert a.to_csv().startswith("# levyspde noise path v1")
    assert make_noise_path(spec, 0.5, 40, seed=9, path=4) != a


def test_noise_path_is_read_only():
    p = make_noise_path(AtomicLevyMeasure(), 1.0, 8, seed=1)
    with pytest.raises(ValueError):
        p.dW[0] = 1.0


def test_noise_path_validation():
    with pytest.raises(InvalidParameterError):
        NoisePath(0, 0, 1.0, 3, np.zeros(2))
    with pytest.raises(InvalidParameterError):
        NoisePath(0, 0, 1.0, 2, np.zeros(2), jumps=((0.8, 1, 0.5), (0.2, 1, 0.5)))


def test_jumps_by_step_assigns_half_open_intervals():
    p = NoisePath(0, 0, 1.0, 4, np.zeros(4), jumps=((0.25, 1, 0.5), (0.26, 1, -0.3), (1.0, 1, 0.5)))
    steps = p.jumps_by_step()
    assert [len(s) for s in steps] == [1, 1, 0, 1]
    assert sum(len(s) for s in steps) == 3


def test_streams_are_independent_of_path_order():
    spec = AtomicLevyMeasure()
    forward = [make_noise_path(spec, 1.0, 10, 5, p) for p in range(4)]
    backward = [make_noise_path(spec, 1.0, 10, 5, p) for p in reversed(range(4))][::-1]
    assert forward == backward
