"""Brownian increments, truncated Poisson random measures and jump coefficients.

Marks live in E = O x R*; a mark is the pair ``(o, y)`` with ``o`` in the mark
set O and ``y`` the jump-size coordinate. Only marks with ``|y| > delta`` are
simulated (compound-Poisson truncation).

Random streams are derived from ``SeedSequence(seed, spawn_key=(path, tag))``
feeding a counter-based Philox generator, so every (seed, path, stream) triple
is independent and reproducible whatever order paths are produced in.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidParameterError
from .quadrature import DEFAULT_TOL, adaptive_simpson, gauss_legendre

BROWNIAN, JUMPS = 0, 1


def stream(seed, path, tag):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(path), int(tag)))
    return np.random.Generator(np.random.Philox(ss))


# --------------------------------------------------------------------------
# Levy measures


@dataclass(frozen=True)
class AtomicLevyMeasure:
    """m = sum_k w_k delta_{(o_k, y_k)}: finitely many weighted marks."""

    atoms: tuple = ((1.0, 0.5, 1.0), (1.0, -0.3, 1.0))
    delta: float = 1e-3

    def __post_init__(self):
        if self.delta <= 0:
            raise InvalidParameterError("truncation radius delta must be positive")
        if any(w < 0 for _, _, w in self.atoms):
            raise InvalidParameterError("atom weights must be nonnegative")

    def nodes(self):
        """(o, y, weight) arrays of the truncated measure."""
        arr = np.array([a for a in self.atoms if abs(a[1]) > self.delta and a[2] > 0], dtype=float)
        if arr.size == 0:
            return np.zeros(0), np.zeros(0), np.zeros(0)
        return arr[:, 0], arr[:, 1], arr[:, 2]

    @property
    def total_mass(self):
        return float(np.sum(self.nodes()[2]))

    def sample_marks(self, rng, n):
        o, y, w = self.nodes()
        idx = rng.choice(len(w), size=n, p=w / w.sum())
        return o[idx], y[idx]

    def integrate(self, f, quad_tol=DEFAULT_TOL):
        o, y, w = self.nodes()
        return float(sum(wk * f(ok, yk) for ok, yk, wk in zip(o, y, w)))


def stable_like_delta(alpha, residual=1e-4):
    """Truncation radius leaving a ``residual`` fraction of int min(1,|y|)^2 dlambda."""
    return residual ** (1.0 / (2.0 - alpha))


@dataclass(frozen=True)
class StableLikeLevyMeasure:
    """lambda(dy) = scale |y|^(-1-alpha) dy on delta < |y| <= 1, O = {1} with mass ``mark_mass``."""

    alpha: float = 0.5
    scale: float = 0.05
    delta: float | None = None
    mark_mass: float = 1.0
    nodes_per_side: int = 32

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise InvalidParameterError("alpha must lie in (0, 2)")
        if self.delta is None:
            object.__setattr__(self, "delta", stable_like_delta(self.alpha))
        if not 0 < self.delta < 1:
            raise InvalidParameterError("delta must lie in (0, 1)")

    def density(self, y):
        a = np.abs(np.asarray(y, dtype=float))
        inside = (a > self.delta) & (a <= 1.0)
        return np.where(inside, self.scale * self.mark_mass * np.where(inside, a, 1.0) ** (-1.0 - self.alpha), 0.0)

    @property
    def total_mass(self):
        al = self.alpha
        return 2.0 * self.scale * self.mark_mass * (self.delta ** (-al) - 1.0) / al

    def nodes(self):
        # y = exp(s) turns the power-law density into a smooth integrand in s
        x, w = gauss_legendre(self.nodes_per_side)
        s0 = math.log(self.delta)
        s = s0 + (0.0 - s0) * x
        y = np.exp(s)
        wy = (0.0 - s0) * w * self.scale * self.mark_mass * np.exp(-self.alpha * s)
        yy = np.concatenate([-y[::-1], y])
        ww = np.concatenate([wy[::-1], wy])
        return np.ones_like(yy), yy, ww

    def sample_marks(self, rng, n):
        al, d = self.alpha, self.delta
        u = rng.uniform(size=n)
        mag = (d ** (-al) - u * (d ** (-al) - 1.0)) ** (-1.0 / al)
        sgn = np.where(rng.uniform(size=n) < 0.5, -1.0, 1.0)
        return np.ones(n), sgn * mag

    def integrate(self, f, quad_tol=DEFAULT_TOL):
        s0 = math.log(self.delta)
        c = self.scale * self.mark_mass

        def side(sign):
            g = lambda s: float(f(1.0, sign * math.exp(s))) * c * math.exp(-self.alpha * s)
            return adaptive_simpson(g, s0, 0.0, quad_tol / 2)

        return side(1.0) + side(-1.0)


LevyMeasureSpec = AtomicLevyMeasure | StableLikeLevyMeasure


def no_jumps():
    return AtomicLevyMeasure(atoms=())


# --------------------------------------------------------------------------
# jump coefficients


def mark_weight(o, y):
    """Default g(z) = min(1, |y|)."""
    return np.minimum(1.0, np.abs(y))


@dataclass(frozen=True)
class JumpCoefficient:
    """nu(u; z) = lam_star * g(z) * h(u) with h nondecreasing, 1-Lipschitz, h(0) = 0."""

    lam_star: float = 0.0
    shape: str = "linear"
    g: Callable = mark_weight

    def __post_init__(self):
        if self.lam_star < 0:
            raise InvalidParameterError("lam_star must be nonnegative")
        if self.shape not in SHAPES:
            raise InvalidParameterError(f"unknown jump shape {self.shape!r}")

    def h(self, u):
        return SHAPES[self.shape](np.asarray(u, dtype=float))

    def __call__(self, u, o, y):
        return self.lam_star * self.g(o, y) * self.h(u)


SHAPES = {
    "linear": lambda u: u,
    "tanh": np.tanh,
    "positive": lambda u: np.maximum(u, 0.0),
}


def compensator_drift(coef: JumpCoefficient, spec, u, quad_tol=DEFAULT_TOL):
    """int nu(u; z) m(dz) over the truncated mark space."""
    if quad_tol <= 0:
        raise InvalidParameterError("quad_tol must be positive")
    if coef.lam_star == 0 or u == 0:
        return 0.0
    return spec.integrate(lambda o, y: coef(u, o, y), quad_tol)


def compensator_rate(coef: JumpCoefficient, spec, quad_tol=DEFAULT_TOL):
    """lam_star * int g dm; compensator_drift(u) = rate * h(u) by separability."""
    if coef.lam_star == 0:
        return 0.0
    return coef.lam_star * spec.integrate(lambda o, y: float(coef.g(o, y)), quad_tol)


def check_jump_coefficient(coef: JumpCoefficient, spec, samples=2000, seed=12345):
    """Randomized check of nu(0;z)=0, monotonicity and the Lipschitz bound.

    Returns the number of violations; raises nothing.
    """
    rng = np.random.default_rng(seed)
    n = samples
    u = rng.uniform(-5, 5, n)
    v = rng.uniform(-5, 5, n)
    if spec.total_mass > 0:
        o, y = spec.sample_marks(rng, n)
    else:
        o, y = np.ones(n), rng.uniform(-1, 1, n)
    g = coef.g(o, y)
    nu_u, nu_v = coef(u, o, y), coef(v, o, y)
    bad = np.abs(coef(np.zeros(n), o, y)) > 0
    bad |= (g < 0) | (g > 1)
    bad |= np.abs(nu_u - nu_v) > coef.lam_star * np.abs(u - v) * g * (1 + 1e-12) + 1e-15
    bad |= (u - v) * (nu_u - nu_v) < -1e-15
    return int(np.count_nonzero(bad))


# --------------------------------------------------------------------------
# sampling


def sample_brownian(T, steps, seed, path=0):
    """i.i.d. N(0, T/steps) increments."""
    if T <= 0 or steps < 1:
        raise InvalidParameterError("need T > 0 and steps >= 1")
    rng = stream(seed, path, BROWNIAN)
    return rng.standard_normal(int(steps)) * math.sqrt(T / steps)


def sample_jumps(spec, T, seed, path=0):
    """Jump list [(tau, o, y), ...] sorted by time, tau in (0, T]."""
    if T <= 0:
        raise InvalidParameterError("need T > 0")
    mass = spec.total_mass
    if mass == 0:
        return []
    rng = stream(seed, path, JUMPS)
    n = int(rng.poisson(mass * T))
    if n == 0:
        return []
    tau = np.sort(T - rng.uniform(0.0, T, size=n))
    o, y = spec.sample_marks(rng, n)
    return [(float(t), float(a), float(b)) for t, a, b in zip(tau, o, y)]


@dataclass(frozen=True, eq=False)
class NoisePath:
    seed: int
    path: int
    T: float
    steps: int
    dW: np.ndarray
    jumps: tuple = ()

    def __post_init__(self):
        dW = np.array(self.dW, dtype=float)
        dW.setflags(write=False)
        object.__setattr__(self, "dW", dW)
        object.__setattr__(self, "jumps", tuple(tuple(map(float, j)) for j in self.jumps))
        if len(dW) != self.steps:
            raise InvalidParameterError("need one Brownian increment per step")
        taus = [j[0] for j in self.jumps]
        if taus != sorted(taus):
            raise InvalidParameterError("jumps must be sorted by time")

    @property
    def dt(self):
        return self.T / self.steps

    @property
    def times(self):
        return np.linspace(0.0, self.T, self.steps + 1)

    def jumps_by_step(self):
        """List of per-step jump lists; step n covers (t_n, t_{n+1}]."""
        out = [[] for _ in range(self.steps)]
        if self.jumps:
            taus = np.array([j[0] for j in self.jumps])
            idx = np.searchsorted(self.times, taus, side="left") - 1
            for n, j in zip(np.clip(idx, 0, self.steps - 1), self.jumps):
                out[n].append(j)
        return out

    def __eq__(self, other):
        if not isinstance(other, NoisePath):
            return NotImplemented
        return (
            (self.seed, self.path, self.T, self.steps) == (other.seed, other.path, other.T, other.steps)
            and np.array_equal(self.dW, other.dW)
            and self.jumps == other.jumps
        )

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        buf.write("# levyspde noise path v1\n# section: header\n")
        w.writerow(["key", "value"])
        for k in ("seed", "path", "T", "steps"):
            w.writerow([k, repr(getattr(self, k))])
        buf.write("# section: increments\n")
        w.writerow(["n", "dW"])
        for n, x in enumerate(self.dW):
            w.writerow([n, repr(float(x))])
        buf.write("# section: jumps\n")
        w.writerow(["tau", "o", "y"])
        for j in self.jumps:
            w.writerow([repr(v) for v in j])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        sections = {}
        current = None
        for line in text.splitlines():
            if line.startswith("# section:"):
                current = line.split(":", 1)[1].strip()
                sections[current] = []
            elif line.startswith("#") or not line.strip():
                continue
            else:
                sections[current].append(line)
        header = dict(r for r in csv.reader(sections["header"][1:]))
        inc = [float(r[1]) for r in csv.reader(sections["increments"][1:])]
        jumps = [tuple(map(float, r)) for r in csv.reader(sections["jumps"][1:])]
        return cls(
            seed=int(header["seed"]),
            path=int(header["path"]),
            T=float(header["T"]),
            steps=int(header["steps"]),
            dW=np.array(inc),
            jumps=tuple(jumps),
        )


def make_noise_path(spec, T, steps, seed, path=0):
    return NoisePath(
        seed=int(seed),
        path=int(path),
        T=float(T),
        steps=int(steps),
        dW=sample_brownian(T, steps, seed, path),
        jumps=tuple(sample_jumps(spec, T, seed, path)),
    )
