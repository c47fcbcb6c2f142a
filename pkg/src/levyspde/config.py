"""Plain-text run configuration: ``key = value`` lines, ``#`` comments.

Every key is optional except ``experiment`` and ``seed`` (runs are never
seeded from the clock). Unknown keys and malformed lines are reported with
their line number.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .entropy_calculus import DIFFUSION_FAMILIES, FLUX_FAMILIES, power_diffusion
from .errors import ConfigError, LevySPDEError
from .harness import ToleranceModel
from .noise import SHAPES, AtomicLevyMeasure, JumpCoefficient, StableLikeLevyMeasure, no_jumps
from .reference import PROFILES, bump
from .viscous_solver import BrownianCoefficient, ProblemSpec, SolverConfig

EXPERIMENTS = ("entropy", "contraction", "kato", "convergence", "apriori", "acceptance")
LEVY = ("none", "atomic", "stable")


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


@dataclass
class RunConfig:
    experiment: str = ""
    seed: int = -1
    paths: int = 100
    out: str = "out"
    # problem
    flux: str = "burgers"
    flux_param: float = 4.0
    diffusion: str = "power"
    diffusion_param: float = 2.0
    diffusion_clamp: float = 4.0
    sigma: float = 0.2
    brownian_shape: str = "linear"
    levy: str = "atomic"
    lam_star: float = 0.5
    jump_shape: str = "linear"
    alpha: float = 0.5
    T: float = 0.5
    u0: str = "sine2"
    u02: str = "sine2"
    u02_bump: float = 0.5
    # solver
    epsilon: float = 0.01
    epsilons: tuple = (0.04, 0.02, 0.01, 0.005)
    cells: int = 100
    steps: int = 2000
    save_every: int = 1
    chunk: int = 25
    min_success: float = 0.9
    # entropy check
    xi: float = 0.02
    k_values: tuple = (-0.5, 0.0, 0.7)
    orientation: str = "plus"
    # tolerance model
    tol_a: float = ToleranceModel().a
    tol_b: float = ToleranceModel().b
    tol_c: float = ToleranceModel().c

    def problem(self):
        flux = FLUX_FAMILIES[self.flux](self.flux_param)
        if self.diffusion == "power":
            diffusion = power_diffusion(self.diffusion_param, self.diffusion_clamp)
        else:
            diffusion = DIFFUSION_FAMILIES[self.diffusion](self.diffusion_param)
        levy = {"none": no_jumps, "atomic": AtomicLevyMeasure, "stable": lambda: StableLikeLevyMeasure(self.alpha)}
        return ProblemSpec(
            flux=flux,
            diffusion=diffusion,
            brownian=BrownianCoefficient(self.sigma, self.brownian_shape),
            jump=JumpCoefficient(self.lam_star if self.levy != "none" else 0.0, self.jump_shape),
            levy=levy[self.levy](),
            u0=PROFILES[self.u0],
            T=self.T,
            name=f"{self.flux}-{self.diffusion}-{self.levy}",
        )

    def solver(self, epsilon=None):
        return SolverConfig(
            epsilon=self.epsilon if epsilon is None else epsilon,
            cells=self.cells,
            steps=self.steps,
            save_every=self.save_every,
        )

    def tolerance(self):
        return ToleranceModel(self.tol_a, self.tol_b, self.tol_c)

    def second_datum(self):
        base, amp = PROFILES[self.u02], self.u02_bump
        return lambda x: base(x) - amp * bump(x)


_FIELDS = {f.name: f for f in fields(RunConfig)}
REQUIRED = ("experiment", "seed")
CHOICES = {
    "experiment": EXPERIMENTS,
    "flux": tuple(FLUX_FAMILIES),
    "diffusion": tuple(DIFFUSION_FAMILIES),
    "levy": LEVY,
    "jump_shape": tuple(SHAPES),
    "brownian_shape": ("linear", "sine"),
    "u0": tuple(PROFILES),
    "u02": tuple(PROFILES),
    "orientation": ("plus", "minus"),
}


def _convert(key, raw, lineno):
    kind = type(_FIELDS[key].default)
    try:
        if kind is tuple:
            value = _floats(raw)
            if not value:
                raise ValueError("empty list")
        elif kind is int:
            value = int(raw)
        elif kind is float:
            value = float(raw)
        else:
            value = raw
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: bad value for {key!r}: {raw!r} ({exc})") from None
    if key in CHOICES and value not in CHOICES[key]:
        raise ConfigError(f"line {lineno}: {key} = {raw!r} is not one of {', '.join(CHOICES[key])}")
    return value


def parse_config(text, source="<config>"):
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"{source}: line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}: line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _convert(key, raw, lineno)
        except ConfigError as exc:
            raise ConfigError(f"{source}: {exc}") from None
    missing = [k for k in REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"{source}: missing required keys: {', '.join(missing)}")
    cfg = RunConfig(**values)
    try:
        cfg.problem()
        cfg.solver()
    except LevySPDEError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))


def describe_keys():
    lines = []
    for name, f in _FIELDS.items():
        default = "(required)" if name in REQUIRED else repr(f.default)
        extra = f"  one of: {', '.join(CHOICES[name])}" if name in CHOICES else ""
        lines.append(f"{name} = {default}{extra}")
    return "\n".join(lines)


__all__ = ["RunConfig", "parse_config", "load_config", "describe_keys", "EXPERIMENTS"]
