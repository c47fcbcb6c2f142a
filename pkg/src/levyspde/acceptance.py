"""The acceptance suite: ten criteria, each writing one CSV into the output directory.

``run_suite(out_dir, seed)`` runs criteria 1-9; ``reproducibility`` reruns
them into a second directory and compares the CSV bytes. CSVs hold only
computed quantities (no timings) so reruns are byte-comparable.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .entropy_calculus import (
    DIFFUSION_FAMILIES,
    FLUX_FAMILIES,
    EntropyApprox,
    beta_kernel_limit,
    burgers_flux,
    identity_residuals,
    linear_diffusion,
    pos,
    sign_bracket,
    zero_diffusion,
    zero_flux,
)
from .entropy_verifier import TestFunction, mc_entropy_check
from .harness import (
    ToleranceModel,
    _csv,
    apriori_experiment,
    contraction_experiment,
    kato_csv,
    kato_ensemble,
    kato_report,
    kato_total_direct,
    nodal,
    viscosity_convergence,
)
from .mollify import (
    INTERVAL_CONE,
    SQUARE_CONE,
    GridFunction,
    check_containment,
    kernel_mass,
    mollify_shifted,
)
from .noise import AtomicLevyMeasure, JumpCoefficient, make_noise_path
from .reference import PROFILES, bump, reference_problem, reference_triples
from .viscous_solver import BrownianCoefficient, ProblemSpec, SolverConfig, solve_path, solve_paths, zero_noise

DEFAULT_SEED = 20240607


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    seconds: float
    limit: float | None
    details: dict = field(default_factory=dict)

    @property
    def line(self):
        status = "PASS" if self.passed else "FAIL"
        info = ", ".join(f"{k}={_short(v)}" for k, v in self.details.items())
        return f"criterion {self.number} [{status}] {self.name} ({self.seconds:.1f}s): {info}"


def _short(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.4g}"
    return str(v)


def _finish(number, name, start, limit, ok, details):
    seconds = time.perf_counter() - start
    within = limit is None or seconds < limit
    details = dict(details)
    if not within:
        details["over_time_limit"] = limit
    return CriterionResult(number, name, bool(ok and within), seconds, limit, details)


def _write(out_dir, name, text):
    path = Path(out_dir) / name
    path.write_text(text, encoding="utf-8")
    return path


# --------------------------------------------------------------------------
# 1. identities and entropy bounds


def criterion_identities(out_dir, seed=DEFAULT_SEED):
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    n = 100_000
    a = rng.uniform(-5.0, 5.0, n)
    b = rng.uniform(-5.0, 5.0, n)
    # exact zeros, ties and integer lattice points hit every sign-bracket branch
    a[:1000] = 0.0
    b[1000:2000] = 0.0
    b[2000:3000] = a[2000:3000]
    a[3000:4000] = np.round(a[3000:4000])
    b[3000:4000] = np.round(b[3000:4000])
    worst = {}
    for fname, fam in FLUX_FAMILIES.items():
        for dname, dfam in DIFFUSION_FAMILIES.items():
            for key, r in identity_residuals(fam(), dfam(), a, b).items():
                worst[key] = max(worst.get(key, 0.0), float(np.max(np.abs(r))))
    bounds = {}
    for xi in (0.5, 0.1, 0.02):
        r = np.linspace(-1.0, 1.0, 10_000)
        for orient, target in (("plus", pos(r)), ("minus", pos(-r))):
            beta = EntropyApprox(xi, orient)
            bounds[f"gap xi={xi} {orient}"] = float(np.max(np.abs(beta(r) - target))) / xi
            d2 = beta.d2(r)
            bounds[f"curv xi={xi} {orient}"] = float(np.max(d2)) / (math.pi / (2 * xi))
            bounds[f"curv_min xi={xi} {orient}"] = float(np.min(d2))
    ok_id = max(worst.values()) <= 1e-12
    ok_bd = all(
        (v <= 1.0 + 1e-12) if not k.startswith("curv_min") else (v >= 0.0) for k, v in bounds.items()
    )
    rows = [(k, v) for k, v in worst.items()] + [(k, v) for k, v in bounds.items()]
    _write(out_dir, "c1_identities.csv", _csv("identity residuals", ["quantity", "value"], rows))
    return _finish(1, "entropy-calculus identities", start, 5.0, ok_id and ok_bd,
                   {"max_identity_residual": max(worst.values()), "bounds_ok": ok_bd})


# --------------------------------------------------------------------------
# 2. concentration of beta'' kernels

L_CHOICES = {
    "quadratic": lambda s: 1.0 + s * s,
    "cosine": math.cos,
    "step": lambda s: 1.0 if s < 0.7 else 0.5,
}
AB_PAIRS = ((2.0, 1.0), (0.5, -0.5), (-0.3, -1.2), (1.0, 2.0), (0.2, 0.1))
XI_SEQ = (0.5, 0.1, 0.02, 0.004)


def criterion_kernel_limits(out_dir, seed=DEFAULT_SEED):
    start = time.perf_counter()
    rows, ok, worst_ratio = [], True, 0.0
    for lname, l in L_CHOICES.items():
        for a, b in AB_PAIRS:
            for part in ("i", "ii"):
                vals = beta_kernel_limit(l, a, b, XI_SEQ, part)
                limit = -sign_bracket(a - b) * l(a) if part == "i" else sign_bracket(a - b) * l(b)
                errs = [abs(v - limit) for v in vals]
                for e0, e1 in zip(errs, errs[1:]):
                    if e1 <= 1e-12:
                        continue
                    ratio = e1 / e0 if e0 > 0 else math.inf
                    worst_ratio = max(worst_ratio, ratio)
                    ok &= ratio <= 0.5
                rows.extend((lname, a, b, part, xi, v, limit, e) for xi, v, e in zip(XI_SEQ, vals, errs))
    _write(out_dir, "c2_kernel_limits.csv",
           _csv("kernel limits", ["l", "a", "b", "part", "xi", "value", "limit", "error"], rows))
    return _finish(2, "beta'' kernel limits", start, 10.0, ok, {"worst_error_ratio": worst_ratio})


# --------------------------------------------------------------------------
# 3. mollifier


def criterion_mollifier(out_dir, seed=DEFAULT_SEED):
    start = time.perf_counter()
    rows = []
    mass = {}
    for kappa in (0.1, 0.05, 0.025):
        mass[f"mass 1d kappa={kappa}"] = kernel_mass(kappa, INTERVAL_CONE, 1)
        mass[f"mass 2d kappa={kappa}"] = kernel_mass(kappa, SQUARE_CONE, 2)
    ok_mass = all(abs(v - 1.0) <= 1e-8 for v in mass.values())
    rows += list(mass.items())

    one_1d = GridFunction.sample(lambda x: np.ones_like(x), 0.0, 1.0, 201)
    one_2d = GridFunction.sample(lambda x, y: np.ones_like(x), (0.0, 0.0), (1.0, 1.0), (41, 41))
    const = {
        "constant 1d": float(np.max(np.abs(mollify_shifted(one_1d, 0.1, INTERVAL_CONE).values - 1.0))),
        "constant 2d": float(np.max(np.abs(mollify_shifted(one_2d, 0.1, SQUARE_CONE).values - 1.0))),
    }
    ok_const = all(v <= 1e-8 for v in const.values())
    rows += list(const.items())

    step = GridFunction.sample(lambda x: np.where((x >= 0.3) & (x <= 0.6), 1.0, 0.0), 0.0, 1.0, 2001)
    errs = []
    for kappa in (0.1, 0.05, 0.025):
        e = (mollify_shifted(step, kappa, INTERVAL_CONE) - step).lp_norm(1)
        errs.append(e)
        rows.append((f"step L1 kappa={kappa}", e))
    ok_step = all(e1 < e0 for e0, e1 in zip(errs, errs[1:]))

    check_containment(one_1d, INTERVAL_CONE.kappa_max * 0.99, INTERVAL_CONE)
    check_containment(one_2d, SQUARE_CONE.kappa_max * 0.99, SQUARE_CONE)
    rows.append(("containment", "pass"))
    _write(out_dir, "c3_mollifier.csv", _csv("mollifier checks", ["quantity", "value"], rows))
    return _finish(3, "shifted mollifier", start, 10.0, ok_mass and ok_const and ok_step,
                   {"max_mass_error": max(abs(v - 1) for v in mass.values()),
                    "max_constant_error": max(const.values()), "step_errors": [round(e, 6) for e in errs]})


# --------------------------------------------------------------------------
# 4. solver oracles


def _heat_decay():
    problem = ProblemSpec(flux=zero_flux(), diffusion=linear_diffusion(1.0), u0=PROFILES["sine"], T=0.1)
    eps = 0.01
    cfg = SolverConfig(epsilon=eps, cells=200, steps=20_000, save_every=20_000)
    tr = solve_path(problem, cfg, zero_noise(problem, cfg))
    ratio = np.linalg.norm(tr.states[-1]) / np.linalg.norm(tr.states[0])
    exact = math.exp(-(1 + eps) * math.pi**2 * 0.1)
    return ratio, exact


def _burgers(cells):
    problem = ProblemSpec(flux=burgers_flux(4.0), diffusion=zero_diffusion(), u0=PROFILES["step"], T=0.2)
    cfg = SolverConfig(epsilon=1e-3, cells=cells, steps=cells, save_every=cells)
    return solve_path(problem, cfg, zero_noise(problem, cfg)).states[-1]


def _l1_on_coarse(coarse, fine):
    stride = (len(fine) - 1) // (len(coarse) - 1)
    d = np.abs(coarse - fine[::stride])
    return float(np.trapezoid(d, dx=1.0 / (len(coarse) - 1)))


def _zero_fixed_point(seed):
    worst = 0.0
    for fname, fam in FLUX_FAMILIES.items():
        for dname, dfam in DIFFUSION_FAMILIES.items():
            problem = ProblemSpec(
                flux=fam(), diffusion=dfam(), brownian=BrownianCoefficient(0.5),
                jump=JumpCoefficient(0.5), levy=AtomicLevyMeasure(), u0=PROFILES["zero"], T=0.2,
            )
            cfg = SolverConfig(epsilon=0.01, cells=50, steps=200)
            nz = [make_noise_path(problem.levy, problem.T, cfg.steps, seed, p) for p in range(3)]
            for tr in solve_paths(problem, cfg, nz):
                worst = max(worst, float(np.max(np.abs(tr.states))))
    return worst


def _comparison(seed):
    problem = reference_problem(sigma=0.0, lam_star=0.0)
    cfg = SolverConfig(epsilon=0.01, cells=100, steps=2000)
    x = cfg.grid(problem)
    rng = np.random.default_rng(seed)
    violations, pairs = 0, 20
    for _ in range(pairs):
        u0 = np.clip(np.cumsum(rng.normal(0.0, 0.3, len(x))), -2.0, 2.0)
        v0 = np.clip(u0 + np.abs(rng.normal(0.0, 0.5, len(x))) * (rng.uniform(size=len(x)) < 0.5), -3.0, 3.0)
        nz = zero_noise(problem, cfg)
        a = solve_path(problem, cfg, nz, nodal(u0, problem, cfg))
        b = solve_path(problem, cfg, nz, nodal(v0, problem, cfg))
        violations += int(np.count_nonzero(a.states > b.states))
    return violations, pairs


def criterion_solver(out_dir, seed=DEFAULT_SEED):
    start = time.perf_counter()
    ratio, exact = _heat_decay()
    heat_rel = abs(ratio - exact) / exact
    fine = _burgers(4000)
    c_oracle = 4000 * _l1_on_coarse(_burgers(2000), fine)
    burgers_rows, ok_burgers = [], True
    for n in (100, 200, 400):
        err = _l1_on_coarse(_burgers(n), fine)
        bound = 4 * c_oracle / n
        ok_burgers &= err <= bound
        burgers_rows.append((f"burgers L1 N={n}", err))
        burgers_rows.append((f"burgers bound N={n}", bound))
    zero = _zero_fixed_point(seed)
    violations, pairs = _comparison(seed)
    rows = [("heat ratio", ratio), ("heat exact", exact), ("heat rel error", heat_rel),
            ("burgers oracle C", c_oracle), *burgers_rows,
            ("zero fixed point max", zero), ("comparison violations", violations)]
    _write(out_dir, "c4_solver.csv", _csv("solver oracles", ["quantity", "value"], rows))
    ok = heat_rel <= 0.02 and ok_burgers and zero == 0.0 and violations == 0
    return _finish(4, "solver oracles", start, 120.0, ok,
                   {"heat_rel_error": heat_rel, "burgers_ok": ok_burgers, "zero_max": zero,
                    "comparison_violations": violations, "pairs": pairs})


# --------------------------------------------------------------------------
# 5-9. Monte Carlo experiments on the reference problem


def criterion_apriori(out_dir, seed=DEFAULT_SEED, paths=100):
    start = time.perf_counter()
    problem = reference_problem()
    cfg = SolverConfig(epsilon=0.01, cells=100, steps=5000, save_every=10)
    table = apriori_experiment(problem, (0.02, 0.01, 0.005), cfg, paths, seed + 5, min_success=1.0)
    _write(out_dir, "c5_apriori.csv", table.to_csv())
    return _finish(5, "a-priori bounds", start, 600.0, table.passed and not table.failures,
                   {"max_over_min": table.ratio, "totals": [round(float(t), 6) for t in table.totals]})


def criterion_entropy(out_dir, seed=DEFAULT_SEED, paths=200, tolerance=ToleranceModel()):
    start = time.perf_counter()
    problem = reference_problem()
    cfg = SolverConfig(epsilon=0.01, cells=100, steps=2000)
    tol = tolerance.for_config(problem, cfg)
    results = mc_entropy_check(problem, cfg, reference_triples(xi=0.02), paths, seed + 6)
    rows, ok, worst = [], True, math.inf
    for r in results:
        passed = r.mean + r.half_width_95 >= -tol and r.p05 >= -5 * tol
        ok &= passed
        worst = min(worst, (r.mean + r.half_width_95) / tol)
        rows.append((r.label, r.mean, r.half_width_95, r.p05, tol, "pass" if passed else "fail"))
    failures = results[0].failures
    clamps = results[0].clamps
    _write(out_dir, "c6_entropy.csv",
           _csv("entropy check", ["triple", "mean", "half_width", "p05", "tol", "result"], rows))
    return _finish(6, "entropy inequality", start, 900.0, ok and not failures and clamps == 0,
                   {"tol": tol, "min_(mean+hw)/tol": worst, "failures": len(failures), "clamps": clamps})


def _second_datum(x):
    return PROFILES["sine2"](x) - 0.5 * bump(x)


def criterion_contraction(out_dir, seed=DEFAULT_SEED, paths=200, tolerance=ToleranceModel()):
    start = time.perf_counter()
    problem = reference_problem()
    cfg = SolverConfig(epsilon=0.01, cells=100, steps=2000, save_every=20)
    res = contraction_experiment(problem, PROFILES["sine2"], _second_datum, cfg, paths, seed + 7,
                                 tolerance, min_success=1.0)
    ctrl = contraction_experiment(problem, PROFILES["sine2"], PROFILES["sine2"], cfg, paths, seed + 7,
                                  tolerance, min_success=1.0)
    control_zero = bool(np.all(ctrl.mean == 0.0) and np.all(ctrl.half_width == 0.0))
    _write(out_dir, "c7_contraction.csv", res.to_csv())
    _write(out_dir, "c7_contraction_control.csv", ctrl.to_csv())
    ok = res.passed and control_zero and res.identity_defect == 0.0 and res.clamps == 0
    return _finish(7, "contraction", start, 600.0, ok,
                   {"max_excess": float(res.excess.max()), "start": float(res.mean[0]),
                    "end": float(res.mean[-1]), "control_zero": control_zero,
                    "identity_defect": res.identity_defect})


KATO_LOCAL = (
    ("a", TestFunction(0.5, 0.3, 0.0, 0.6)),
    ("b", TestFunction(0.3, 0.2, 0.25, 0.3)),
    ("c", TestFunction(0.7, 0.15, 0.2, 0.35)),
)
KATO_GLOBAL = (
    ("wa", TestFunction(0.5, 0.75, 0.0, 0.6)),
    ("wb", TestFunction(0.5, 0.6, 0.25, 0.3)),
    ("wc", TestFunction(0.2, 0.5, 0.2, 0.35)),
)
KATO_PAIRS = (
    ("shifted", PROFILES["sine2"], _second_datum),
    ("crossing", lambda x: 0.8 * bump(x, 0.5, 0.3), PROFILES["sine2"]),
)


def criterion_kato(out_dir, seed=DEFAULT_SEED, paths=100, tolerance=ToleranceModel()):
    start = time.perf_counter()
    problem = reference_problem()
    cfg = SolverConfig(epsilon=0.01, cells=100, steps=2000, save_every=5)
    reports, ok, worst = [], True, math.inf
    for pname, u01, u02 in KATO_PAIRS:
        for variant, psis in (("local", KATO_LOCAL), ("global", KATO_GLOBAL)):
            labelled = [(f"{pname}:{label}", psi) for label, psi in psis]
            for r in kato_ensemble(problem, u01, u02, cfg, labelled, paths, seed + 8, variant, tolerance,
                                   min_success=1.0):
                ok &= r.passed
                worst = min(worst, (r.total + r.half_width) / r.budget)
                reports.append(r)
    # breakdown additivity against an independent single-integrand evaluation
    nz = make_noise_path(problem.levy, problem.T, cfg.steps, seed + 8, 0)
    rel = 0.0
    for pname, u01, u02 in KATO_PAIRS:
        u = solve_path(problem, cfg, nz, nodal(u01, problem, cfg))
        v = solve_path(problem, cfg, nz, nodal(u02, problem, cfg))
        for label, psi in KATO_LOCAL + KATO_GLOBAL:
            rep = kato_report(u, v, psi, problem, "global", label)
            direct = kato_total_direct(u, v, psi, problem)
            rel = max(rel, abs(rep.total - direct) / max(abs(direct), 1e-300))
    _write(out_dir, "c8_kato.csv", kato_csv(reports))
    ok_sum = rel <= 1e-10
    return _finish(8, "Kato functional", start, 300.0, ok and ok_sum,
                   {"min_(total+hw)/tol": worst, "breakdown_rel_error": rel})


def criterion_convergence(out_dir, seed=DEFAULT_SEED, paths=100):
    start = time.perf_counter()
    problem = reference_problem()
    cfg = SolverConfig(epsilon=0.01, cells=100, steps=2000, save_every=20)
    table = viscosity_convergence(problem, (0.04, 0.02, 0.01, 0.005), cfg, paths, seed + 9, min_success=1.0)
    _write(out_dir, "c9_convergence.csv", table.to_csv())
    return _finish(9, "viscosity convergence", start, 600.0, table.passed and not table.failures,
                   {"diff_p1": [float(f"{d:.6g}") for d in table.diff_p1]})


CRITERIA = (
    criterion_identities,
    criterion_kernel_limits,
    criterion_mollifier,
    criterion_solver,
    criterion_apriori,
    criterion_entropy,
    criterion_contraction,
    criterion_kato,
    criterion_convergence,
)


def run_suite(out_dir, seed=DEFAULT_SEED, only=None, log=None):
    """Run criteria 1-9 (or the numbers in ``only``) and return their results."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = []
    for i, fn in enumerate(CRITERIA, 1):
        if only is not None and i not in only:
            continue
        res = fn(out_dir, seed)
        if log:
            log(res.line)
        results.append(res)
    return results


def compare_outputs(dir_a, dir_b):
    """Names of CSV files that differ (or exist on one side only) between two runs."""
    a = {p.name: p.read_bytes() for p in Path(dir_a).glob("*.csv")}
    b = {p.name: p.read_bytes() for p in Path(dir_b).glob("*.csv")}
    return sorted(name for name in a.keys() | b.keys() if a.get(name) != b.get(name))


def reproducibility(first_dir, second_dir, seed=DEFAULT_SEED, log=None):
    """Rerun the suite into ``second_dir`` and compare CSV bytes with ``first_dir``."""
    start = time.perf_counter()
    run_suite(second_dir, seed, log=log)
    diff = compare_outputs(first_dir, second_dir)
    n = len(list(Path(first_dir).glob("*.csv")))
    return _finish(10, "reproducibility", start, None, not diff and n > 0,
                   {"csv_files": n, "differing": diff or "none"})
