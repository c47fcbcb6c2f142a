"""Coupled-noise experiments and their CSV reports.

Every inequality is checked against a pre-registered error budget
``a*dx + b*sqrt(dt) + c*eps`` plus the Monte Carlo 95% half-width. The
constants come from ``scripts/calibrate_tolerance.py`` on the stochastic heat
problem and are frozen here.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .entropy_calculus import kruzhkov_flux, split_positive_part
from .entropy_verifier import TestFunction, _space_weights
from .errors import GridMismatchError, InvalidParameterError, LevySPDEError
from .viscous_solver import ProblemSpec, SolverConfig, apriori_statistics, coupled_ensemble, energy_series

Z95 = 1.96

# frozen output of scripts/calibrate_tolerance.py (see README)
TOL_A = 0.443
TOL_B = 0.169
TOL_C = 0.214


@dataclass(frozen=True)
class ToleranceModel:
    a: float = TOL_A
    b: float = TOL_B
    c: float = TOL_C

    def budget(self, dx, dt, epsilon=0.0):
        return self.a * dx + self.b * math.sqrt(dt) + self.c * epsilon

    def for_config(self, problem: ProblemSpec, config: SolverConfig):
        return self.budget(config.dx(problem), config.dt(problem), config.epsilon)


def half_width(values, axis=0):
    v = np.asarray(values, dtype=float)
    n = v.shape[axis]
    if n < 2:
        return np.full(np.delete(v.shape, axis), math.inf)
    return Z95 * np.std(v, axis=axis, ddof=1) / math.sqrt(n)


def nodal(u0, problem: ProblemSpec, config: SolverConfig):
    """Nodal values of closed-form or array initial data, zero on the boundary."""
    x = config.grid(problem)
    if callable(u0):
        u = np.asarray(u0(x), dtype=float) * np.ones_like(x)
    else:
        u = np.array(u0, dtype=float)
        if u.shape != x.shape:
            raise GridMismatchError(f"initial data has shape {u.shape}, grid has {x.shape}")
    u[0] = u[-1] = 0.0
    return u


def _check_failures(failures, n_paths, min_success):
    ok = n_paths - len(failures)
    if ok < min_success * n_paths:
        raise LevySPDEError(f"only {ok}/{n_paths} paths succeeded; failing paths {[p for p, _ in failures]}")


# --------------------------------------------------------------------------
# contraction


@dataclass
class SeriesResult:
    times: np.ndarray
    mean: np.ndarray
    half_width: np.ndarray
    budget: float
    n_paths: int
    failures: list = field(default_factory=list)
    identity_defect: float = 0.0
    clamps: int = 0

    @property
    def excess(self):
        """mean(t) - mean(0) - budget - half_width(t); nonpositive when the bound holds."""
        return self.mean - self.mean[0] - self.budget - self.half_width

    @property
    def passed(self):
        return bool(np.all(self.excess <= 0.0))

    def to_csv(self):
        rows = zip(self.times, self.mean, self.half_width)
        return _csv("contraction series", ["t", "mean", "half_width"], rows)


def contraction_experiment(
    problem, u01, u02, config, n_paths, seed,
    tolerance=ToleranceModel(), chunk=25, min_success=0.9,
):
    """Monte Carlo series of int (u1 - u2)^+ dx with both runs on the same noise."""
    a = nodal(u01, problem, config)
    b = nodal(u02, problem, config)
    w = _space_weights(config.grid(problem))
    series, defect, clamps = [], [0.0], [0]

    def reduce(results, noises):
        for t1, t2 in zip(*results):
            clamps[0] += t1.clamps + t2.clamps
            d = t1.states - t2.states
            pos = np.maximum(d, 0.0)
            defect[0] = max(defect[0], float(np.max(np.abs(pos - split_positive_part(t1.states, t2.states)))))
            series.append(pos @ w)

    failures = coupled_ensemble(problem, [(config, a), (config, b)], n_paths, seed, reduce, chunk)
    _check_failures(failures, n_paths, min_success)
    series = np.array(series)
    times = np.arange(0, config.steps + 1, config.save_every) * config.dt(problem)
    return SeriesResult(
        times=times,
        mean=series.mean(axis=0),
        half_width=half_width(series),
        budget=tolerance.for_config(problem, config),
        n_paths=len(series),
        failures=failures,
        identity_defect=defect[0],
        clamps=clamps[0],
    )


# --------------------------------------------------------------------------
# Kato functional

KATO_TERMS = ("time", "flux", "diffusion", "initial")


@dataclass
class KatoReport:
    label: str
    variant: str
    terms: dict

    @property
    def total(self):
        return math.fsum(self.terms[t] for t in KATO_TERMS)


def kato_report(u_traj, v_traj, psi: TestFunction, problem: ProblemSpec, variant="global", label=""):
    """Right-hand side of Kato's inequality for the pair of trajectories."""
    if variant not in ("global", "local"):
        raise InvalidParameterError(f"unknown Kato variant {variant!r}")
    if variant == "local" and not psi.interior(problem.domain):
        raise InvalidParameterError("the local variant needs a test function supported inside the domain")
    if not (np.array_equal(u_traj.times, v_traj.times) and np.array_equal(u_traj.x, v_traj.x)):
        raise GridMismatchError("trajectories must share the space-time grid")
    t, x = u_traj.times, u_traj.x
    U, V = u_traj.states, v_traj.states
    w = _space_weights(x)
    p, pt, px, pxx = psi.evaluate(t, x)
    pos = np.maximum(U - V, 0.0)
    Fp = kruzhkov_flux(problem.flux, U, V, "plus")
    Pp = kruzhkov_flux(problem.diffusion, U, V, "plus")

    def integral(f):
        return float(np.trapezoid(f @ w, t))

    terms = {
        "time": integral(pos * pt),
        "flux": -integral(Fp * px),
        "diffusion": integral(Pp * pxx),
        "initial": float((pos[0] * p[0]) @ w),
    }
    return KatoReport(label, variant, terms)


def kato_total_direct(u_traj, v_traj, psi: TestFunction, problem: ProblemSpec):
    """Same right-hand side as ``kato_report`` from one combined integrand (cross-check)."""
    t, x = u_traj.times, u_traj.x
    U, V = u_traj.states, v_traj.states
    p, pt, px, pxx = psi.evaluate(t, x)
    gap = U - V
    F, Phi = problem.flux.F, problem.diffusion.Phi
    on = gap > 0
    integrand = np.where(on, gap * pt - (F(U) - F(V)) * px + (Phi(U) - Phi(V)) * pxx, 0.0)
    w = _space_weights(x)
    return float(np.trapezoid(integrand @ w, t)) + float((np.where(on[0], gap[0], 0.0) * p[0]) @ w)


@dataclass
class KatoEnsemble:
    label: str
    variant: str
    terms: dict
    total_values: np.ndarray
    budget: float

    @property
    def total(self):
        return math.fsum(self.terms[t] for t in KATO_TERMS)

    @property
    def half_width(self):
        return float(half_width(self.total_values))

    @property
    def passed(self):
        return self.total + self.half_width >= -self.budget


def kato_ensemble(
    problem, u01, u02, config, psis, n_paths, seed,
    variant="global", tolerance=ToleranceModel(), chunk=25, min_success=0.9,
):
    """Monte Carlo mean of the Kato right-hand side, one entry per (label, psi)."""
    psis = list(psis)
    a, b = nodal(u01, problem, config), nodal(u02, problem, config)
    reports = {label: [] for label, _ in psis}

    def reduce(results, noises):
        for t1, t2 in zip(*results):
            for label, psi in psis:
                reports[label].append(kato_report(t1, t2, psi, problem, variant, label))

    failures = coupled_ensemble(problem, [(config, a), (config, b)], n_paths, seed, reduce, chunk)
    _check_failures(failures, n_paths, min_success)
    budget = tolerance.for_config(problem, config)
    out = []
    for label, _ in psis:
        reps = reports[label]
        terms = {t: math.fsum(r.terms[t] for r in reps) / len(reps) for t in KATO_TERMS}
        out.append(KatoEnsemble(label, variant, terms, np.array([r.total for r in reps]), budget))
    return out


def kato_csv(reports):
    rows = []
    for r in reports:
        for t in KATO_TERMS:
            rows.append((r.label, r.variant, t, r.terms[t]))
        rows.append((r.label, r.variant, "total", r.total))
    return _csv("kato report", ["test_function", "variant", "term", "value"], rows)


# --------------------------------------------------------------------------
# vanishing viscosity


@dataclass
class ConvergenceTable:
    eps: tuple
    diff_p1: np.ndarray
    diff_p2: np.ndarray
    half_width_p1: np.ndarray
    failures: list = field(default_factory=list)

    @property
    def passed(self):
        return bool(np.all(np.diff(self.diff_p1) < 0))

    def to_csv(self):
        rows = [
            (self.eps[i], self.eps[i + 1], self.diff_p1[i], self.diff_p2[i])
            for i in range(len(self.diff_p1))
        ]
        return _csv("viscosity convergence", ["eps_i", "eps_j", "diff_p1", "diff_p2"], rows)


def viscosity_convergence(
    problem, eps_seq, config, n_paths, seed, window=(0.2, 0.8), chunk=25, min_success=0.9,
):
    """(E int_0^T int_K |u_i - u_{i+1}|^p)^(1/p) for consecutive viscosities, p = 1, 2."""
    eps_seq = tuple(float(e) for e in eps_seq)
    if len(eps_seq) < 3 or any(b >= a for a, b in zip(eps_seq, eps_seq[1:])):
        raise InvalidParameterError("eps_seq must be strictly decreasing with at least 3 entries")
    x = config.grid(problem)
    if not (problem.domain[0] <= window[0] < window[1] <= problem.domain[1]):
        raise InvalidParameterError("window must be a subinterval of the domain")
    w = _space_weights(x) * ((x >= window[0]) & (x <= window[1]))
    runs = [(replace(config, epsilon=e), None) for e in eps_seq]
    samples = [[] for _ in eps_seq[1:]]

    def reduce(results, noises):
        for per_path in zip(*results):
            t = per_path[0].times
            for i in range(len(samples)):
                d = np.abs(per_path[i].states - per_path[i + 1].states)
                samples[i].append((float(np.trapezoid(d @ w, t)), float(np.trapezoid((d**2) @ w, t))))

    failures = coupled_ensemble(problem, runs, n_paths, seed, reduce, chunk)
    _check_failures(failures, n_paths, min_success)
    s = np.array(samples)  # (pairs, paths, 2)
    return ConvergenceTable(
        eps=eps_seq,
        diff_p1=s[..., 0].mean(axis=1),
        diff_p2=np.sqrt(s[..., 1].mean(axis=1)),
        half_width_p1=half_width(s[..., 0], axis=1),
        failures=failures,
    )


# --------------------------------------------------------------------------
# a-priori bounds

APRIORI_KEYS = ("sup_energy", "viscous_dissipation", "kirchhoff_dissipation")


@dataclass
class AprioriTable:
    eps: tuple
    stats: list
    ratio_cap: float = 1.25
    failures: list = field(default_factory=list)

    @property
    def totals(self):
        return np.array([sum(s[k] for k in APRIORI_KEYS) for s in self.stats])

    @property
    def ratio(self):
        t = self.totals
        return float(t.max() / t.min()) if t.min() > 0 else (1.0 if t.max() == 0 else math.inf)

    @property
    def passed(self):
        return self.ratio <= self.ratio_cap

    def to_csv(self):
        rows = [(e, *(s[k] for k in APRIORI_KEYS), t) for e, s, t in zip(self.eps, self.stats, self.totals)]
        return _csv("a-priori bounds", ["epsilon", *APRIORI_KEYS, "total"], rows)


def apriori_experiment(problem, eps_seq, config, n_paths, seed, chunk=25, min_success=0.9, ratio_cap=1.25):
    """The three energy statistics for each viscosity, all on the same noise paths."""
    eps_seq = tuple(float(e) for e in eps_seq)
    runs = [(replace(config, epsilon=e), None) for e in eps_seq]
    # chunk sums keep memory flat; sup_t E||u||^2 needs the summed energy series
    sums = [{"n": 0, "energy": 0.0, "viscous_dissipation": 0.0, "kirchhoff_dissipation": 0.0} for _ in runs]

    def reduce(results, noises):
        for acc, (cfg, _), trajs in zip(sums, runs, results):
            n = len(trajs)
            s = apriori_statistics(trajs, problem, cfg)
            acc["n"] += n
            acc["energy"] = acc["energy"] + np.sum([energy_series(tr) for tr in trajs], axis=0)
            acc["viscous_dissipation"] += n * s["viscous_dissipation"]
            acc["kirchhoff_dissipation"] += n * s["kirchhoff_dissipation"]

    failures = coupled_ensemble(problem, runs, n_paths, seed, reduce, chunk)
    _check_failures(failures, n_paths, min_success)
    stats = [
        {
            "sup_energy": float(np.max(acc["energy"] / acc["n"])),
            "viscous_dissipation": acc["viscous_dissipation"] / acc["n"],
            "kirchhoff_dissipation": acc["kirchhoff_dissipation"] / acc["n"],
        }
        for acc in sums
    ]
    return AprioriTable(eps_seq, stats, ratio_cap, failures)


# --------------------------------------------------------------------------
# CSV


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv(kind, header, rows):
    buf = io.StringIO()
    buf.write(f"# levyspde {kind} v1\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()
