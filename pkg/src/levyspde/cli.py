"""Command line entry point: ``levyspde CONFIG [--seed N] [--paths N] [--out DIR]``.

Exit status is 0 iff every assertion of the experiment passes, 1 if one
fails and 2 for configuration or runtime errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import acceptance
from .config import EXPERIMENTS, describe_keys, load_config
from .entropy_verifier import mc_entropy_check
from .errors import ConfigError, LevySPDEError
from .harness import (
    _csv,
    apriori_experiment,
    contraction_experiment,
    kato_csv,
    kato_ensemble,
    viscosity_convergence,
)
from .reference import PROFILES, reference_triples

EXPERIMENT_HELP = {
    "entropy": "Monte Carlo check of the entropy inequality on admissible triples",
    "contraction": "coupled L1 contraction series for two initial data",
    "kato": "global and local Kato functionals with term breakdown",
    "convergence": "pairwise differences along a decreasing viscosity sequence",
    "apriori": "energy and dissipation statistics across viscosities",
    "acceptance": "the full acceptance suite, including the reproducibility rerun",
}


def _entropy(cfg, out):
    problem, solver, tol = cfg.problem(), cfg.solver(), cfg.tolerance()
    if solver.save_every != 1:
        solver = replace(solver, save_every=1)
    budget = tol.for_config(problem, solver)
    triples = reference_triples(cfg.k_values, cfg.xi, cfg.orientation)
    results = mc_entropy_check(problem, solver, triples, cfg.paths, cfg.seed, cfg.chunk)
    rows, checks = [], []
    for r in results:
        ok = r.mean + r.half_width_95 >= -budget and r.p05 >= -5 * budget
        rows.append((r.label, r.mean, r.half_width_95, r.p05, budget, "pass" if ok else "fail"))
        checks.append((f"entropy {r.label}", ok, f"mean={r.mean:.4g} hw={r.half_width_95:.3g} p05={r.p05:.4g}"))
    (out / "entropy.csv").write_text(
        _csv("entropy check", ["triple", "mean", "half_width", "p05", "tol", "result"], rows)
    )
    return checks


def _contraction(cfg, out):
    problem, solver = cfg.problem(), cfg.solver()
    res = contraction_experiment(
        problem, PROFILES[cfg.u0], cfg.second_datum(), solver, cfg.paths, cfg.seed,
        cfg.tolerance(), cfg.chunk, cfg.min_success,
    )
    (out / "contraction.csv").write_text(res.to_csv())
    checks = [("contraction bound", res.passed, f"max excess {float(res.excess.max()):.3g}")]
    if cfg.u02 == cfg.u0 and cfg.u02_bump == 0:
        checks.append(("identical data gives zero", bool(np.all(res.mean == 0)), ""))
    checks.append(("positive-part split", res.identity_defect == 0.0, f"defect {res.identity_defect:.3g}"))
    return checks


def _kato(cfg, out):
    problem, solver = cfg.problem(), cfg.solver()
    reports, checks = [], []
    for variant, psis in (("local", acceptance.KATO_LOCAL), ("global", acceptance.KATO_GLOBAL)):
        for r in kato_ensemble(
            problem, PROFILES[cfg.u0], cfg.second_datum(), solver, psis, cfg.paths, cfg.seed,
            variant, cfg.tolerance(), cfg.chunk, cfg.min_success,
        ):
            reports.append(r)
            checks.append((f"kato {variant} {r.label}", r.passed, f"total={r.total:.4g} hw={r.half_width:.3g}"))
    (out / "kato.csv").write_text(kato_csv(reports))
    return checks


def _convergence(cfg, out):
    table = viscosity_convergence(
        cfg.problem(), cfg.epsilons, cfg.solver(), cfg.paths, cfg.seed,
        chunk=cfg.chunk, min_success=cfg.min_success,
    )
    (out / "convergence.csv").write_text(table.to_csv())
    return [("differences decrease", table.passed, " ".join(f"{d:.4g}" for d in table.diff_p1))]


def _apriori(cfg, out):
    table = apriori_experiment(
        cfg.problem(), cfg.epsilons, cfg.solver(), cfg.paths, cfg.seed, cfg.chunk, cfg.min_success
    )
    (out / "apriori.csv").write_text(table.to_csv())
    return [("bounded independently of epsilon", table.passed, f"max/min {table.ratio:.4g}")]


def _acceptance(cfg, out):
    log = lambda line: print(line, flush=True)
    results = acceptance.run_suite(out, cfg.seed, log=log)
    results.append(acceptance.reproducibility(out, out / "rerun", cfg.seed))
    log(results[-1].line)
    return [(f"criterion {r.number} {r.name}", r.passed, r.line.split(": ", 1)[1]) for r in results]


RUNNERS = {
    "entropy": _entropy,
    "contraction": _contraction,
    "kato": _kato,
    "convergence": _convergence,
    "apriori": _apriori,
    "acceptance": _acceptance,
}


def build_parser():
    p = argparse.ArgumentParser(prog="levyspde", description="Run a verification experiment from a config file.")
    p.add_argument("config", nargs="?", help="key = value configuration file")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--paths", type=int, help="override the number of Monte Carlo paths")
    p.add_argument("--out", help="output directory (default: the config's 'out' key)")
    p.add_argument("--list-experiments", action="store_true", help="list experiment kinds and exit")
    p.add_argument("--list-keys", action="store_true", help="list configuration keys with defaults and exit")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_experiments:
        for name in EXPERIMENTS:
            print(f"{name:12s} {EXPERIMENT_HELP[name]}")
        return 0
    if args.list_keys:
        print(describe_keys())
        return 0
    if not args.config:
        parser.error("a config file is required")
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"levyspde: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    if args.paths is not None:
        cfg.paths = args.paths
    if args.out is not None:
        cfg.out = args.out
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        checks = RUNNERS[cfg.experiment](cfg, out)
    except LevySPDEError as exc:
        print(f"levyspde: {cfg.experiment} failed: {exc}", file=sys.stderr)
        return 2
    lines = ["# levyspde summary v1", f"experiment = {cfg.experiment}", f"seed = {cfg.seed}", f"paths = {cfg.paths}"]
    for name, ok, detail in checks:
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}".rstrip(": "))
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines[4:]))
    return 0 if all(ok for _, ok, _ in checks) else 1


if __name__ == "__main__":
    sys.exit(main())
