"""Calibrate the constants (a, b, c) of the tolerance model on the stochastic heat problem.

For u_t = (1 + eps) u_xx + sigma u dW the entropy functional has the closed form

    Lambda = int beta(u(T) - k) psi(T) + eps int int beta'' |u_x|^2 psi - eps int int beta psi_xx,

so Lambda_h minus its discrete evaluation is a pure discretization defect. We
take a from a dx sweep, b from a dt sweep (each times a safety factor 2) and
c from the size of the viscous defect eps int int beta psi_xx. The printed
constants are frozen in levyspde/harness.py.

    python3 scripts/calibrate_tolerance.py [--paths 20] [--seed 11]
"""

import argparse
import math

import numpy as np

from levyspde.entropy_verifier import _edge_mean, _space_weights, edge_curvature, lambda_functional
from levyspde.reference import heat_problem, reference_triples
from levyspde.viscous_solver import SolverConfig, coupled_ensemble

SAFETY = 2.0


def closed_form(traj, triple, eps):
    k, beta, x, t = triple.k, triple.beta, traj.x, traj.times
    w = _space_weights(x)
    U = traj.states[:-1]
    psi, _, _, psi_xx = triple.psi.evaluate(t[:-1], x)
    final = float(np.sum(beta(traj.states[-1] - k) * triple.psi.evaluate(t[-1:], x)[0][0] * w))
    grad2 = (np.diff(U, axis=-1) / traj.dx) ** 2
    visc = eps * traj.dt * traj.dx * float(np.sum(grad2 * edge_curvature(beta, U, k) * _edge_mean(psi)))
    defect = eps * traj.dt * float(np.sum((beta(U - k) * psi_xx) @ w))
    return final + visc - defect, defect


def defects(cells, steps, eps, paths, seed):
    problem = heat_problem()
    config = SolverConfig(epsilon=eps, cells=cells, steps=steps)
    triples = reference_triples()
    errs, visc = [], []

    def reduce(results, noises):
        for traj, nz in zip(results[0], noises):
            for tr in triples:
                lam = lambda_functional(traj, nz, tr, problem)
                ref, d = closed_form(traj, tr, eps)
                errs.append(abs(lam - ref))
                visc.append(abs(d))

    coupled_ensemble(problem, [(config, None)], paths, seed, reduce)
    return max(errs), max(visc)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--eps", type=float, default=0.01)
    args = ap.parse_args()
    T = heat_problem().T

    a_est, c_est = 0.0, 0.0
    print("dx sweep (steps = 8000)")
    for cells in (25, 50, 100):
        e, v = defects(cells, 8000, args.eps, args.paths, args.seed)
        a_est = max(a_est, e * cells)
        c_est = max(c_est, v / args.eps)
        print(f"  cells={cells:4d}  max|defect|={e:.3e}  /dx={e * cells:.3e}")
    b_est = 0.0
    print("dt sweep (cells = 100)")
    for steps in (500, 2000, 8000):
        e, _ = defects(100, steps, args.eps, args.paths, args.seed)
        b_est = max(b_est, e / math.sqrt(T / steps))
        print(f"  steps={steps:5d}  max|defect|={e:.3e}  /sqrt(dt)={e / math.sqrt(T / steps):.3e}")
    print(f"TOL_A = {SAFETY * a_est:.3g}")
    print(f"TOL_B = {SAFETY * b_est:.3g}")
    print(f"TOL_C = {SAFETY * c_est:.3g}")


if __name__ == "__main__":
    main()
