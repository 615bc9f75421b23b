#!/usr/bin/env python3
"""Cardinality of the exact CONCORD minimizer in the p >> n saturation regime.

At p=40, n=4 and lambda1 = 1e-6 * lambda1_max the CONCORD objective
(lambda2 = 0) has minimizers of norm ~1/lambda1 and condition number ~1e12.
The proximal loop stalls there with a dense iterate, so this script solves
the same convex problem with an interior-point method through cvxpy (an
optional dependency: ``pip install cvxpy``) and compares cardinalities and
objective values with the proximal result.

Interior-point solutions have no exact zeros, so the support is read off the
optimality conditions instead: a pair counts as nonzero when its smooth
gradient satisfies ``|G_ij| >= (1 - kkt_slack) * lambda1``.  The largest
``|G_ij| / lambda1`` is printed too; values well above 1 mean the solver's
answer is itself inaccurate and the count should not be trusted.

The smooth part is written as ``0.5 * ||X Omega||_F^2`` with ``X`` the
centered data, which equals ``(n/2) tr(S Omega^2)``.
"""
import argparse
import warnings

import numpy as np

from pseudonet.screening import lambda1_max
from pseudonet.solver import Problem, objective, smooth_gradient, solve
from pseudonet.symcore import center_columns, sample_covariance
from pseudonet.synthlab import _trial_seed, generate_ground_truth, sample_mvn


def exact_concord(X, lam1):
    import cvxpy as cp

    n, p = X.shape
    W = cp.Variable((p, p), symmetric=True)
    off = 1 - np.eye(p)
    cost = -cp.sum(cp.log(cp.diag(W))) + 0.5 * cp.sum_squares(X @ W) + lam1 * cp.sum(cp.abs(cp.multiply(off, W)))
    cp.Problem(cp.Minimize(cost)).solve(solver=cp.CLARABEL)
    return W.value


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--kkt-slack", type=float, default=1e-3)
    args = ap.parse_args()
    p, n = 40, 4
    for s in range(args.seeds):
        truth = generate_ground_truth(p, 0.05, seed=_trial_seed(8, s))
        Xc = center_columns(sample_mvn(truth.sigma0, n, seed=_trial_seed(8, s, n)))
        S = sample_covariance(Xc)
        lam1 = 1e-6 * lambda1_max(S, n, 0.0)
        prob = Problem(S, n, lam1, 0.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            prox = solve(prob)
        W = exact_concord(Xc.values, lam1)
        W = 0.5 * (W + W.T)
        iu = np.triu_indices(p, 1)
        g = np.abs(smooth_gradient(prob, W)[iu]) / lam1
        nnz_exact = int(np.sum(g >= 1.0 - args.kkt_slack))
        nnz_prox = int(np.count_nonzero(prox.omega[iu]))
        print(f"seed {s}: interior-point nnz {nnz_exact} (bound {n * p}, max |G|/lambda1 {g.max():.3f}), proximal nnz {nnz_prox} "
              f"(converged={prox.converged}); objective interior-point {objective(prob, W):.4f}, proximal {prox.objective_value:.4f}")


if __name__ == "__main__":
    main()
