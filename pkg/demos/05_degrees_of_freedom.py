"""Unbiased df estimate against the Monte-Carlo covariance definition.

At a handful of lambda values we compare the closed-form estimate,
averaged over response draws, with sum Cov(y_i, yhat_i) / sigma^2.
"""
import numpy as np

from family import AdmmOptions, Dataset, FactorCache, admm_fit, build_design, lambda_max
from family.dof import df_l2, monte_carlo_df
from family.penalty import PenaltySpec

rng = np.random.default_rng(4)
n, p = 100, 6
X = rng.standard_normal((n, p))
design = build_design(Dataset(X, np.zeros(n)))
B = np.zeros(design.shape_B)
B[1:4, 0] = [3.0, -2.0, 1.0]
B[1, 2] = 4.0
mu = design.matrix() @ B.ravel()
sigma = float(np.sqrt(mu.var() / 3))

cache = FactorCache(design)
W = design.matrix()
top = lambda_max(design, mu + sigma * rng.standard_normal(n), "l2", 0.5, cache=cache)
print("  lambda   estimate   Monte Carlo")
for lam in np.geomspace(0.5 * top, 0.02 * top, 4):
    spec = PenaltySpec.from_alpha("l2", 0.5, lam, p)
    estimates = []

    def procedure(y):
        res = admm_fit(design, y, spec, AdmmOptions(eps_pri=1e-6, eps_dual=1e-6), cache=cache)
        estimates.append(df_l2(design, res).df)
        return W @ res.B_hat.ravel()

    mc, se = monte_carlo_df(design, B, sigma, procedure, reps=50, seed=0, return_se=True)
    print(f"  {lam:6.3f}   {np.mean(estimates):8.2f}   {mc:8.2f} +/- {se:.2f}")
