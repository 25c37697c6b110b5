"""All pairwise interactions of one covariate block, then a relaxed refit.

With Z omitted the design crosses X with itself. The fitted matrix is folded
into one coefficient per pair, and ``relax_refit`` removes the shrinkage on
the selected support.
"""
import numpy as np

from family import AdmmOptions, Dataset, admm_fit, build_design, combine_symmetric, lambda_max
from family.penalty import PenaltySpec
from family.postfit import relax_refit

rng = np.random.default_rng(2)
n, p = 300, 8
X = rng.standard_normal((n, p))
y = 2 * X[:, 0] + X[:, 1] - X[:, 2] + 2 * X[:, 0] * X[:, 1] + rng.standard_normal(n)

design = build_design(Dataset(X, y))
alpha = 0.5
lam = 0.1 * lambda_max(design, y, "l2", alpha)
spec = PenaltySpec.from_alpha("l2", alpha, lam, p)
fit = admm_fit(design, y, spec, AdmmOptions(zero_diagonal=True, eps_pri=1e-6, eps_dual=1e-6))

main, inter = combine_symmetric(fit.B_hat)
main_r, inter_r = combine_symmetric(relax_refit(design, y, fit.support))
print("main effects (penalized):", np.round(main, 3))
print("main effects (relaxed):  ", np.round(main_r, 3))
for j, k in np.argwhere(np.triu(inter != 0, 1)):
    print(f"x{j + 1}:x{k + 1}  penalized {inter[j, k]:+.3f}  relaxed {inter_r[j, k]:+.3f}")
