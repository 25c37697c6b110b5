"""Proximal operators of the four row/column penalties.

For each kind we print the prox of one vector at a few levels of lambda and
show that the output vanishes exactly when lambda reaches the dual norm.
"""
import numpy as np

from family.penalty import dual_norm, prox, zero_check

y = np.array([2.0, -1.5, 0.5, 0.25])
print("y =", y)
for kind in ("l1", "l2", "linf", "hybrid"):
    threshold = dual_norm(kind, y)
    print(f"\n{kind}: zero once lambda >= {threshold:.4f}")
    for lam in (0.25 * threshold, 0.75 * threshold, threshold):
        beta = prox(kind, y, lam)
        print(f"  lambda={lam:.4f}  prox={np.round(beta, 4)}  zero_check={zero_check(kind, y, lam)}")

# hybrid: the first entry (the main effect) is shrunk separately from the
# rest (its interactions), so a row can keep its main effect alone
print("\nhybrid keeps the main effect when the interactions are small:")
print(prox("hybrid", np.array([3.0, 0.2, -0.1]), 1.0))
