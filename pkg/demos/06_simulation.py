"""A small replicated simulation with selection metrics.

The full desk-scale table (p=30, 20 replicates) takes several minutes; this
version shrinks the scenario so it runs in well under a minute.
"""
from family.simulate import MethodConfig, Scenario, run_replicates, summarize

scenario = Scenario(n_train=100, n_test=100, n_valid=100, p=10, n_true_main=5, n_true_inter=4, seed=7)
method = MethodConfig(kind="l2", alphas=(0.25, 0.5, 0.75), n_lambda=15)
reports = run_replicates(scenario, method, replicates=3)
for row in summarize(reports):
    print(f"relaxed={row['relaxed']:3s}  relative SSR {row['relative_ssr']:.3f}  "
          f"TPR {row['tpr']:.2f}  FDR {row['fdr']:.2f}  interactions {row['n_interactions']:.1f}")
