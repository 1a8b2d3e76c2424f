"""
A miniature benchmark
=====================

Repeated stratified splits, precision on the top 10% and a paired t-test
between methods. C is held at 1 so training objectives are comparable; a
longer ``c_grid`` turns on internal cross-validation. Point
``ExperimentConfig.dataset_path`` at a LIBSVM file for real data.
"""

import numpy as np

from ttk import Dataset
from ttk.bench import ExperimentConfig, run_experiment

rng = np.random.default_rng(3)
n = 120
y = np.where(rng.random(n) < 0.35, 1.0, -1.0)
# a weak signal on one axis, a strong but misleading cluster on another
X = rng.normal(size=(n, 3))
X[:, 0] += 0.9 * y
X[y < 0, 1] += np.where(rng.random(np.sum(y < 0)) < 0.2, 3.0, 0.0)
data = Dataset.from_arrays(X, y)

config = ExperimentConfig(methods=("svm_threshold", "ttk_fd"), k_fraction=0.1, n_splits=4,
                          c_grid=(1.0,), seed=0)
table = run_experiment(config, data)

for m in config.methods:
    print(f"{m:14s} precision {table.mean(m):.3f} +- {table.sd(m):.3f}   "
          f"train objective {table.objective_mean(m):8.2f}")
for (a, b), r in table.verdicts.items():
    print(f"{a} vs {b}: t = {r.t:.2f}, p = {r.p:.3f} -> {r.verdict}")

print()
print(table.to_csv())
