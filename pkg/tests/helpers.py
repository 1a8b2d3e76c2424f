import numpy as np

from ttk.dataset import Dataset, TransductiveProblem


def random_problem(seed, max_dim=3, max_train=10, max_test=8, max_k=4):
    """Small random transductive problem; both classes always appear in train."""
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, max_dim + 1))
    n_train = int(rng.integers(2, max_train + 1))
    n_test = int(rng.integers(2, max_test + 1))
    k = int(rng.integers(1, min(max_k, n_test) + 1))
    X = rng.normal(size=(n_train, d))
    y = np.where(rng.random(n_train) < 0.5, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    test = Dataset.from_arrays(rng.normal(size=(n_test, d)), None, dim=d)
    C = float(rng.choice([0.1, 1.0, 10.0]))
    return TransductiveProblem(Dataset.from_arrays(X, y), test, k, C)


def grid_min(f, lo, hi, n):
    """Minimum of f over an n x n grid on [lo, hi]^2."""
    g = np.linspace(lo, hi, n)
    return min(f(a, b) for a in g for b in g)
