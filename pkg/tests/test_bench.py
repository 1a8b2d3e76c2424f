import csv
import io
import math

import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special, stats

from ttk import bench
from ttk.bench import ExperimentConfig, boundary_stats, paired_t_test
from ttk.dataset import Dataset, make_synthetic_figure
from ttk.exact import solve_exact
from ttk.linear_model import LinearModel, precision_at_k

from helpers import random_problem


def t_oracle(d):
    d = np.asarray(d, dtype=float)
    n = len(d)
    t = d.mean() / (d.std(ddof=1) / math.sqrt(n))
    return t, 2 * stats.t.sf(abs(t), n - 1)


class TestIncompleteBeta:
    @given(st.floats(0.1, 50), st.floats(0.1, 50), st.floats(0, 1))
    @settings(max_examples=200, deadline=None)
    def test_matches_scipy(self, a, b, x):
        assert bench.incomplete_beta(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-12)

    @pytest.mark.parametrize("df", [1, 2, 4, 9, 30])
    def test_t_tail(self, df):
        for t in (0.0, 0.5, 2.0, 4.2426, 10.0):
            assert bench.t_two_sided_p(t, df) == pytest.approx(2 * stats.t.sf(t, df), abs=1e-12)


class TestPairedTTest:
    def test_reference_differences(self):
        r = paired_t_test([1, 2, 3, 4, 5], [0, 0, 0, 0, 0])
        t, p = t_oracle([1, 2, 3, 4, 5])
        assert r.t == pytest.approx(4.2426, abs=1e-4)
        assert r.t == pytest.approx(t, rel=1e-12)
        assert r.df == 4
        assert r.p == pytest.approx(p, abs=1e-12)
        assert r.p == pytest.approx(0.0132, abs=1e-3)
        assert r.verdict == "a_better" and not r.degenerate

    def test_identical(self):
        r = paired_t_test([0.5, 0.7, 0.1], [0.5, 0.7, 0.1])
        assert (r.t, r.p, r.verdict, r.degenerate) == (0.0, 1.0, "tie", False)

    def test_constant_shift_is_degenerate(self):
        r = paired_t_test([1.0, 2.0, 3.0], [0.5, 1.5, 2.5])
        assert r.degenerate and r.p == 0.0 and r.verdict == "a_better" and r.t == math.inf
        r = paired_t_test([0.5, 1.5, 2.5], [1.0, 2.0, 3.0])
        assert r.degenerate and r.verdict == "b_better" and r.t == -math.inf

    def test_insignificant_is_tie(self):
        r = paired_t_test([1, 2, 3, 4], [1.1, 1.8, 3.2, 3.9])
        assert r.p >= 0.05 and r.verdict == "tie"

    @pytest.mark.parametrize("a,b", [([1.0], [2.0]), ([1, 2], [1, 2, 3]), ([], [])])
    def test_bad_lengths(self, a, b):
        with pytest.raises(ValueError):
            paired_t_test(a, b)

    @given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=2, max_size=12))
    @settings(max_examples=100, deadline=None)
    def test_antisymmetry(self, pairs):
        a, b = map(list, zip(*pairs))
        r1, r2 = paired_t_test(a, b), paired_t_test(b, a)
        swap = {"a_better": "b_better", "b_better": "a_better", "tie": "tie"}
        assert r1.t == -r2.t
        assert r1.p == r2.p
        assert r2.verdict == swap[r1.verdict]


class TestBoundaryStats:
    def test_all_zero(self):
        data = Dataset.from_arrays(np.zeros((5, 2)))
        s = boundary_stats(LinearModel(np.zeros(2), 0.0), data, 1e-6)
        assert (s.at_boundary, s.fraction_positive) == (5, 0.0)

    def test_count(self):
        s = boundary_stats(LinearModel(np.array([1.0]), 0.0), np.array([[0.5], [-0.5]]), 0.1)
        assert (s.at_boundary, s.fraction_positive) == (0, 0.5)

    def test_delta_positive(self):
        with pytest.raises(ValueError):
            boundary_stats(LinearModel(np.array([1.0])), np.array([[0.5]]), 0.0)

    def test_exact_solution_selects_k(self):
        for seed in range(10):
            problem = random_problem(seed)
            model, _ = solve_exact(problem)
            s = boundary_stats(model, problem.test, 1e-6)
            assert s.fraction_positive == problem.k / len(problem.test)


class TestConfig:
    def test_defaults(self):
        c = ExperimentConfig()
        assert c.c_grid == (0.01, 0.1, 1.0, 10.0, 100.0)
        assert (c.k_fraction, c.n_splits, c.cv_repeats, c.cv_folds) == (0.05, 10, 5, 2)

    def test_round_trip(self):
        c = ExperimentConfig("x.libsvm", ["ttk_fd"], 0.1, 3, [1, 10], 2, 2, 7)
        assert ExperimentConfig.from_json(c.to_json()) == c

    @pytest.mark.parametrize("kw", [{"k_fraction": 0.0}, {"k_fraction": 1.0}, {"n_splits": 0},
                                    {"c_grid": []}, {"c_grid": [1, -1]}, {"methods": ["svm"]},
                                    {"methods": []}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ExperimentConfig(**kw)

    def test_unknown_key(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_json('{"n_split": 3}')

    @pytest.mark.parametrize("n,frac,k", [(10, 0.05, 1), (30, 0.05, 2), (50, 0.05, 3), (266, 0.05, 13), (1, 0.5, 1)])
    def test_k_for(self, n, frac, k):
        assert bench.k_for(n, frac) == k


def noisy_separable(seed, n_pos=12, n_neg=12):
    """Feature 0 separates the classes; feature 1 is large noise."""
    rng = np.random.default_rng(seed)
    X = np.vstack([np.c_[rng.uniform(1, 2, n_pos), rng.normal(0, 5, n_pos)],
                   np.c_[rng.uniform(-2, -1, n_neg), rng.normal(0, 5, n_neg)]])
    return Dataset.from_arrays(X, np.r_[np.ones(n_pos), -np.ones(n_neg)])


def cv_oracle(train, config, C_values, seed):
    """Mean held-out precision per C with SVMs fit by cvxpy on the same folds."""
    y, X = train.y, train.X
    folds, s = [], seed
    for r in range(config.cv_repeats):
        for _ in range(10):
            f = bench._stratified_folds(y, config.cv_folds, np.random.default_rng([s, r]))
            s += 1
            if bench._usable(y, f):
                break
        folds.extend(f)
    out = []
    for C in C_values:
        total = 0.0
        for held in folds:
            fit = np.setdiff1d(np.arange(len(y)), held)
            w, b = cp.Variable(X.shape[1]), cp.Variable()
            cp.Problem(cp.Minimize(0.5 * cp.sum_squares(w)
                                   + C * cp.sum(cp.pos(1 - cp.multiply(y[fit], X[fit] @ w + b))))).solve()
            k = bench.k_for(len(held), config.k_fraction)
            top = np.argsort(-(X[held] @ w.value))[:k]
            total += np.mean(y[held][top] == 1)
        out.append(total / len(folds))
    return out


class TestCrossValidation:
    def test_singleton_grid(self, monkeypatch):
        monkeypatch.setattr(bench, "fit_method", lambda *a, **k: pytest.fail("trained"))
        cfg = ExperimentConfig(c_grid=[1.0])
        assert bench.cross_validate_C(noisy_separable(0), cfg) == 1.0

    def test_tie_goes_to_smaller(self):
        cfg = ExperimentConfig(c_grid=[10.0, 1.0], k_fraction=0.2, cv_repeats=2)
        assert bench.cross_validate_C(noisy_separable(1), cfg) == 1.0

    def test_separable_vs_noisy(self):
        # tiny C barely moves w off zero and the noise feature dominates the ranking
        rng = np.random.default_rng(3)
        n = 20
        X = np.vstack([np.c_[rng.uniform(0.05, 0.15, n), rng.normal(0, 3, n)],
                       np.c_[rng.uniform(-0.15, -0.05, n), rng.normal(0, 3, n)]])
        train = Dataset.from_arrays(X, np.r_[np.ones(n), -np.ones(n)])
        cfg = ExperimentConfig(c_grid=[0.01, 100.0], k_fraction=0.2, cv_repeats=2, seed=5)
        lo, hi = cv_oracle(train, cfg, [0.01, 100.0], 5)
        assert hi > lo
        assert bench.cross_validate_C(train, cfg, seed=5) == 100.0

    def test_needs_both_classes(self):
        X = np.arange(10, dtype=float).reshape(-1, 1)
        data = Dataset.from_arrays(X, np.r_[np.ones(7), -np.ones(3)])
        with pytest.raises(ValueError):
            bench.cross_validate_C(data, ExperimentConfig(c_grid=[1, 10]))


class TestFitMethod:
    def test_figure_gap(self):
        problem = make_synthetic_figure(0)
        test = problem.test
        svm = bench.fit_method("svm_threshold", problem.train, test, 4, 1.0)
        fd = bench.fit_method("ttk_fd", problem.train, test, 4, 1.0)
        assert precision_at_k(svm.model, test, 4) == 0.5
        assert precision_at_k(fd.model, test, 4) == 1.0
        assert fd.train_objective <= svm.train_objective

    def test_exact_capacity_is_na(self):
        problem = make_synthetic_figure(0)
        run = bench.fit_method("ttk_exact", problem.train, problem.test, 4, 1.0, max_test=25)
        assert run.model is None and run.train_objective is None

    def test_unknown(self):
        problem = make_synthetic_figure(0)
        with pytest.raises(ValueError):
            bench.fit_method("tsvm", problem.train, problem.test, 4, 1.0)


def small_data(seed=0, n=40):
    rng = np.random.default_rng(seed)
    y = np.r_[np.ones(n // 2), -np.ones(n - n // 2)]
    X = rng.normal(size=(n, 2)) + 0.8 * y[:, None]
    return Dataset.from_arrays(X, y)


class TestRunExperiment:
    def test_single_split(self):
        cfg = ExperimentConfig(methods=["svm_threshold"], n_splits=1, c_grid=[1.0], k_fraction=0.2)
        table = bench.run_experiment(cfg, small_data())
        assert len(table.precision["svm_threshold"]) == 1
        assert table.sd("svm_threshold") == 0.0
        assert table.verdicts == {}

    def test_aggregates_and_verdicts(self):
        cfg = ExperimentConfig(methods=["svm_threshold", "ttk_fd"], n_splits=3, c_grid=[0.1, 1.0],
                               k_fraction=0.2, cv_repeats=1)
        table = bench.run_experiment(cfg, small_data(1))
        for m in cfg.methods:
            vals = table.precision[m]
            assert len(vals) == 3
            assert abs(table.mean(m) - np.mean(vals)) <= 1e-12
            assert abs(table.sd(m) - np.std(vals, ddof=1)) <= 1e-12
            assert all(c in cfg.c_grid for c in table.chosen_C[m])
        assert set(table.verdicts) == {("svm_threshold", "ttk_fd")}
        rows = list(csv.reader(io.StringIO(table.to_csv())))
        assert rows[0] == ["method", "split", "C", "precision", "train_objective"]
        assert len(rows) == 1 + 2 * (3 + 2)

    def test_exact_over_capacity_is_na(self):
        cfg = ExperimentConfig(methods=["svm_threshold", "ttk_exact"], n_splits=2, c_grid=[1.0],
                               k_fraction=0.2, max_test=10)
        table = bench.run_experiment(cfg, small_data(2))
        assert table.precision["ttk_exact"] is None and table.mean("ttk_exact") is None
        assert ["ttk_exact", "all", "NA", "NA", "NA"] in list(csv.reader(io.StringIO(table.to_csv())))
        assert table.verdicts == {}

    def test_exact_within_capacity(self):
        cfg = ExperimentConfig(methods=["ttk_fd", "ttk_exact"], n_splits=2, c_grid=[1.0],
                               k_fraction=0.2, max_test=10)
        table = bench.run_experiment(cfg, small_data(3, n=20))
        for a, b in zip(table.train_objective["ttk_exact"], table.train_objective["ttk_fd"]):
            assert a <= b + 1e-9

    def test_deterministic(self, tmp_path):
        cfg = ExperimentConfig(n_splits=2, c_grid=[0.1, 1.0], k_fraction=0.2, cv_repeats=1, seed=11)
        data = small_data(4)
        outs = []
        for i in range(2):
            path = tmp_path / f"r{i}.csv"
            side = bench.write_results(bench.run_experiment(cfg, data), path)
            outs.append((path.read_bytes(), side.read_bytes()))
        assert outs[0] == outs[1]
        assert side.name == "r1.ttest.csv"

    def test_unlabeled_rejected(self):
        with pytest.raises(ValueError):
            bench.run_experiment(ExperimentConfig(), small_data().unlabeled())
