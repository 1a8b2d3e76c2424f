"""Linear classifiers trained for precision among the k top-scored test instances."""

from .dataset import (Dataset, Instance, ParseError, TransductiveProblem, load_libsvm, make_synthetic_figure,
                      parse_libsvm)
from .exact import Certificate, ExactLimits, solve_exact
from .linear_model import LinearModel, adjust_intercept, precision_at_k, scores
from .solver import SolverTrace, TtkOptions, solve_fd, threshold_start, ttk_objective
from .svm import SvmConfig, train_svm

__all__ = [
    "Certificate", "Dataset", "ExactLimits", "Instance", "LinearModel", "ParseError", "SolverTrace",
    "SvmConfig", "TransductiveProblem", "TtkOptions", "adjust_intercept", "load_libsvm", "make_synthetic_figure",
    "parse_libsvm",
    "precision_at_k", "scores", "solve_exact", "solve_fd", "threshold_start", "train_svm", "ttk_objective",
]
