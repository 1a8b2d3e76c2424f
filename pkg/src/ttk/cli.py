"""Command-line entry point ``ttk``.

Exit status is 0 on success, 2 for bad arguments or unreadable inputs and 3
when the exact solver refuses a problem size.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import population as pop
from .bench import ExperimentConfig, boundary_stats, run_experiment, write_results
from .dataset import ParseError, TransductiveProblem, format_libsvm, load_libsvm, make_synthetic_figure
from .exact import CapacityError, ExactLimits, solve_exact
from .linear_model import LinearModel, precision_at_k
from .solver import solve_fd, threshold_start, ttk_objective
from .svm import SvmConfig, train_svm

EXIT_ARGS = 2
EXIT_CAPACITY = 3


class UsageError(Exception):
    pass


def _emit(obj) -> None:
    print(json.dumps(obj))


def cmd_synth(args) -> None:
    problem = make_synthetic_figure(args.seed)
    prefix = Path(args.out)
    Path(f"{prefix}.train").write_text(format_libsvm(problem.train))
    Path(f"{prefix}.test").write_text(format_libsvm(problem.test))
    sidecar = {"k": problem.k, "C": problem.C, "seed": args.seed,
               "test_labels": [inst.label for inst in problem.test.instances]}
    Path(f"{prefix}.json").write_text(json.dumps(sidecar) + "\n")
    _emit({"train": f"{prefix}.train", "test": f"{prefix}.test", "k": problem.k})


def cmd_train_svm(args) -> None:
    data = load_libsvm(args.data)
    model, obj = train_svm(data, SvmConfig(C=args.c))
    model.save(args.out)
    _emit({"objective": obj})


def cmd_solve(args) -> None:
    train = load_libsvm(args.train)
    test = load_libsvm(args.test)
    dim = max(train.dim, test.dim)
    problem = TransductiveProblem(train.with_dim(dim), test.with_dim(dim).unlabeled(), args.k, args.c)
    init = threshold_start(problem)
    report = {"init_objective": ttk_objective(init, problem)}
    if test.is_labeled:
        report["init_precision_at_k"] = precision_at_k(init, test.with_dim(dim), args.k)
    if args.method == "fd":
        model, trace = solve_fd(problem, init)
        report.update(terminated_by=trace.terminated_by, swaps=trace.swaps_taken)
        if args.trace:
            Path(args.trace).write_text(trace.to_csv())
    else:
        model, cert = solve_exact(problem, ExactLimits(max_test=args.max_test), hint=init)
        report.update(nodes=cert.nodes_explored, bound_gap=cert.bound_gap)
        if args.cert:
            Path(args.cert).write_text(cert.to_json() + "\n")
    model.save(args.out)
    report["objective"] = ttk_objective(model, problem)
    if test.is_labeled:
        report["precision_at_k"] = precision_at_k(model, test.with_dim(dim), args.k)
    _emit(report)


def cmd_eval(args) -> None:
    model = LinearModel.load(args.model)
    test = load_libsvm(args.test)
    if test.dim > model.dim:
        raise UsageError(f"test data has dimension {test.dim}, model has {model.dim}")
    stats = boundary_stats(model, test.with_dim(model.dim), args.delta)
    out = {"at_boundary": stats.at_boundary, "fraction_positive": stats.fraction_positive}
    if test.is_labeled:
        out["precision_at_k"] = precision_at_k(model, test.with_dim(model.dim), args.k)
    _emit(out)


def _load_mixture(spec: str) -> pop.GaussianMixture:
    named = {"anisotropic": pop.ANISOTROPIC, "turning": pop.TURNING}
    if spec in named:
        return named[spec]
    obj = json.loads(Path(spec).read_text())
    try:
        return pop.GaussianMixture(obj["lambda"], obj["mean_pos"], obj["mean_neg"],
                                   np.array(obj["cov_pos"]), np.array(obj["cov_neg"]))
    except KeyError as exc:
        raise UsageError(f"mixture file lacks key {exc}") from None


def cmd_popdemo(args) -> None:
    mix = _load_mixture(args.mixture)
    report = pop.theorem_demo(mix, args.q1, args.q2, args.grid)
    text = pop.demo_json(report)
    if args.out:
        Path(args.out).write_text(text + "\n")
    if args.curve:
        Path(args.curve).write_text(pop.curve_csv(mix, (args.q1, args.q2), args.grid))
    print(text)


def cmd_bench(args) -> None:
    config = ExperimentConfig.from_json(Path(args.config).read_text())
    if args.data:
        from dataclasses import replace
        config = replace(config, dataset_path=args.data)
    table = run_experiment(config)
    side = write_results(table, args.out)
    _emit({m: {"mean": table.mean(m), "sd": table.sd(m)} for m in config.methods} | {"ttest": str(side)})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ttk", description="Transductive top-k linear classification.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write the two-dimensional k=4 demonstration data")
    p.add_argument("--out", required=True, help="path prefix for .train, .test and .json files")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-svm", help="train a linear SVM")
    p.add_argument("--data", required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_svm)

    p = sub.add_parser("solve", help="solve a transductive top-k problem")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--method", choices=("fd", "exact"), default="fd")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="CSV trace of accepted moves (fd only)")
    p.add_argument("--cert", help="JSON certificate (exact only)")
    p.add_argument("--max-test", type=int, default=ExactLimits.max_test)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="precision@k and boundary statistics of a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--delta", type=float, default=1e-6)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("popdemo", help="optimal directions of a Gaussian mixture at two quantiles")
    p.add_argument("--q1", type=float, required=True)
    p.add_argument("--q2", type=float, required=True)
    p.add_argument("--mixture", default="turning", help="JSON file, or 'anisotropic' / 'turning'")
    p.add_argument("--grid", type=int, default=360)
    p.add_argument("--out")
    p.add_argument("--curve", help="CSV of precision against angle for both quantiles")
    p.set_defaults(func=cmd_popdemo)

    p = sub.add_parser("bench", help="run the split / cross-validation benchmark")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--data", help="override dataset_path from the config")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except CapacityError as exc:
        print(f"ttk: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (UsageError, ParseError, ValueError, OSError) as exc:
        print(f"ttk: {exc}", file=sys.stderr)
        return EXIT_ARGS
    return 0


if __name__ == "__main__":
    sys.exit(main())
