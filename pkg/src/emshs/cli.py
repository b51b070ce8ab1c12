"""Command-line interface: simulate, fit, tune, benchmark, predict, prior-plot.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 solver
non-convergence.  Every error prints a single line
``emshs: <category>: <message>`` to stderr.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import em
from .data import Dataset, standardize
from .evaluate import (
    DEFAULT_MU_GRID,
    NARROW_MU_GRID,
    cross_validate,
    format_summary_table,
    run_benchmark,
    tune_over_mu,
)
from .exceptions import (
    ConfigError,
    DataError,
    GraphInputError,
    NonConvergenceError,
    QuadratureError,
)
from .graph import SparseGraph, load_edge_list
from .io import (
    edge_list_text,
    fit_result_from_doc,
    fit_result_to_doc,
    load_run_config,
    read_json,
    read_matrix,
    read_vector,
    scenario_from_doc,
    summary_to_doc,
    truth_to_doc,
    tuning_result_to_doc,
    write_json,
    write_matrix,
)
from .priors import PriorConfig, marginal_beta_density_mc
from .simulate import generate_truth, sample_dataset

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NONCONVERGENCE = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser that raises instead of calling sys.exit(2)."""

    def error(self, message):
        raise _UsageError(message)


def _fail(category: str, message: str) -> None:
    line = str(message).replace("\n", " ")
    print(f"emshs: {category}: {line}", file=sys.stderr)


def _load_config(path):
    if path is None:
        return em.Hyperparameters(), {"mu_grid": None, "workers": 1}
    return load_run_config(read_json(path))


def _load_xy(x_path, y_path) -> Dataset:
    x = read_matrix(x_path)
    y = read_vector(y_path)
    return Dataset.from_arrays(x, y)


def _load_graph(path, p: int) -> SparseGraph:
    if path is None:
        return SparseGraph.empty(p)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    return load_edge_list(text, p)


def _resolve_grid(args, extras) -> list:
    if getattr(args, "grid", None):
        try:
            lo, hi, count = args.grid.split(":")
            lo, hi, count = float(lo), float(hi), int(count)
        except ValueError:
            raise _UsageError("--grid must be lo:hi:count") from None
        if count < 1:
            raise _UsageError("--grid count must be >= 1")
        return list(np.linspace(lo, hi, count))
    if getattr(args, "grid_preset", None) == "narrow":
        return list(NARROW_MU_GRID)
    if extras.get("mu_grid"):
        return list(extras["mu_grid"])
    return list(DEFAULT_MU_GRID)


def _cmd_simulate(args) -> int:
    spec = scenario_from_doc(read_json(args.spec))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    truth = generate_truth(spec)
    splits = sample_dataset(truth, spec)
    for name, split in (("train", splits.train), ("valid", splits.valid), ("test", splits.test)):
        write_matrix(out / f"X_{name}.csv", split.x)
        write_matrix(out / f"y_{name}.csv", split.y.reshape(-1, 1))
    (out / "graph_working.txt").write_text(
        edge_list_text(truth.working_graph.edges), encoding="utf-8"
    )
    (out / "graph_true.txt").write_text(
        edge_list_text(truth.g0.edges), encoding="utf-8"
    )
    write_json(out / "truth.json", truth_to_doc(spec, truth.support))
    print(f"wrote {out}/X_*.csv, y_*.csv, graph_*.txt, truth.json")
    return EXIT_OK


def _cmd_fit(args) -> int:
    hyper, _ = _load_config(args.config)
    if args.mu is not None:
        hyper = replace(hyper, mu=args.mu)
    raw = _load_xy(args.x, args.y)
    g = _load_graph(args.graph, raw.p)
    data = standardize(raw.x, raw.y)
    result = em.fit(data, g, hyper)
    write_json(args.out, fit_result_to_doc(result, original_scale=args.original_scale))
    if not result.converged:
        _fail(
            "nonconvergence",
            f"EM did not converge in {result.iterations} iterations "
            f"(result written to {args.out})",
        )
        return EXIT_NONCONVERGENCE
    print(f"wrote {args.out} ({result.selected.size} selected, {result.iterations} iterations)")
    return EXIT_OK


def _cmd_tune(args) -> int:
    hyper, extras = _load_config(args.config)
    raw = _load_xy(args.x, args.y)
    g = _load_graph(args.graph, raw.p)
    grid = _resolve_grid(args, extras)
    if args.cv is not None:
        tuning = cross_validate(raw, g, hyper, grid, k=args.cv, seed=hyper.seed)
    else:
        if args.xv is None or args.yv is None:
            raise _UsageError("tune requires --xv/--yv or --cv K")
        valid = _load_xy(args.xv, args.yv)
        if valid.p != raw.p:
            raise DataError(
                f"validation data has {valid.p} columns, training has {raw.p}"
            )
        tuning = tune_over_mu(raw, valid, g, hyper, grid)
    write_json(args.out, tuning_result_to_doc(tuning, original_scale=args.original_scale))
    if args.fit_out:
        write_json(
            args.fit_out,
            fit_result_to_doc(tuning.best_fit, original_scale=args.original_scale),
        )
    print(f"best mu = {tuning.best_mu:.6g}; wrote {args.out}")
    return EXIT_OK


def _cmd_benchmark(args) -> int:
    spec = scenario_from_doc(read_json(args.spec))
    hyper, extras = _load_config(args.config)
    grid = _resolve_grid(args, extras)
    workers = args.workers if args.workers is not None else extras["workers"]
    seed = args.seed if args.seed is not None else hyper.seed
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    summary = run_benchmark(
        spec,
        methods,
        replicates=args.replicates,
        grid=grid,
        base=hyper,
        seed=seed,
        workers=workers,
    )
    write_json(args.out, summary_to_doc(summary, include_timing=not args.omit_timing))
    print(format_summary_table(summary, include_time=not args.omit_timing))
    return EXIT_OK


def _cmd_predict(args) -> int:
    doc = read_json(args.fit)
    try:
        result = fit_result_from_doc(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{args.fit}: not a valid fit document ({exc})") from None
    x_new = read_matrix(args.x)
    try:
        yhat = em.predict(result, x_new)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    write_matrix(args.out, yhat.reshape(-1, 1))
    print(f"wrote {args.out} ({yhat.shape[0]} predictions)")
    return EXIT_OK


def _cmd_prior_plot(args) -> int:
    hyper, _ = _load_config(args.config)
    mu = float(np.asarray(hyper.mu))
    cfg = PriorConfig(mu=mu, nu=hyper.nu, sigma=args.sigma)
    grid = np.linspace(args.grid_min, args.grid_max, args.grid_points)
    density = marginal_beta_density_mc(cfg, grid, args.samples, seed=hyper.seed)
    arr = np.column_stack([grid, density])
    np.savetxt(args.out, arr, delimiter=",", fmt="%.10g", header="b,density", comments="")
    print(f"wrote {args.out} ({grid.size} grid points)")
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="emshs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a synthetic benchmark instance")
    p_sim.add_argument("--spec", required=True, help="scenario spec JSON")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.set_defaults(func=_cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit one model at a fixed mu")
    p_fit.add_argument("--x", required=True, help="predictor CSV (rows = observations)")
    p_fit.add_argument("--y", required=True, help="response CSV (single column)")
    p_fit.add_argument("--graph", help="edge-list file (omit for no graph)")
    p_fit.add_argument("--config", help="run-config JSON")
    p_fit.add_argument("--mu", type=float, help="override the sparsity location")
    p_fit.add_argument("--original-scale", action="store_true")
    p_fit.add_argument("--out", required=True, help="fit JSON output path")
    p_fit.set_defaults(func=_cmd_fit)

    p_tune = sub.add_parser("tune", help="tune mu on validation data or by CV")
    p_tune.add_argument("--x", required=True)
    p_tune.add_argument("--y", required=True)
    p_tune.add_argument("--xv", help="validation predictors CSV")
    p_tune.add_argument("--yv", help="validation response CSV")
    p_tune.add_argument("--cv", type=int, help="fold count for cross-validation")
    p_tune.add_argument("--graph", help="edge-list file (omit for no graph)")
    p_tune.add_argument("--config", help="run-config JSON")
    p_tune.add_argument("--grid", help="mu grid as lo:hi:count")
    p_tune.add_argument(
        "--grid-preset", choices=["broad", "narrow"], default="broad",
        help="broad = 20 values on (3.5, 7.5); narrow = 20 values on (5.5, 6.5)",
    )
    p_tune.add_argument("--original-scale", action="store_true")
    p_tune.add_argument("--out", required=True, help="tuning JSON output path")
    p_tune.add_argument("--fit-out", help="also write the best fit document here")
    p_tune.set_defaults(func=_cmd_tune)

    p_bench = sub.add_parser("benchmark", help="replicated synthetic benchmark")
    p_bench.add_argument("--spec", required=True, help="scenario spec JSON")
    p_bench.add_argument("--replicates", type=int, required=True)
    p_bench.add_argument("--methods", default="EMSHS,EMSH,lasso")
    p_bench.add_argument("--config", help="run-config JSON")
    p_bench.add_argument("--grid", help="mu grid as lo:hi:count")
    p_bench.add_argument("--grid-preset", choices=["broad", "narrow"], default="broad")
    p_bench.add_argument("--seed", type=int, help="benchmark seed (default: config seed)")
    p_bench.add_argument("--workers", type=int, help="parallel replicate workers")
    p_bench.add_argument(
        "--omit-timing", action="store_true",
        help="write null timing fields so repeated runs are byte-identical",
    )
    p_bench.add_argument("--out", required=True, help="summary JSON output path")
    p_bench.set_defaults(func=_cmd_benchmark)

    p_pred = sub.add_parser("predict", help="score new data with a fit document")
    p_pred.add_argument("--fit", required=True, help="fit JSON from `fit` or `tune`")
    p_pred.add_argument("--x", required=True, help="new predictor CSV")
    p_pred.add_argument("--out", required=True, help="prediction CSV output path")
    p_pred.set_defaults(func=_cmd_predict)

    p_prior = sub.add_parser(
        "prior-plot", help="write the Monte Carlo marginal coefficient prior density"
    )
    p_prior.add_argument("--config", help="run-config JSON (mu, nu, seed)")
    p_prior.add_argument("--sigma", type=float, default=1.0)
    p_prior.add_argument("--grid-min", type=float, default=-5.0)
    p_prior.add_argument("--grid-max", type=float, default=5.0)
    p_prior.add_argument("--grid-points", type=int, default=401)
    p_prior.add_argument("--samples", type=int, default=100_000)
    p_prior.add_argument("--out", required=True, help="density CSV output path")
    p_prior.set_defaults(func=_cmd_prior_plot)

    return parser


def dispatch(argv) -> int:
    """Run one subcommand; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        _fail("usage", str(exc))
        return EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        _fail("usage", str(exc))
        return EXIT_USAGE
    except (DataError, GraphInputError, ConfigError) as exc:
        _fail("data", str(exc))
        return EXIT_DATA
    except NonConvergenceError as exc:
        _fail("nonconvergence", str(exc))
        return EXIT_NONCONVERGENCE
    except QuadratureError as exc:
        _fail("numerical", str(exc))
        return EXIT_DATA


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
