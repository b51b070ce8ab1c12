"""Tuning over the sparsity location, cross-validation, and benchmarking.

The sparsity location ``mu`` is the single tuned hyperparameter: one fit per
grid value (warm-started from the previous grid point), scored by validation
mean squared prediction error, ties broken toward the larger (sparser) value.
The benchmark runner replays the synthetic-data protocol over independent
replicates for each method and aggregates MSPE / false positives / false
negatives / per-tuning-value time into means and standard errors.
"""

from __future__ import annotations

import concurrent.futures
import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import em
from .data import Dataset, ensure_standardized, standardize
from .exceptions import NonConvergenceError
from .graph import SparseGraph
from .simulate import ScenarioSpec, default_split_seed, generate_truth, sample_dataset
from .wlasso import check_kkt

logger = logging.getLogger(__name__)

DEFAULT_MU_GRID = tuple(np.linspace(3.5, 7.5, 20))
NARROW_MU_GRID = tuple(np.linspace(5.5, 6.5, 20))

METHOD_EMSHS = "EMSHS"
METHOD_EMSH = "EMSH"
METHOD_LASSO = "lasso"
ALL_METHODS = (METHOD_EMSHS, METHOD_EMSH, METHOD_LASSO)

# The lasso baseline is the empty-graph estimator with the log-shrinkage
# prior variance collapsed, which pins every penalty at sigma * exp(mu).
LASSO_NU = 1e-6

# Tolerances for accepting a fit into benchmark aggregation.
_VERIFY_KKT_TOL = 1e-6
_ASCENT_SLACK = 1e-8


@dataclass
class MuSummary:
    """Per-grid-point record kept inside a TuningResult."""

    mu: float
    mspe: float
    converged: bool
    iterations: int
    n_selected: int
    wall_time: float


@dataclass
class TuningResult:
    mu_grid: np.ndarray
    per_mu: list[MuSummary]
    best_mu: float
    best_fit: em.FitResult

    @property
    def total_fit_time(self) -> float:
        return float(sum(s.wall_time for s in self.per_mu))


@dataclass
class Metrics:
    mspe: float
    fp: int
    fn: int


def compute_metrics(
    fit_result: em.FitResult, truth_support, test: Dataset
) -> Metrics:
    """Held-out MSPE plus false positive / false negative counts."""
    if test.n == 0:
        raise ValueError("test split is empty")
    yhat = em.predict(fit_result, test.x)
    resid = test.y + test.y_mean - yhat if test.standardized else test.y - yhat
    selected = set(int(j) for j in fit_result.selected)
    truth = set(int(j) for j in truth_support)
    return Metrics(
        mspe=float(np.mean(resid**2)),
        fp=len(selected - truth),
        fn=len(truth - selected),
    )


def _as_warm_state(result: em.FitResult) -> em.EmState:
    return em.EmState(
        beta=result.beta,
        sigma=float(np.sqrt(result.sigma2)),
        alpha=result.alpha,
        omega=result.omega_final,
        q_value=0.0,
        logpost=0.0,
        iteration=0,
    )


def tune_over_mu(
    train: Dataset,
    valid: Dataset,
    g: SparseGraph,
    base: em.Hyperparameters,
    grid: Sequence[float],
    warm_start: bool = False,
) -> TuningResult:
    """One fit per grid value; best by validation MSPE, ties to larger mu.

    By default every grid value starts from the standard initialization
    (zero coefficients, log-penalties at mu).  ``warm_start=True`` chains
    each fit from the previous grid point's state instead; that is faster
    but changes which posterior mode the non-convex objective settles in
    (selected variables keep their weak penalties and survive across the
    whole grid), so it is off for benchmark-grade runs.

    If no fit converges a NonConvergenceError is raised listing the
    per-value status.
    """
    grid = np.sort(np.asarray(list(grid), dtype=np.float64))
    if grid.size == 0:
        raise ValueError("mu grid is empty")
    train_std = ensure_standardized(train)

    per_mu: list[MuSummary] = []
    fits: list[em.FitResult] = []
    warm_state: Optional[em.EmState] = None
    for mu in grid:
        h = replace(base, mu=float(mu))
        result = em.fit(train_std, g, h, init_state=warm_state)
        yhat = em.predict(result, valid.x)
        y_valid = valid.y + valid.y_mean if valid.standardized else valid.y
        mspe = float(np.mean((y_valid - yhat) ** 2))
        per_mu.append(
            MuSummary(
                mu=float(mu),
                mspe=mspe,
                converged=result.converged,
                iterations=result.iterations,
                n_selected=int(result.selected.size),
                wall_time=result.wall_time,
            )
        )
        fits.append(result)
        if warm_start:
            warm_state = _as_warm_state(result)

    if not any(s.converged for s in per_mu):
        status = "; ".join(
            f"mu={s.mu:.4g}: {s.iterations} iters, not converged" for s in per_mu
        )
        raise NonConvergenceError(f"no tuning fit converged ({status})")

    best_index = 0
    for i in range(1, len(per_mu)):
        if per_mu[i].mspe <= per_mu[best_index].mspe:
            best_index = i
    return TuningResult(
        mu_grid=grid,
        per_mu=per_mu,
        best_mu=per_mu[best_index].mu,
        best_fit=fits[best_index],
    )


def cross_validate(
    data: Dataset,
    g: SparseGraph,
    base: em.Hyperparameters,
    grid: Sequence[float],
    k: int,
    seed: int,
    folds: Optional[Sequence[np.ndarray]] = None,
) -> TuningResult:
    """K-fold tuning: plain seeded random partition, refit at the best mu.

    Per-mu score is the average over folds of the held-out MSPE; the final
    fit is on all data at the winning value.  ``folds`` overrides the random
    partition with explicit held-out index arrays (``k`` is then ignored).
    """
    grid = np.sort(np.asarray(list(grid), dtype=np.float64))
    if grid.size == 0:
        raise ValueError("mu grid is empty")
    if folds is None:
        if k < 2:
            raise ValueError("k must be >= 2")
        if data.n < k:
            raise ValueError("need at least k rows")
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(seed, spawn_key=(17,)))
        )
        perm = rng.permutation(data.n)
        folds = np.array_split(perm, k)
    else:
        folds = [np.asarray(f, dtype=np.int64) for f in folds]
        k = len(folds)
        if k < 2:
            raise ValueError("need at least two folds")

    fold_mspe = np.zeros((k, grid.size))
    fold_conv = np.zeros((k, grid.size), dtype=bool)
    for fi, heldout in enumerate(folds):
        mask = np.ones(data.n, dtype=bool)
        mask[heldout] = False
        train_fold = standardize(data.x[mask], data.y[mask])
        x_out = data.x[heldout]
        y_out = data.y[heldout] + data.y_mean if data.standardized else data.y[heldout]
        for gi, mu in enumerate(grid):
            h = replace(base, mu=float(mu))
            result = em.fit(train_fold, g, h)
            yhat = em.predict(result, x_out)
            fold_mspe[fi, gi] = float(np.mean((y_out - yhat) ** 2))
            fold_conv[fi, gi] = result.converged

    if not fold_conv.any():
        raise NonConvergenceError("no cross-validation fit converged")

    cv_mspe = fold_mspe.mean(axis=0)
    best_index = 0
    for i in range(1, grid.size):
        if cv_mspe[i] <= cv_mspe[best_index]:
            best_index = i
    best_mu = float(grid[best_index])

    final = em.fit(
        ensure_standardized(data), g, replace(base, mu=best_mu)
    )
    per_mu = [
        MuSummary(
            mu=float(mu),
            mspe=float(cv_mspe[i]),
            converged=bool(fold_conv[:, i].all()),
            iterations=0,
            n_selected=-1,
            wall_time=0.0,
        )
        for i, mu in enumerate(grid)
    ]
    per_mu[best_index].converged = final.converged
    per_mu[best_index].iterations = final.iterations
    per_mu[best_index].n_selected = int(final.selected.size)
    return TuningResult(
        mu_grid=grid, per_mu=per_mu, best_mu=best_mu, best_fit=final
    )


@dataclass
class MethodSummary:
    mspe_mean: float
    mspe_se: float
    fp_mean: float
    fp_se: float
    fn_mean: float
    fn_se: float
    time_mean: float
    time_se: float


@dataclass
class BenchmarkSummary:
    spec: ScenarioSpec
    methods: dict[str, MethodSummary]
    replicates: int
    failures: int
    failed_replicates: list[int] = field(default_factory=list)


def replicate_scenario_seed(benchmark_seed: int, spec_seed: int, r: int) -> int:
    """Scenario seed used for replicate ``r`` of a benchmark run."""
    ss = np.random.SeedSequence((benchmark_seed, spec_seed), spawn_key=(r,))
    return int(ss.generate_state(1)[0])


def _ascent_ok(trace) -> bool:
    lp = np.array([t[1] for t in trace])
    if lp.size < 2:
        return True
    drops = lp[1:] - lp[:-1]
    slack = _ASCENT_SLACK * (1.0 + np.abs(lp[:-1]))
    return bool(np.all(drops >= -slack))


def _method_setup(
    method: str, truth, base: em.Hyperparameters, p: int
) -> tuple[SparseGraph, em.Hyperparameters]:
    if method == METHOD_EMSHS:
        return truth.working_graph, base
    if method == METHOD_EMSH:
        return SparseGraph.empty(p), base
    if method == METHOD_LASSO:
        return SparseGraph.empty(p), replace(base, nu=LASSO_NU)
    raise ValueError(f"unknown method {method!r}")


def _run_replicate(args) -> dict[str, tuple[float, float, float, float]]:
    spec, methods, grid, base, benchmark_seed, r = args
    scenario_seed = replicate_scenario_seed(benchmark_seed, spec.seed, r)
    spec_r = replace(spec, seed=scenario_seed)
    truth = generate_truth(spec_r)
    splits = sample_dataset(truth, spec_r, default_split_seed(scenario_seed))
    train_std = standardize(splits.train.x, splits.train.y)

    out = {}
    for method in methods:
        g, h = _method_setup(method, truth, base, spec.p)
        tuning = tune_over_mu(train_std, splits.valid, g, h, grid)
        best = tuning.best_fit
        xi_hat = float(np.sqrt(best.sigma2)) * np.exp(best.alpha)
        kkt = check_kkt(train_std, best.beta, xi_hat, tol=_VERIFY_KKT_TOL)
        if not kkt.passed:
            raise NonConvergenceError(
                f"replicate {r}, method {method}: optimality check failed "
                f"(violation {kkt.max_violation:.3e})"
            )
        if not _ascent_ok(best.trace):
            raise NonConvergenceError(
                f"replicate {r}, method {method}: posterior trace not monotone"
            )
        metrics = compute_metrics(best, truth.support, splits.test)
        time_per_mu = tuning.total_fit_time / len(tuning.mu_grid)
        out[method] = (metrics.mspe, float(metrics.fp), float(metrics.fn), time_per_mu)
    return out


def run_benchmark(
    spec: ScenarioSpec,
    methods: Sequence[str],
    replicates: int,
    grid: Sequence[float] = DEFAULT_MU_GRID,
    base: Optional[em.Hyperparameters] = None,
    seed: int = 0,
    workers: int = 1,
) -> BenchmarkSummary:
    """Replicated benchmark: generate, tune, verify, score, aggregate.

    Each replicate generates a fresh truth and three splits, tunes every
    method on train/validation, verifies the chosen fit (first-order
    optimality and posterior ascent), and scores it on the test split.
    Failed replicates are excluded and counted.  Aggregation is an ordered
    reduce over replicate indices, so results do not depend on ``workers``.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    methods = list(methods)
    for mname in methods:
        if mname not in ALL_METHODS:
            raise ValueError(f"unknown method {mname!r}; choose from {ALL_METHODS}")
    if base is None:
        base = em.Hyperparameters()

    tasks = [(spec, methods, tuple(grid), base, seed, r) for r in range(replicates)]
    results: list = [None] * replicates
    if workers <= 1:
        for r, task in enumerate(tasks):
            results[r] = _try_replicate(task)
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            for r, res in enumerate(pool.map(_try_replicate, tasks, chunksize=1)):
                results[r] = res

    failed = [r for r, res in enumerate(results) if isinstance(res, str)]
    for r in failed:
        logger.warning("replicate %d failed: %s", r, results[r])
    good = [res for res in results if not isinstance(res, str)]
    if not good:
        raise NonConvergenceError("all benchmark replicates failed")

    summaries = {}
    for method in methods:
        rows = np.array([res[method] for res in good])
        means = rows.mean(axis=0)
        if rows.shape[0] >= 2:
            ses = rows.std(axis=0, ddof=1) / np.sqrt(rows.shape[0])
        else:
            ses = np.full(4, np.nan)
        summaries[method] = MethodSummary(
            mspe_mean=float(means[0]),
            mspe_se=float(ses[0]),
            fp_mean=float(means[1]),
            fp_se=float(ses[1]),
            fn_mean=float(means[2]),
            fn_se=float(ses[2]),
            time_mean=float(means[3]),
            time_se=float(ses[3]),
        )
    return BenchmarkSummary(
        spec=spec,
        methods=summaries,
        replicates=replicates,
        failures=len(failed),
        failed_replicates=failed,
    )


def _try_replicate(task):
    try:
        return _run_replicate(task)
    except Exception as exc:  # noqa: BLE001 - any failure excludes the replicate
        return f"{type(exc).__name__}: {exc}"


def format_summary_table(summary: BenchmarkSummary, include_time: bool = True) -> str:
    """Aligned text table with one row per method."""
    header = f"{'Method':<8}{'MSPE':>16}{'FP':>16}{'FN':>16}"
    if include_time:
        header += f"{'Time':>12}"
    lines = [header]
    for name, s in summary.methods.items():
        row = (
            f"{name:<8}"
            f"{s.mspe_mean:>8.2f} ({s.mspe_se:.2f})"
            f"{s.fp_mean:>9.2f} ({s.fp_se:.2f})"
            f"{s.fn_mean:>9.2f} ({s.fn_se:.2f})"
        )
        if include_time:
            row += f"{s.time_mean:>12.2f}"
        lines.append(row)
    if summary.failures:
        lines.append(f"failed replicates: {summary.failures}")
    return "\n".join(lines)
