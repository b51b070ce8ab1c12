"""File intake and document construction for the command-line tools.

CSV conventions: comma separated, decimal point, one observation per row; an
optional single header row is auto-detected by a non-numeric first row.
Node ids in edge-list files and indices in JSON documents are 1-based; the
library is 0-based internally.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import em
from .evaluate import BenchmarkSummary, TuningResult
from .exceptions import ConfigError, DataError
from .simulate import ScenarioSpec

_CONFIG_KEYS = {
    "mu",
    "mu_grid",
    "nu",
    "a_omega",
    "b_omega",
    "a_sigma",
    "b_sigma",
    "epsilon_tol",
    "max_iter",
    "newton_inner",
    "dense_newton_threshold",
    "seed",
    "workers",
}


def _is_numeric_row(tokens) -> bool:
    for t in tokens:
        try:
            float(t)
        except ValueError:
            return False
    return True


def read_matrix(path) -> np.ndarray:
    """Load a CSV matrix, skipping a header row if the first row is not numeric."""
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            first = fh.readline()
            if not first.strip():
                raise DataError(f"{path}: empty file")
            skip = 0 if _is_numeric_row(first.strip().split(",")) else 1
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    try:
        arr = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2, dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: malformed CSV ({exc})") from exc
    return arr


def read_vector(path) -> np.ndarray:
    arr = read_matrix(path)
    if arr.shape[1] != 1:
        raise DataError(f"{path}: expected a single column, got {arr.shape[1]}")
    return arr.ravel()


def write_matrix(path, arr) -> None:
    np.savetxt(path, np.asarray(arr), delimiter=",", fmt="%.17g")


def write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: {exc}") from exc


def load_run_config(doc: dict) -> tuple[em.Hyperparameters, dict]:
    """Validate a configuration document and split it into hyperparameters
    plus runner extras (mu_grid, workers)."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    extras = {
        "mu_grid": doc.get("mu_grid"),
        "workers": int(doc.get("workers", 1)),
    }
    kwargs = {k: v for k, v in doc.items() if k not in ("mu_grid", "workers")}
    if extras["mu_grid"] is not None:
        grid = [float(v) for v in extras["mu_grid"]]
        if not grid:
            raise ConfigError("mu_grid must be nonempty")
        extras["mu_grid"] = grid
    if extras["workers"] < 1:
        raise ConfigError("workers must be >= 1")
    try:
        hyper = em.Hyperparameters(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    if hyper.seed < 0:
        raise ConfigError("seed must be >= 0")
    return hyper, extras


def _sparse_pairs(values: np.ndarray) -> list:
    idx = np.flatnonzero(values)
    return [[int(j) + 1, float(values[j])] for j in idx]


def fit_result_to_doc(result: em.FitResult, original_scale: bool = False) -> dict:
    """Fit document: sparse 1-based coefficients plus standardization block."""
    doc = {
        "p": int(result.beta.shape[0]),
        "beta": _sparse_pairs(result.beta),
        "alpha": [float(v) for v in result.alpha],
        "sigma2": float(result.sigma2),
        "selected": [int(j) + 1 for j in result.selected],
        "iterations": int(result.iterations),
        "converged": bool(result.converged),
        "trace": [[float(q), float(lp)] for q, lp in result.trace],
        "wall_time_s": float(result.wall_time),
        "standardization": {
            "column_means": [float(v) for v in result.column_means],
            "column_scales": [float(v) for v in result.column_scales],
            "y_mean": float(result.y_mean),
        },
    }
    if original_scale:
        coef = result.beta / result.column_scales
        doc["beta_original_scale"] = _sparse_pairs(coef)
        doc["intercept"] = float(result.y_mean - result.column_means @ coef)
    return doc


def fit_result_from_doc(doc: dict) -> em.FitResult:
    p = int(doc["p"])
    beta = np.zeros(p)
    for j, v in doc["beta"]:
        if not 1 <= int(j) <= p:
            raise DataError(f"fit document: coefficient index {j} outside 1..{p}")
        beta[int(j) - 1] = float(v)
    std = doc["standardization"]
    return em.FitResult(
        beta=beta,
        alpha=np.asarray(doc["alpha"], dtype=np.float64),
        sigma2=float(doc["sigma2"]),
        selected=np.flatnonzero(beta),
        omega_final=np.empty(0),
        trace=[tuple(t) for t in doc["trace"]],
        iterations=int(doc["iterations"]),
        wall_time=float(doc["wall_time_s"]),
        converged=bool(doc["converged"]),
        column_means=np.asarray(std["column_means"], dtype=np.float64),
        column_scales=np.asarray(std["column_scales"], dtype=np.float64),
        y_mean=float(std["y_mean"]),
    )


def tuning_result_to_doc(tuning: TuningResult, original_scale: bool = False) -> dict:
    return {
        "mu_grid": [float(v) for v in tuning.mu_grid],
        "per_mu": [
            {
                "mu": s.mu,
                "mspe": s.mspe,
                "converged": s.converged,
                "iterations": s.iterations,
                "n_selected": s.n_selected,
            }
            for s in tuning.per_mu
        ],
        "best_mu": float(tuning.best_mu),
        "best_fit": fit_result_to_doc(tuning.best_fit, original_scale=original_scale),
    }


def summary_to_doc(summary: BenchmarkSummary, include_timing: bool = True) -> dict:
    methods = {}
    for name, s in summary.methods.items():

        def stat(mean, se):
            return {"mean": mean, "se": None if np.isnan(se) else se}

        methods[name] = {
            "mspe": stat(s.mspe_mean, s.mspe_se),
            "fp": stat(s.fp_mean, s.fp_se),
            "fn": stat(s.fn_mean, s.fn_se),
            "time_s": stat(s.time_mean, s.time_se) if include_timing else None,
        }
    return {
        "spec": asdict(summary.spec),
        "replicates": int(summary.replicates),
        "failures": int(summary.failures),
        "failed_replicates": [int(r) for r in summary.failed_replicates],
        "methods": methods,
    }


def scenario_from_doc(doc: dict) -> ScenarioSpec:
    if not isinstance(doc, dict):
        raise ConfigError("scenario document must be a JSON object")
    try:
        return ScenarioSpec(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario spec: {exc}") from None


def truth_to_doc(spec: ScenarioSpec, support: np.ndarray) -> dict:
    return {
        "beta0_indices": [int(j) + 1 for j in support],
        "scenario": int(spec.scenario),
        "seed": int(spec.seed),
        "p": int(spec.p),
        "n": int(spec.n),
        "q": int(spec.q),
    }


def edge_list_text(edges: np.ndarray) -> str:
    lines = ["# edge list, 1-based node ids"]
    lines += [f"{int(j) + 1} {int(k) + 1}" for j, k in edges]
    return "\n".join(lines) + "\n"
