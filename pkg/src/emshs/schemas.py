"""JSON schemas for every document the command-line tools read or write."""

_number = {"type": "number"}
_number_array = {"type": "array", "items": {"type": "number"}}
_positive = {"type": "number", "exclusiveMinimum": 0}

# Keys accepted in a run-configuration document.  Unknown keys are rejected.
CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "mu": _number,
        "mu_grid": {"type": "array", "items": _number, "minItems": 1},
        "nu": _positive,
        "a_omega": _positive,
        "b_omega": _positive,
        "a_sigma": _positive,
        "b_sigma": _positive,
        "epsilon_tol": _positive,
        "max_iter": {"type": "integer", "minimum": 1},
        "newton_inner": {"type": "integer", "minimum": 1},
        "dense_newton_threshold": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
    },
}

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["p", "n", "q", "g_pathways"],
    "properties": {
        "p": {"type": "integer", "minimum": 1},
        "n": {"type": "integer", "minimum": 1},
        "q": {"type": "integer", "minimum": 1},
        "g_pathways": {"type": "integer", "minimum": 1},
        "mu_path": {"type": "number", "minimum": 2},
        "p1": {"type": "number", "minimum": 0, "maximum": 1},
        "scenario": {"type": "integer", "enum": [1, 2, 3, 4, 5]},
        "independent_tail": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "nb_dispersion": _positive,
    },
}

_sparse_pairs = {
    "type": "array",
    "items": {
        "type": "array",
        "prefixItems": [{"type": "integer", "minimum": 1}, _number],
        "minItems": 2,
        "maxItems": 2,
    },
}

FIT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": [
        "p",
        "beta",
        "alpha",
        "sigma2",
        "selected",
        "iterations",
        "converged",
        "trace",
        "wall_time_s",
        "standardization",
    ],
    "properties": {
        "p": {"type": "integer", "minimum": 1},
        "beta": _sparse_pairs,
        "alpha": _number_array,
        "sigma2": _positive,
        "selected": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "iterations": {"type": "integer", "minimum": 0},
        "converged": {"type": "boolean"},
        "trace": {
            "type": "array",
            "items": {
                "type": "array",
                "items": _number,
                "minItems": 2,
                "maxItems": 2,
            },
        },
        "wall_time_s": {"type": "number", "minimum": 0},
        "standardization": {
            "type": "object",
            "additionalProperties": False,
            "required": ["column_means", "column_scales", "y_mean"],
            "properties": {
                "column_means": _number_array,
                "column_scales": _number_array,
                "y_mean": _number,
            },
        },
        "beta_original_scale": _sparse_pairs,
        "intercept": _number,
    },
}

TUNE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["mu_grid", "per_mu", "best_mu", "best_fit"],
    "properties": {
        "mu_grid": _number_array,
        "per_mu": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["mu", "mspe", "converged", "iterations", "n_selected"],
                "properties": {
                    "mu": _number,
                    "mspe": _number,
                    "converged": {"type": "boolean"},
                    "iterations": {"type": "integer"},
                    "n_selected": {"type": "integer"},
                },
            },
        },
        "best_mu": _number,
        "best_fit": FIT_SCHEMA,
    },
}

_stat_pair = {
    "type": "object",
    "additionalProperties": False,
    "required": ["mean", "se"],
    "properties": {"mean": _number, "se": {"type": ["number", "null"]}},
}

SUMMARY_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["spec", "replicates", "failures", "methods"],
    "properties": {
        "spec": SCENARIO_SCHEMA,
        "replicates": {"type": "integer", "minimum": 1},
        "failures": {"type": "integer", "minimum": 0},
        "failed_replicates": {"type": "array", "items": {"type": "integer"}},
        "methods": {
            "type": "object",
            "additionalProperties": False,
            "patternProperties": {
                "^(EMSHS|EMSH|lasso)$": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["mspe", "fp", "fn", "time_s"],
                    "properties": {
                        "mspe": _stat_pair,
                        "fp": _stat_pair,
                        "fn": _stat_pair,
                        "time_s": {"oneOf": [_stat_pair, {"type": "null"}]},
                    },
                }
            },
        },
    },
}

TRUTH_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["beta0_indices", "scenario", "seed", "p", "n", "q"],
    "properties": {
        "beta0_indices": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "scenario": {"type": "integer", "enum": [1, 2, 3, 4, 5]},
        "seed": {"type": "integer"},
        "p": {"type": "integer", "minimum": 1},
        "n": {"type": "integer", "minimum": 1},
        "q": {"type": "integer", "minimum": 1},
    },
}
