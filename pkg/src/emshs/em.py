"""EM driver for graph-guided adaptive shrinkage regression.

The model places coordinate-specific Laplace priors on the regression
coefficients, a log-normal prior on the shrinkage parameters ``alpha`` whose
precision is the graph-structured ``Omega``, gamma priors on the edge weights,
and an inverse-gamma prior on the residual variance.  The posterior mode over
``(beta, sigma^2, alpha)`` with the edge weights marginalized out is located
by an EM loop that treats the edge weights as missing data:

  E-step   edge weight expectations given the current alpha;
  M-beta   weighted lasso with penalties ``xi_j = sigma * exp(alpha_j)``;
  M-sigma  closed-form positive root of a quadratic;
  M-alpha  a few damped Newton steps (full Hessian for small p, diagonal
           approximation for large p) with backtracking line search.

Two estimator flavours come from the same loop: with an empty graph the
shrinkage parameters are smoothed toward a common location only (EMSH); with
a covariate graph the smoothing follows the edges (EMSHS).
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .data import Dataset, ensure_standardized
from .exceptions import ConfigError
from .graph import (
    SparseGraph,
    omega_apply,
    omega_dense,
    omega_diagonal,
    omega_quadratic_form,
    validate_edge_weights,
)
from .wlasso import WLassoSolution, solve_weighted_lasso

logger = logging.getLogger(__name__)

# Backtracking line search (standard Armijo constants).
_ARMIJO_C = 1e-4
_BACKTRACK_FACTOR = 0.5
_MAX_HALVINGS = 50

# Lower clamp width for exp(alpha); see exp_alpha.
_ALPHA_UNDERFLOW_SPAN = 40.0


@dataclass(frozen=True)
class Hyperparameters:
    """Model and solver controls.

    ``mu`` is the sparsity location of the log-shrinkage prior (scalar, or a
    length-p array for heterogeneous sparsity); larger values give sparser
    fits.  ``nu`` is the prior variance scale of the log-shrinkage parameters;
    ``nu -> 0`` pins them at ``mu`` and recovers a plain lasso.  ``a_omega``,
    ``b_omega`` are the gamma shape/rate of the edge-weight prior, and
    ``a_sigma``, ``b_sigma`` the inverse-gamma parameters of the residual
    variance prior.
    """

    mu: float | np.ndarray = 5.5
    nu: float = 1.2
    a_omega: float = 4.0
    b_omega: float = 1.0
    a_sigma: float = 1.0
    b_sigma: float = 1.0
    epsilon_tol: float = math.exp(-5)
    max_iter: int = 1000
    newton_inner: int = 3
    dense_newton_threshold: int = 500
    seed: int = 0

    def __post_init__(self):
        for name in ("nu", "a_omega", "b_omega", "a_sigma", "b_sigma", "epsilon_tol"):
            if not float(np.asarray(getattr(self, name))) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.max_iter < 1 or self.newton_inner < 1:
            raise ConfigError("max_iter and newton_inner must be >= 1")
        if self.dense_newton_threshold < 0:
            raise ConfigError("dense_newton_threshold must be >= 0")

    def mu_vector(self, p: int) -> np.ndarray:
        mu = np.asarray(self.mu, dtype=np.float64)
        if mu.ndim == 0:
            return np.full(p, float(mu))
        mu = mu.ravel()
        if mu.shape[0] != p:
            raise ConfigError(f"mu has length {mu.shape[0]}, expected {p}")
        return mu.copy()


@dataclass
class EmState:
    """Mutable per-fit state of the EM loop."""

    beta: np.ndarray
    sigma: float
    alpha: np.ndarray
    omega: np.ndarray  # per-edge weights aligned with the graph
    q_value: float
    logpost: float
    iteration: int


@dataclass
class FitResult:
    """Converged (or capped) fit with bookkeeping for diagnostics.

    ``beta``/``alpha`` are on the standardized predictor scale; the
    standardization records needed to score new raw data travel with the
    result.  ``trace`` holds one ``(q_value, logpost)`` pair for the initial
    state and one per EM iteration.
    """

    beta: np.ndarray
    alpha: np.ndarray
    sigma2: float
    selected: np.ndarray
    omega_final: np.ndarray
    trace: list[tuple[float, float]]
    iterations: int
    wall_time: float
    converged: bool
    column_means: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]
    column_scales: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]
    y_mean: float = 0.0


def exp_alpha(alpha: np.ndarray, mu_vec: np.ndarray, nu: float) -> np.ndarray:
    """exp(alpha) with alpha clamped to ``[mu - 40, mu + nu]``.

    The upper clamp is exact on the stationary set (no stationary point has
    ``alpha_j > mu_j + nu``); the lower clamp only guards against underflow
    when a line-search trial point is wildly off.
    """
    return np.exp(np.clip(alpha, mu_vec - _ALPHA_UNDERFLOW_SPAN, mu_vec + nu))


def initialize(data: Dataset, g: SparseGraph, h: Hyperparameters) -> EmState:
    """Starting state: zero coefficients, prior-scale sigma, alpha at mu.

    The edge weights are filled by one E-step from the flat alpha, which puts
    ``a_omega / b_omega`` on every edge.
    """
    n, p = data.n, data.p
    mu_vec = h.mu_vector(p)
    c3 = n + p + 2.0 * h.a_sigma + 2.0
    sigma0 = math.sqrt((float(data.y @ data.y) + 2.0 * h.b_sigma) / c3)
    alpha0 = mu_vec.copy()
    omega0 = e_step(alpha0, g, h)
    state = EmState(
        beta=np.zeros(p),
        sigma=sigma0,
        alpha=alpha0,
        omega=omega0,
        q_value=0.0,
        logpost=0.0,
        iteration=0,
    )
    state.q_value = q_objective(state, data, g, h)
    state.logpost = log_marginal_posterior(state, data, g, h)
    return state


def _centered_gaps(alpha: np.ndarray, g: SparseGraph, h: Hyperparameters) -> np.ndarray:
    """Per-edge differences of ``alpha - mu``.

    For the default scalar ``mu`` these are the plain ``alpha_j - alpha_k``
    gaps; centering first is what keeps the quadratic-form identity (and with
    it EM ascent) exact when a heterogeneous ``mu`` vector is supplied.
    """
    z = alpha - h.mu_vector(alpha.shape[0])
    return z[g.edges[:, 0]] - z[g.edges[:, 1]]


def e_step(alpha: np.ndarray, g: SparseGraph, h: Hyperparameters) -> np.ndarray:
    """Posterior-mean edge weights given alpha.

    Each edge weight follows a gamma posterior, so its expectation is
    ``2 nu a_omega / (2 nu b_omega + (alpha_j - alpha_k)^2)``; non-edges stay
    at exactly zero and are never stored.  O(|E|).
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    if g.n_edges == 0:
        return np.empty(0)
    gaps = _centered_gaps(alpha, g, h)
    return (2.0 * h.nu * h.a_omega) / (2.0 * h.nu * h.b_omega + gaps * gaps)


def m_step_sigma(c1: float, c2: float, c3: float) -> float:
    """Positive root of ``c3 sigma^2 - c2 sigma - 2 c1 = 0``.

    This is the stationary point of ``c1/sigma^2 + c2/sigma + c3 log sigma``
    with ``c1 = 0.5 ||y - X beta||^2 + b_sigma``,
    ``c2 = sum_j exp(alpha_j) |beta_j|`` and ``c3 = n + p + 2 a_sigma + 2``.
    """
    if c1 <= 0 or c2 < 0 or c3 <= 0:
        raise ValueError("require c1 > 0, c2 >= 0, c3 > 0")
    return (c2 + math.sqrt(c2 * c2 + 8.0 * c1 * c3)) / (2.0 * c3)


def _alpha_surrogate(alpha, mu_vec, nu, sigma, abs_beta, g, w) -> float:
    """Scaled negative alpha-objective used by the Newton line search.

    phi(alpha) = nu*sigma*(-sum alpha) + sigma/2 (alpha-mu)' Omega (alpha-mu)
                 + nu * sum |beta_j| exp(alpha_j);
    its gradient is exactly the Newton gradient below, so Armijo decrease on
    phi is ascent on the alpha-part of the EM objective.
    """
    quad = omega_quadratic_form(g, w, alpha, mu_vec)
    penal = float(abs_beta @ exp_alpha(alpha, mu_vec, nu))
    return -nu * sigma * float(alpha.sum()) + 0.5 * sigma * quad + nu * penal


def m_step_alpha(
    state: EmState,
    g: SparseGraph,
    h: Hyperparameters,
    data: Dataset,
) -> tuple[np.ndarray, bool]:
    """Damped Newton ascent on the alpha-part of the EM objective.

    Performs ``h.newton_inner`` steps of ``alpha += s * d`` where
    ``d = -H^{-1} grad`` with ``H = sigma*Omega + nu*D_|beta|*D_exp(alpha)``
    (full Hessian for ``p <= dense_newton_threshold``, its diagonal
    otherwise) and ``grad = sigma*Omega(alpha-mu) - nu*sigma*1 +
    nu*D_|beta|*exp(alpha)``.  Step sizes come from backtracking line search,
    so every accepted step increases the objective.

    Returns the updated alpha and a flag that is False when a line search
    failed (alpha is then returned unchanged for that step).
    """
    p = data.p
    mu_vec = h.mu_vector(p)
    nu, sigma = h.nu, state.sigma
    abs_beta = np.abs(state.beta)
    w = validate_edge_weights(g, state.omega)
    alpha = state.alpha.copy()
    ok = True

    grad_scale = max(1.0, nu * sigma)
    for _ in range(h.newton_inner):
        ea = exp_alpha(alpha, mu_vec, nu)
        grad = sigma * omega_apply(g, w, alpha - mu_vec) - nu * sigma + nu * abs_beta * ea
        if np.abs(grad).max(initial=0.0) <= 1e-13 * grad_scale:
            break
        if p <= h.dense_newton_threshold:
            hess = sigma * omega_dense(g, w)
            hess[np.diag_indices_from(hess)] += nu * abs_beta * ea
            try:
                direction = -scipy.linalg.cho_solve(
                    scipy.linalg.cho_factor(hess), grad
                )
            except scipy.linalg.LinAlgError:
                direction = -np.linalg.solve(hess, grad)
        else:
            diag_h = sigma * omega_diagonal(g, w) + nu * abs_beta * ea
            direction = -grad / diag_h

        slope = float(grad @ direction)
        phi0 = _alpha_surrogate(alpha, mu_vec, nu, sigma, abs_beta, g, w)
        step = 1.0
        accepted = False
        for _ in range(_MAX_HALVINGS):
            trial = alpha + step * direction
            if _alpha_surrogate(
                trial, mu_vec, nu, sigma, abs_beta, g, w
            ) <= phi0 + _ARMIJO_C * step * slope:
                alpha = trial
                accepted = True
                break
            step *= _BACKTRACK_FACTOR
        if not accepted:
            logger.warning(
                "alpha update: line search failed after %d halvings; "
                "keeping current alpha",
                _MAX_HALVINGS,
            )
            ok = False
            break

    if np.any(alpha < mu_vec - _ALPHA_UNDERFLOW_SPAN):
        logger.warning("alpha update: underflow clamp active on some coordinates")
    return alpha, ok


def q_objective(
    state: EmState, data: Dataset, g: SparseGraph, h: Hyperparameters
) -> float:
    """EM surrogate objective at the current state (edge weights fixed).

    Q = -(n+p+2 a_sigma+2)/2 log sigma^2
        - (||y - X beta||^2 + 2 sigma sum_j exp(alpha_j)|beta_j| + 2 b_sigma)
          / (2 sigma^2)
        + sum_j alpha_j - (alpha-mu)' Omega (alpha-mu) / (2 nu)
    """
    n, p = data.n, data.p
    mu_vec = h.mu_vector(p)
    sigma = state.sigma
    r = data.y - data.x @ state.beta
    sse = float(r @ r)
    c2 = float(np.abs(state.beta) @ exp_alpha(state.alpha, mu_vec, h.nu))
    c3 = n + p + 2.0 * h.a_sigma + 2.0
    quad = omega_quadratic_form(g, state.omega, state.alpha, mu_vec)
    return (
        -0.5 * c3 * math.log(sigma * sigma)
        - (sse + 2.0 * sigma * c2 + 2.0 * h.b_sigma) / (2.0 * sigma * sigma)
        + float(state.alpha.sum())
        - quad / (2.0 * h.nu)
    )


def log_marginal_posterior(
    state: EmState, data: Dataset, g: SparseGraph, h: Hyperparameters
) -> float:
    """Log posterior density with the edge weights marginalized out.

    Includes the Gaussian likelihood, the Laplace coefficient priors and the
    inverse-gamma variance prior in full, the isotropic Gaussian kernel of
    the log-shrinkage prior, and one ``-a_omega log(b_omega + gap^2/(2 nu))``
    term per edge.  Constants that do not depend on ``(beta, sigma, alpha)``
    (the Gaussian normalizer of the alpha prior and the edge-prior
    normalization) are dropped.
    """
    n, p = data.n, data.p
    mu_vec = h.mu_vector(p)
    sigma = state.sigma
    sigma2 = sigma * sigma
    r = data.y - data.x @ state.beta
    sse = float(r @ r)
    ea = exp_alpha(state.alpha, mu_vec, h.nu)

    loglik = -0.5 * n * math.log(2.0 * math.pi * sigma2) - sse / (2.0 * sigma2)
    laplace = float(
        state.alpha.sum()
        - p * math.log(2.0 * sigma)
        - (np.abs(state.beta) @ ea) / sigma
    )
    invgamma = (
        h.a_sigma * math.log(h.b_sigma)
        - math.lgamma(h.a_sigma)
        - (h.a_sigma + 1.0) * math.log(sigma2)
        - h.b_sigma / sigma2
    )
    d = state.alpha - mu_vec
    alpha_prior = -float(d @ d) / (2.0 * h.nu)
    edge_terms = 0.0
    if g.n_edges:
        gaps = _centered_gaps(state.alpha, g, h)
        edge_terms = -h.a_omega * float(
            np.log(h.b_omega + gaps * gaps / (2.0 * h.nu)).sum()
        )
    return loglik + laplace + invgamma + alpha_prior + edge_terms


def fit(
    data: Dataset,
    g: SparseGraph,
    h: Hyperparameters,
    init_state: EmState | None = None,
    wlasso_tol: float = 1e-8,
) -> FitResult:
    """Run the EM loop to convergence (or the iteration cap).

    Iterates E-step, M-beta (warm-started weighted lasso with
    ``xi_j = sigma e^{alpha_j}``), M-sigma, M-alpha; stops when the relative
    improvement ``(Q_t - Q_{t-1}) / (|Q_{t-1}| + 1)`` drops below
    ``h.epsilon_tol``.  Deterministic given its inputs.  Non-convergence at
    ``max_iter`` is reported through ``converged=False``, not an exception.
    """
    data = ensure_standardized(data)
    if g.p != data.p:
        raise ValueError(f"graph has {g.p} nodes but data has {data.p} columns")
    n, p = data.n, data.p
    mu_vec = h.mu_vector(p)
    c3 = n + p + 2.0 * h.a_sigma + 2.0

    t0 = time.perf_counter()
    if init_state is None:
        state = initialize(data, g, h)
    else:
        state = replace(init_state)
        state.beta = init_state.beta.copy()
        state.alpha = init_state.alpha.copy()
        state.omega = e_step(state.alpha, g, h)
        state.q_value = q_objective(state, data, g, h)
        state.logpost = log_marginal_posterior(state, data, g, h)
        state.iteration = 0

    trace = [(state.q_value, state.logpost)]
    warm: WLassoSolution | None = None
    if np.any(state.beta):
        warm = WLassoSolution(
            beta=state.beta.copy(),
            active=np.flatnonzero(state.beta),
            xr_cache=data.x.T @ (data.y - data.x @ state.beta),
            iterations=0,
        )

    converged = False
    prev_q = state.q_value
    iteration = 0
    for iteration in range(1, h.max_iter + 1):
        state.omega = e_step(state.alpha, g, h)

        xi = state.sigma * exp_alpha(state.alpha, mu_vec, h.nu)
        warm = solve_weighted_lasso(data, xi, warm=warm, tol=wlasso_tol)
        state.beta = warm.beta

        act = warm.active
        r = data.y - data.x[:, act] @ state.beta[act] if act.size else data.y
        c1 = 0.5 * float(r @ r) + h.b_sigma
        c2 = float(np.abs(state.beta) @ exp_alpha(state.alpha, mu_vec, h.nu))
        state.sigma = m_step_sigma(c1, c2, c3)

        state.alpha, _ = m_step_alpha(state, g, h, data)

        state.q_value = q_objective(state, data, g, h)
        state.logpost = log_marginal_posterior(state, data, g, h)
        state.iteration = iteration
        trace.append((state.q_value, state.logpost))

        rel = (state.q_value - prev_q) / (abs(prev_q) + 1.0)
        prev_q = state.q_value
        if rel < h.epsilon_tol:
            converged = True
            break

    # Final consistency pass: the reported coefficients must solve the
    # weighted lasso at the *final* penalties sigma * exp(alpha) (the loop
    # above solved against the previous iteration's values).  This is one
    # more E-step plus M-beta, so the posterior ascent property is kept.
    state.omega = e_step(state.alpha, g, h)
    xi = state.sigma * exp_alpha(state.alpha, mu_vec, h.nu)
    warm = solve_weighted_lasso(data, xi, warm=warm, tol=wlasso_tol)
    if warm.iterations > 0:
        state.beta = warm.beta
        state.q_value = q_objective(state, data, g, h)
        state.logpost = log_marginal_posterior(state, data, g, h)
        trace.append((state.q_value, state.logpost))

    return FitResult(
        beta=state.beta.copy(),
        alpha=state.alpha.copy(),
        sigma2=state.sigma * state.sigma,
        selected=np.flatnonzero(state.beta),
        omega_final=state.omega.copy(),
        trace=trace,
        iterations=iteration,
        wall_time=time.perf_counter() - t0,
        converged=converged,
        column_means=data.column_means.copy(),
        column_scales=data.column_scales.copy(),
        y_mean=data.y_mean,
    )


def fixed_point_residual(fit_result: FitResult, g: SparseGraph, h: Hyperparameters) -> float:
    """Max violation of the stationarity identity tying beta, alpha, sigma.

    At a fixed point every coordinate satisfies

        |beta_j| e^{alpha_j}
            = (sigma/nu) (mu_j + nu - alpha_j
                           + sum_{k~j} w_jk (alpha_k - alpha_j)),

    with the final edge weights; for ``beta_j = 0`` this reduces to the
    smoothing equation for alpha alone.
    """
    p = fit_result.alpha.shape[0]
    mu_vec = h.mu_vector(p)
    alpha = fit_result.alpha
    sigma = math.sqrt(fit_result.sigma2)
    w = validate_edge_weights(g, fit_result.omega_final)
    smooth = np.zeros(p)
    if g.n_edges:
        js, ks = g.edges[:, 0], g.edges[:, 1]
        z = alpha - mu_vec
        smooth = np.bincount(js, weights=w * (z[ks] - z[js]), minlength=p)
        smooth += np.bincount(ks, weights=w * (z[js] - z[ks]), minlength=p)
    lhs = np.abs(fit_result.beta) * exp_alpha(alpha, mu_vec, h.nu)
    rhs = (sigma / h.nu) * (mu_vec + h.nu - alpha + smooth)
    return float(np.abs(lhs - rhs).max(initial=0.0))


def predict(fit_result: FitResult, x_new) -> np.ndarray:
    """Score a raw predictor matrix with the stored standardization.

    ``yhat = y_mean + ((x_new - column_means) / column_scales) @ beta``.
    """
    x_new = np.asarray(x_new, dtype=np.float64)
    if x_new.ndim == 1:
        x_new = x_new.reshape(1, -1)
    p = fit_result.beta.shape[0]
    if x_new.shape[1] != p:
        raise ValueError(
            f"new data has {x_new.shape[1]} columns, model expects {p}"
        )
    # Only touch the selected columns: O(m q) regardless of p.
    sel = fit_result.selected
    if sel.size == 0:
        return np.full(x_new.shape[0], fit_result.y_mean)
    b = fit_result.beta[sel] / fit_result.column_scales[sel]
    offset = fit_result.y_mean - float(fit_result.column_means[sel] @ b)
    return offset + x_new[:, sel] @ b
