import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import brentq, minimize

import emshs
from emshs import (
    Dataset,
    Hyperparameters,
    SparseGraph,
    check_kkt,
    e_step,
    fixed_point_residual,
    fit,
    initialize,
    log_marginal_posterior,
    m_step_alpha,
    m_step_sigma,
    predict,
    q_objective,
    solve_weighted_lasso,
    standardize,
)
from emshs.em import EmState, exp_alpha
from conftest import random_graph, random_instance


def _manual_dataset(x, y):
    """Dataset taken at face value (marked standardized; no transformation)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    return Dataset(
        x=x,
        y=y,
        column_means=np.zeros(x.shape[1]),
        column_scales=np.ones(x.shape[1]),
        y_mean=0.0,
        standardized=True,
    )


def _state(beta, sigma, alpha, g, h):
    alpha = np.asarray(alpha, float)
    return EmState(
        beta=np.asarray(beta, float),
        sigma=float(sigma),
        alpha=alpha,
        omega=e_step(alpha, g, h),
        q_value=0.0,
        logpost=0.0,
        iteration=0,
    )


class TestInitialize:
    def test_sigma_formula(self):
        # y'y = 50, b_sigma = 1, n = 50, p = 10, a_sigma = 1 -> c3 = 64,
        # sigma0 = sqrt(52 / 64).
        y = np.ones(50)
        x = np.tile(np.eye(10), (5, 1))
        data = _manual_dataset(x, y)
        h = Hyperparameters(mu=1.0, a_sigma=1.0, b_sigma=1.0)
        state = initialize(data, SparseGraph.empty(10), h)
        assert state.sigma == pytest.approx(math.sqrt(52.0 / 64.0), abs=1e-12)
        assert state.sigma == pytest.approx(0.90139, abs=5e-6)

    def test_alpha_at_mu_and_omega_at_prior_mean(self, rng):
        data, _ = random_instance(1, 20, 6)
        g = SparseGraph.from_edge_array(6, [[0, 1], [2, 3]])
        h = Hyperparameters(mu=2.0, a_omega=4.0, b_omega=1.0)
        state = initialize(data, g, h)
        np.testing.assert_array_equal(state.alpha, np.full(6, 2.0))
        np.testing.assert_allclose(state.omega, np.full(2, 4.0))

    def test_beta_zero(self, rng):
        data, g = random_instance(2, 25, 8)
        state = initialize(data, g, Hyperparameters(mu=1.5))
        np.testing.assert_array_equal(state.beta, np.zeros(8))


class TestEStep:
    def test_equal_alphas_give_prior_mean(self):
        g = SparseGraph.from_edge_array(4, [[0, 1], [1, 2], [2, 3]])
        h = Hyperparameters(mu=1.0, nu=1.2, a_omega=4.0, b_omega=1.0)
        w = e_step(np.full(4, 0.3), g, h)
        np.testing.assert_allclose(w, np.full(3, 4.0))

    def test_hand_value_for_unit_gap(self):
        g = SparseGraph.from_edge_array(2, [[0, 1]])
        h = Hyperparameters(mu=1.0, nu=1.2, a_omega=4.0, b_omega=1.0)
        w = e_step(np.array([1.0, 0.0]), g, h)
        assert w[0] == pytest.approx(9.6 / 3.4, abs=1e-12)
        assert w[0] == pytest.approx(2.82353, abs=5e-6)

    def test_only_edges_are_stored(self):
        g = SparseGraph.from_edge_array(5, [[0, 4]])
        h = Hyperparameters(mu=1.0)
        w = e_step(np.arange(5.0), g, h)
        assert w.shape == (1,)

    def test_weights_in_posterior_range(self, rng):
        g = random_graph(10, 0.5, rng)
        h = Hyperparameters(mu=1.0, nu=0.7, a_omega=3.0, b_omega=2.0)
        w = e_step(rng.standard_normal(10), g, h)
        assert np.all(w > 0)
        assert np.all(w <= 3.0 / 2.0 + 1e-12)


class TestMStepSigma:
    def test_zero_penalty_reduction(self):
        assert m_step_sigma(1.0, 0.0, 57.0) == pytest.approx(
            math.sqrt(2.0 / 57.0), abs=1e-12
        )
        assert m_step_sigma(1.0, 0.0, 57.0) == pytest.approx(0.18732, abs=5e-6)

    def test_quadratic_root_hand_case(self):
        s = m_step_sigma(1.0, 2.0, 8.0)
        assert s == pytest.approx((2.0 + math.sqrt(68.0)) / 16.0, abs=1e-12)
        assert s == pytest.approx(0.64039, abs=5e-6)

    def test_stationarity_of_returned_root(self, rng):
        for _ in range(20):
            c1 = float(rng.uniform(0.1, 10))
            c2 = float(rng.uniform(0, 10))
            c3 = float(rng.uniform(1, 100))
            s = m_step_sigma(c1, c2, c3)
            deriv = -2 * c1 / s**3 - c2 / s**2 + c3 / s
            assert abs(deriv) <= 1e-10 * c3 / s

    def test_preconditions(self):
        with pytest.raises(ValueError):
            m_step_sigma(0.0, 1.0, 2.0)


class TestMStepAlpha:
    def test_zero_beta_fixed_point_is_mu_plus_nu(self, rng):
        # Full Newton solves the zero-beta quadratic in one step; the
        # diagonal variant converges linearly and needs more inner steps.
        for p, dense_thresh, inner in ((6, 500, 5), (6, 0, 800)):
            g = random_graph(p, 0.5, rng)
            data, _ = random_instance(3, 20, p)
            h = Hyperparameters(mu=1.0, nu=1.2, newton_inner=inner,
                                dense_newton_threshold=dense_thresh)
            state = _state(np.zeros(p), 1.0, np.full(p, 1.0), g, h)
            alpha, ok = m_step_alpha(state, g, h, data)
            assert ok
            np.testing.assert_allclose(alpha, np.full(p, 2.2), atol=1e-6)

    def test_scalar_root(self, rng):
        # sigma = nu = mu = |beta| = 1, no edges: stationary alpha solves
        # alpha + exp(alpha) = 2.
        g = SparseGraph.empty(1)
        data = _manual_dataset(np.ones((3, 1)), np.ones(3))
        h = Hyperparameters(mu=1.0, nu=1.0, newton_inner=50)
        state = _state([1.0], 1.0, [1.0], g, h)
        alpha, ok = m_step_alpha(state, g, h, data)
        root = brentq(lambda a: a + np.exp(a) - 2.0, -5, 5, xtol=1e-14)
        assert ok
        assert alpha[0] == pytest.approx(root, abs=1e-10)
        assert alpha[0] == pytest.approx(0.44285, abs=5e-6)

    def test_diagonal_direction_is_descent(self, rng):
        # At any non-stationary point the diagonally preconditioned step d
        # satisfies grad' d < 0.
        p = 12
        g = random_graph(p, 0.4, rng)
        h = Hyperparameters(mu=1.0, nu=1.2)
        for _ in range(10):
            alpha = 1.0 + rng.standard_normal(p)
            beta = rng.standard_normal(p) * rng.integers(0, 2, p)
            sigma = float(rng.uniform(0.2, 2.0))
            w = e_step(alpha, g, h)
            mu_vec = h.mu_vector(p)
            ea = exp_alpha(alpha, mu_vec, h.nu)
            grad = (
                sigma * emshs.omega_apply(g, w, alpha - mu_vec)
                - h.nu * sigma
                + h.nu * np.abs(beta) * ea
            )
            if np.abs(grad).max() < 1e-10:
                continue
            diag_h = sigma * emshs.omega_diagonal(g, w) + h.nu * np.abs(beta) * ea
            d = -grad / diag_h
            assert float(grad @ d) < 0.0

    def test_accepted_steps_never_decrease_alpha_objective(self, rng):
        data, g = random_instance(4, 30, 10, edge_prob=0.3)
        h = Hyperparameters(mu=1.0)
        state = _state(
            rng.standard_normal(10) * (rng.random(10) < 0.5),
            0.8,
            1.0 + 0.3 * rng.standard_normal(10),
            g,
            h,
        )
        q_before = q_objective(state, data, g, h)
        state.alpha, _ = m_step_alpha(state, g, h, data)
        q_after = q_objective(state, data, g, h)
        assert q_after >= q_before - 1e-10 * (1 + abs(q_before))


class TestObjectives:
    def test_q_hand_value(self):
        # n = p = 1, y = x = 1, beta = 0, sigma = 1, alpha = mu = 0, nu = 1,
        # a_sigma = b_sigma = 1, no edges -> Q = -(1 + 0 + 2)/2 = -1.5.
        data = _manual_dataset([[1.0]], [1.0])
        g = SparseGraph.empty(1)
        h = Hyperparameters(mu=0.0, nu=1.0, a_sigma=1.0, b_sigma=1.0)
        state = _state([0.0], 1.0, [0.0], g, h)
        assert q_objective(state, data, g, h) == pytest.approx(-1.5, abs=1e-12)

    def test_q_linear_in_b_sigma_at_unit_sigma(self, rng):
        data, g = random_instance(5, 15, 4)
        h = Hyperparameters(mu=1.0, b_sigma=1.0)
        state = _state([0.0, 0.1, 0.0, -0.2], 1.0, np.full(4, 1.0), g, h)
        q1 = q_objective(state, data, g, h)
        delta = 0.37
        h2 = replace(h, b_sigma=1.0 + delta)
        state2 = _state(state.beta, 1.0, state.alpha, g, h2)
        q2 = q_objective(state2, data, g, h2)
        assert q2 == pytest.approx(q1 - delta, abs=1e-10)

    def test_logpost_hand_value(self):
        # n = p = 1, y = 0, x = 1, beta = 0, sigma2 = 1, alpha = mu = 0,
        # nu = 1, a_sigma = b_sigma = 1, no edges:
        # -log(2 pi)/2 + log(1/2) + log(exp(-1)) = -2.61209.
        data = _manual_dataset([[1.0]], [0.0])
        g = SparseGraph.empty(1)
        h = Hyperparameters(mu=0.0, nu=1.0, a_sigma=1.0, b_sigma=1.0)
        state = _state([0.0], 1.0, [0.0], g, h)
        expected = -0.5 * math.log(2 * math.pi) + math.log(0.5) - 1.0
        value = log_marginal_posterior(state, data, g, h)
        assert value == pytest.approx(expected, abs=1e-12)
        assert value == pytest.approx(-2.61209, abs=5e-6)

    def test_equal_alpha_edge_contributes_rate_log(self):
        data = _manual_dataset([[1.0, -1.0]], [0.0])
        h = Hyperparameters(mu=0.0, nu=1.0, a_omega=4.0, b_omega=2.0)
        g0 = SparseGraph.empty(2)
        g1 = SparseGraph.from_edge_array(2, [[0, 1]])
        s0 = _state([0.0, 0.0], 1.0, [0.3, 0.3], g0, h)
        s1 = _state([0.0, 0.0], 1.0, [0.3, 0.3], g1, h)
        lp0 = log_marginal_posterior(s0, data, g0, h)
        lp1 = log_marginal_posterior(s1, data, g1, h)
        assert lp1 - lp0 == pytest.approx(-4.0 * math.log(2.0), abs=1e-12)


class TestFit:
    def test_zero_response(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((20, 5))
        data = _manual_dataset(x - x.mean(0), np.zeros(20))
        g = SparseGraph.from_edge_array(5, [[0, 1]])
        h = Hyperparameters(mu=1.0, nu=1.2)
        r = fit(data, g, h)
        np.testing.assert_array_equal(r.beta, np.zeros(5))
        assert r.selected.size == 0
        np.testing.assert_allclose(r.alpha, np.full(5, 2.2), atol=1e-8)

    def test_empty_graph_ignores_edge_prior(self, rng):
        data, _ = random_instance(6, 30, 8)
        g = SparseGraph.empty(8)
        h1 = Hyperparameters(mu=1.5, a_omega=4.0, b_omega=1.0)
        h2 = Hyperparameters(mu=1.5, a_omega=0.5, b_omega=9.0)
        r1 = fit(data, g, h1)
        r2 = fit(data, g, h2)
        np.testing.assert_array_equal(r1.beta, r2.beta)
        np.testing.assert_array_equal(r1.alpha, r2.alpha)
        assert r1.sigma2 == r2.sigma2

    def test_empty_graph_bit_identical_reruns(self, rng):
        data, _ = random_instance(7, 30, 10)
        g = SparseGraph.empty(10)
        h = Hyperparameters(mu=1.5, seed=42)
        r1 = fit(data, g, h)
        r2 = fit(data, g, h)
        np.testing.assert_array_equal(r1.beta, r2.beta)
        np.testing.assert_array_equal(r1.alpha, r2.alpha)
        assert r1.sigma2 == r2.sigma2
        assert r1.trace == r2.trace

    def test_ascent_and_kkt_and_alpha_bound(self, rng):
        for seed in range(5):
            data, g = random_instance(50 + seed, 30, 12, edge_prob=0.25)
            h = Hyperparameters(mu=1.5, nu=1.2)
            r = fit(data, g, h)
            lp = np.array([t[1] for t in r.trace])
            assert np.all(np.diff(lp) >= -1e-8 * (1.0 + np.abs(lp[:-1])))
            xi = np.sqrt(r.sigma2) * np.exp(r.alpha)
            assert check_kkt(data, r.beta, xi, tol=1e-6).passed
            assert r.alpha.max() <= 1.5 + 1.2 + 1e-6

    def test_small_instance_matches_direct_search_oracle(self):
        data, g = random_instance(123, 20, 3, edge_prob=0.5)
        h = Hyperparameters(mu=2.0, nu=1.2, epsilon_tol=1e-10, max_iter=20000)
        r = fit(data, g, h)
        em_lp = r.trace[-1][1]

        p = 3

        def neg_logpost(theta):
            state = _state(theta[:p], math.exp(theta[p]), theta[p + 1 :], g, h)
            return -log_marginal_posterior(state, data, g, h)

        best = -np.inf
        starts = [np.concatenate([r.beta, [0.5 * math.log(r.sigma2)], r.alpha])]
        for s in range(200):
            srng = np.random.default_rng(900 + s)
            starts.append(
                np.concatenate(
                    [
                        srng.normal(0.0, 0.7, p),
                        [srng.normal(-0.3, 0.5)],
                        2.0 + srng.normal(0.0, 1.0, p),
                    ]
                )
            )
        for x0 in starts:
            res = minimize(
                neg_logpost,
                x0,
                method="Nelder-Mead",
                options=dict(maxiter=2000, xatol=1e-8, fatol=1e-11),
            )
            best = max(best, -res.fun)
        assert em_lp >= best - 1e-4

    def test_fixed_point_residual_tight_convergence(self, rng):
        data, g = random_instance(321, 30, 8, edge_prob=0.3)
        h = Hyperparameters(mu=1.5, epsilon_tol=1e-10, max_iter=20000)
        r = fit(data, g, h)
        assert r.converged
        assert fixed_point_residual(r, g, h) <= 1e-5

    def test_fixed_point_zero_coordinate_reduction(self):
        # With beta = 0 everywhere the identity reduces to the smoothing
        # equation, whose solution is alpha = mu + nu on every component.
        rng = np.random.default_rng(5)
        x = rng.standard_normal((20, 4))
        data = _manual_dataset(x - x.mean(0), np.zeros(20))
        g = SparseGraph.from_edge_array(4, [[0, 1], [1, 2]])
        h = Hyperparameters(mu=1.0, nu=1.2, epsilon_tol=1e-10)
        r = fit(data, g, h)
        assert fixed_point_residual(r, g, h) <= 1e-8

    def test_scalar_instance_residual(self):
        data, _ = random_instance(11, 25, 1, edge_prob=0.0)
        g = SparseGraph.empty(1)
        h = Hyperparameters(mu=0.5, nu=1.0, epsilon_tol=1e-12, max_iter=50000)
        r = fit(data, g, h)
        assert r.converged
        assert fixed_point_residual(r, g, h) <= 1e-8

    def test_nonconvergence_reported_not_raised(self, rng):
        data, g = random_instance(13, 30, 10)
        h = Hyperparameters(mu=1.5, epsilon_tol=1e-14, max_iter=2)
        r = fit(data, g, h)
        assert not r.converged
        assert r.iterations == 2

    def test_graph_size_mismatch(self, rng):
        data, _ = random_instance(14, 20, 5)
        with pytest.raises(ValueError):
            fit(data, SparseGraph.empty(6), Hyperparameters(mu=1.0))

    def test_selected_matches_nonzeros(self, rng):
        data, g = random_instance(15, 40, 10)
        r = fit(data, g, Hyperparameters(mu=1.5))
        np.testing.assert_array_equal(r.selected, np.flatnonzero(r.beta))


class TestNuLimit:
    def test_tiny_nu_matches_fixed_alpha_alternation(self):
        # Alternating weighted lasso and the sigma update at alpha pinned to
        # mu is an independent implementation of the nu -> 0 limit.
        data, g = random_instance(77, 40, 12, edge_prob=0.2)
        h = Hyperparameters(mu=2.0, nu=1e-6, epsilon_tol=1e-12, max_iter=50000)
        r = fit(data, g, h)

        n, p = data.n, data.p
        c3 = n + p + 2.0 * h.a_sigma + 2.0
        sigma = math.sqrt((float(data.y @ data.y) + 2 * h.b_sigma) / c3)
        beta = np.zeros(p)
        for _ in range(500):
            sol = solve_weighted_lasso(data, sigma * np.exp(2.0) * np.ones(p), tol=1e-12)
            beta = sol.beta
            resid = data.y - data.x @ beta
            c1 = 0.5 * float(resid @ resid) + h.b_sigma
            c2 = float(np.exp(2.0) * np.abs(beta).sum())
            new_sigma = m_step_sigma(c1, c2, c3)
            if abs(new_sigma - sigma) < 1e-14:
                sigma = new_sigma
                break
            sigma = new_sigma
        assert np.abs(r.beta - beta).max() <= 1e-3


class TestPredict:
    def test_zero_coefficients_predict_the_mean(self, rng):
        x = rng.standard_normal((30, 6))
        y = rng.standard_normal(30) + 5.0
        data = standardize(x, y)
        g = SparseGraph.empty(6)
        r = fit(data, g, Hyperparameters(mu=6.0))
        assert r.selected.size == 0
        np.testing.assert_allclose(
            predict(r, rng.standard_normal((4, 6))), np.full(4, y.mean())
        )

    def test_training_matrix_reproduces_fitted_values(self, rng):
        x = rng.standard_normal((40, 8))
        y = x[:, 0] * 2.0 + rng.standard_normal(40) + 1.0
        data = standardize(x, y)
        r = fit(data, SparseGraph.empty(8), Hyperparameters(mu=1.0))
        fitted = data.y_mean + data.x @ r.beta
        np.testing.assert_allclose(predict(r, x), fitted, atol=1e-10)

    def test_single_row_matches_batch(self, rng):
        x = rng.standard_normal((25, 5))
        y = x[:, 1] + rng.standard_normal(25)
        data = standardize(x, y)
        r = fit(data, SparseGraph.empty(5), Hyperparameters(mu=1.0))
        batch = predict(r, x)
        single = predict(r, x[3])
        assert single[0] == pytest.approx(batch[3], abs=1e-12)

    def test_column_count_mismatch(self, rng):
        data, g = random_instance(16, 20, 5)
        r = fit(data, g, Hyperparameters(mu=1.0))
        with pytest.raises(ValueError):
            predict(r, np.zeros((2, 4)))


class TestHyperparameters:
    def test_positivity(self):
        from emshs import ConfigError

        with pytest.raises(ConfigError):
            Hyperparameters(nu=0.0)
        with pytest.raises(ConfigError):
            Hyperparameters(a_omega=-1.0)
        with pytest.raises(ConfigError):
            Hyperparameters(newton_inner=0)

    def test_heterogeneous_mu_vector(self):
        h = Hyperparameters(mu=np.array([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(h.mu_vector(3), [1.0, 2.0, 3.0])
        from emshs import ConfigError

        with pytest.raises(ConfigError):
            h.mu_vector(4)

    def test_heterogeneous_mu_fit_runs(self, rng):
        data, g = random_instance(17, 25, 6)
        h = Hyperparameters(mu=np.array([1.0, 1.2, 1.4, 1.6, 1.8, 2.0]))
        r = fit(data, g, h)
        lp = np.array([t[1] for t in r.trace])
        assert np.all(np.diff(lp) >= -1e-8 * (1.0 + np.abs(lp[:-1])))
        assert np.all(r.alpha <= h.mu_vector(6) + 1.2 + 1e-6)
