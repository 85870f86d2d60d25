from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stoc_order.errors import DegenerateInputError, SingularDesignError
from stoc_order.estimators import (arma_cost_and_gradient, fit_ar_ladder, fit_arma,
                                   fit_regression, pls_errors, pls_prediction_errors)
from stoc_order.model_core import CoeffModel, roots_to_coeffs, simulate

from conftest import random_root_model


# --- regression ------------------------------------------------------------------

def test_exact_fit_has_zero_residual(rng):
    X = rng.standard_normal((3, 40))
    y = np.array([1.0, -2.0, 0.5]) @ X
    fit = fit_regression(X, y)
    assert fit.tau == pytest.approx(0.0, abs=1e-25)
    np.testing.assert_allclose(fit.beta, [1.0, -2.0, 0.5], atol=1e-12)
    assert fit.R == pytest.approx(float(y @ y) / 40)


def test_constant_regressor_gives_mean(rng):
    y = rng.standard_normal(17)
    fit = fit_regression(np.ones((1, 17)), y)
    assert fit.beta[0] == pytest.approx(y.mean())
    assert fit.k == 1 and fit.tau >= 0 and fit.R >= 0


def test_subset_selection(rng):
    X = rng.standard_normal((4, 30))
    y = rng.standard_normal(30)
    fit = fit_regression(X, y, gamma=[0, 2])
    ref = np.linalg.lstsq(X[[0, 2]].T, y, rcond=None)[0]
    np.testing.assert_allclose(fit.beta, ref, rtol=1e-10)
    assert fit.gamma == (0, 2)


@given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_residual_orthogonality(k, seed):
    r = np.random.default_rng(seed)
    N = k + 5 + int(r.integers(0, 50))
    X = r.standard_normal((k, N))
    y = r.standard_normal(N) * 10
    fit = fit_regression(X, y)
    np.testing.assert_allclose(X @ (y - fit.beta @ X), 0.0, atol=1e-8)


def test_singular_design(rng):
    x = rng.standard_normal(20)
    with pytest.raises(SingularDesignError):
        fit_regression(np.vstack([x, 2 * x]), rng.standard_normal(20))
    with pytest.raises(SingularDesignError):
        fit_regression(rng.standard_normal((5, 4)), rng.standard_normal(4))


def test_cubic_coefficients_at_10db():
    r = np.random.default_rng(11)
    N = 100
    x = r.uniform(-3, 3, N)
    clean = x ** 3 - 0.5 * x ** 2 - 5 * x - 1.5
    noise_var = np.mean(clean ** 2) / 10.0
    y = clean + r.standard_normal(N) * math.sqrt(noise_var)
    X = np.vstack([x ** 3, x ** 2, x, np.ones(N)])
    fit = fit_regression(X, y)
    # compare against the least-squares standard errors
    cov = fit.tau * N / (N - 4) * np.linalg.inv(X @ X.T)
    se = np.sqrt(np.diag(cov))
    assert np.all(np.abs(fit.beta - [1.0, -0.5, -5.0, -1.5]) < 4 * se)


# --- prewindowed AR ladder ---------------------------------------------------------

def _brute_force_sigma2(y, n):
    N = len(y)
    rows = [[y[t - i] if t - i >= 0 else 0.0 for i in range(1, n + 1)] for t in range(N)]
    A = np.array(rows)
    G = A.T @ A
    w = np.linalg.solve(G, A.T @ y)
    r = y - A @ w
    return float(r @ r) / N, -w


def test_ladder_matches_normal_equations():
    r = np.random.default_rng(5)
    for _ in range(20):
        N = int(r.integers(15, 40))
        y = r.standard_normal(N).cumsum() * 0.3 + r.standard_normal(N)
        lad = fit_ar_ladder(y, 6)
        for n in range(1, 7):
            s2, a = _brute_force_sigma2(y, n)
            assert lad.sigma2[n] == pytest.approx(s2, rel=1e-8, abs=1e-12)
            np.testing.assert_allclose(lad.coeffs[n], a, rtol=1e-6, atol=1e-8)


@given(st.integers(0, 2 ** 32 - 1), st.integers(10, 200))
def test_ladder_sigma2_non_increasing(seed, N):
    y = np.random.default_rng(seed).standard_normal(N)
    s2 = fit_ar_ladder(y, 6).sigma2
    assert np.all(np.diff(s2) <= 1e-12 * s2[0])


def test_ladder_errors_are_residuals(rng):
    y = rng.standard_normal(60)
    lad = fit_ar_ladder(y, 3, keep_errors=True)
    for n in range(4):
        assert float(lad.errors[n] @ lad.errors[n]) / 60 == pytest.approx(lad.sigma2[n])


def test_ar1_estimate():
    y = simulate(CoeffModel([-0.5]), 10_100, 100, seed=1).values
    assert fit_ar_ladder(y, 3).coeffs[1][0] == pytest.approx(-0.5, abs=0.02)


def test_white_noise_ladder():
    y = np.random.default_rng(2).standard_normal(2000)
    lad = fit_ar_ladder(y, 6)
    assert np.all(np.abs(lad.coeffs[6]) < 0.1)
    assert lad.sigma2[6] > 0.99 * lad.sigma2[1]


def test_ladder_input_checks():
    with pytest.raises(DegenerateInputError):
        fit_ar_ladder(np.zeros(30), 3)
    with pytest.raises(ValueError):
        fit_ar_ladder(np.ones(3), 3)


# --- PLS -------------------------------------------------------------------------------

def test_pls_never_uses_current_sample(rng):
    y = simulate(CoeffModel([-0.6, 0.2]), 170, 50, seed=4).values
    base = pls_prediction_errors(y, 4, t0=14)
    for t in (13, 40, 119):
        z = y.copy()
        z[t] += 7.0
        pert = pls_prediction_errors(z, 4, t0=14)
        # prediction of y_t unchanged: its error moves by exactly the perturbation
        np.testing.assert_allclose(pert[:, t] - base[:, t], 7.0, atol=1e-9)
        np.testing.assert_array_equal(np.isnan(pert[:, :t]), np.isnan(base[:, :t]))
        np.testing.assert_allclose(pert[:, :t], base[:, :t], atol=1e-12)


def test_pls_matches_refit_per_step():
    y = simulate(CoeffModel([0.4]), 80, 20, seed=9).values
    e = pls_prediction_errors(y, 2, t0=5)
    for t in (4, 20, 59):           # 0-based positions
        past = y[:t]
        for n in (1, 2):
            A = np.array([[past[s - i] if s - i >= 0 else 0.0 for i in range(1, n + 1)]
                          for s in range(t)])
            w = np.linalg.lstsq(A, past, rcond=None)[0]
            phi = [y[t - i] for i in range(1, n + 1)]
            assert e[n - 1, t] == pytest.approx(y[t] - np.dot(phi, w), abs=1e-9)


def test_honest_errors_exceed_in_sample_errors():
    r = np.random.default_rng(3)
    for _ in range(20):
        rm = random_root_model(r, 2, max_mag=0.9)
        y = simulate(roots_to_coeffs(rm), 200, 100, seed=int(r.integers(1 << 31))).values
        t0 = 16
        honest = pls_errors(y, 6, t0)
        cheat = fit_ar_ladder(y, 6, keep_errors=True).errors[1:, t0 - 1:]
        assert np.all((cheat ** 2).sum(axis=1) < honest)


def test_pls_white_noise_prefers_order_one():
    total = np.zeros(6)
    for s in range(100):
        total += pls_errors(np.random.default_rng(s).standard_normal(200), 6)
    assert int(np.argmin(total)) == 0


def test_pls_deterministic_and_validated(rng):
    y = rng.standard_normal(80)
    np.testing.assert_array_equal(pls_errors(y, 5, 20), pls_errors(y, 5, 20))
    with pytest.raises(ValueError):
        pls_errors(y, 5, 5)
    assert np.all(np.isnan(pls_prediction_errors(y[:10], 2, t0=12)))


# --- ARMA -------------------------------------------------------------------------------

def test_fit_arma_model1_near_truth():
    truth = CoeffModel([-0.5], [0.8])
    close = 0
    for seed in range(20):
        y = simulate(truth, 500, 100, seed=seed).values
        fit = fit_arma(y, 1, 1)
        assert fit.model is not None and fit.converged
        close += abs(fit.model.a[0] + 0.5) < 0.1 and abs(fit.model.b[0] - 0.8) < 0.1
    assert close >= 16


def test_fit_arma_without_ma_part_is_ladder(rng):
    y = simulate(CoeffModel([-0.3, 0.4]), 300, 100, seed=6).values
    lad = fit_ar_ladder(y, 3)
    for n in (1, 2, 3):
        fit = fit_arma(y, n, 0)
        np.testing.assert_allclose(fit.model.a, lad.coeffs[n], atol=1e-6)
        assert fit.sigma2 == pytest.approx(lad.sigma2[n], rel=1e-6)


def test_fit_arma_descends_and_is_admissible():
    r = np.random.default_rng(8)
    for n, m in [(1, 1), (2, 1), (1, 2), (2, 2), (3, 2)]:
        rm = random_root_model(r, n, m, max_mag=0.85)
        y = simulate(roots_to_coeffs(rm), 300, 100, seed=int(r.integers(1 << 31))).values
        fit = fit_arma(y, n, m)
        assert fit.sigma2 <= fit.init_sigma2
        if fit.model is not None:
            cost, _ = arma_cost_and_gradient(y, fit.model.a, fit.model.b)
            assert cost == pytest.approx(fit.sigma2, rel=1e-12)
            assert np.all(np.abs(fit.model.poles()) < 1) and np.all(np.abs(fit.model.zeros()) < 1)


def test_arma_gradient_finite_differences():
    r = np.random.default_rng(12)
    y = simulate(CoeffModel([-0.5, 0.2], [0.4]), 300, 100, seed=2).values
    for _ in range(10):
        rm = random_root_model(r, 2, 2, max_mag=0.9)
        cm = roots_to_coeffs(rm)
        _, g = arma_cost_and_gradient(y, cm.a, cm.b)
        th = np.r_[cm.a, cm.b]
        fd = np.empty_like(th)
        h = 1e-6
        for i in range(len(th)):
            p, q = th.copy(), th.copy()
            p[i] += h
            q[i] -= h
            fd[i] = (arma_cost_and_gradient(y, p[:2], p[2:])[0]
                     - arma_cost_and_gradient(y, q[:2], q[2:])[0]) / (2 * h)
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-9 * np.abs(g).max())


def test_fit_arma_input_checks():
    with pytest.raises(DegenerateInputError):
        fit_arma(np.zeros(50), 1, 1)
    with pytest.raises(ValueError):
        fit_arma(np.ones(3), 1, 1)


def test_fit_arma_white_noise_overfit_is_reported():
    y = np.random.default_rng(0).standard_normal(200)
    fit = fit_arma(y, 2, 2)
    assert math.isfinite(fit.sigma2) and fit.sigma2 > 0
    assert fit.model is not None or "near pole-zero cancellation" in fit.notes

