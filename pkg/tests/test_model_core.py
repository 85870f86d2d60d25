from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.signal import lfilter

from stoc_order.errors import AdmissibilityError, DegeneracyError
from stoc_order.estimators import arma_cost_and_gradient
from stoc_order.model_core import (
    CoeffModel, RootConfig, RootModel, TimeSeries, backward_error, coeffs_to_roots,
    innovations, load_model, load_series, log_likelihood, model_from_dict,
    prediction_errors, profile_log_likelihood, roots_to_coeffs, save_model, save_series,
    simulate)

from conftest import random_root_model


# --- types -----------------------------------------------------------------

def test_coeff_model_rejects_unstable_and_bad_variance():
    with pytest.raises(AdmissibilityError):
        CoeffModel([-1.0])
    with pytest.raises(AdmissibilityError):
        CoeffModel([], [2.5])
    with pytest.raises(AdmissibilityError):
        CoeffModel([0.5], [], sigma2=0.0)
    with pytest.raises(AdmissibilityError):
        CoeffModel([float("nan")])


def test_coeff_model_rejects_cancellation():
    with pytest.raises(DegeneracyError):
        CoeffModel([-0.5], [-0.5])


def test_coeff_model_orders():
    mdl = CoeffModel([0.64, 0.7], [0.8])
    assert (mdl.n, mdl.m, mdl.k) == (2, 1, 4)
    assert mdl.ar_poly.tolist() == [1.0, 0.64, 0.7]


def test_root_config_parity_and_defaults():
    with pytest.raises(AdmissibilityError):
        RootConfig(3, 0, 0, 0)
    assert RootConfig.default(3).key == (3, 0, 1, 0)
    assert RootConfig.default(4, 1).key == (4, 1, 0, 1)
    assert RootConfig(3, 2, 1, 0).kinds() == ["real", "mag", "phase", "mag", "phase"]


def test_index_sets_follow_parameter_layout():
    sets = RootConfig(3, 3, 1, 1).index_sets()
    assert sets == {"P_rho": [0], "P_mu": [1], "P_phi": [2],
                    "Z_rho": [3], "Z_mu": [4], "Z_phi": [5]}
    assert RootConfig(3, 3, 1, 1).signs().tolist() == [-1, -1, -1, 1, 1, 1]


def test_configs_for_enumerates_every_split():
    keys = [c.key for c in RootConfig.configs_for(4, 1)]
    assert keys == [(4, 1, 0, 1), (4, 1, 2, 1), (4, 1, 4, 1)]


def test_root_model_validation():
    with pytest.raises(AdmissibilityError):
        RootModel(real_poles=[1.0])
    with pytest.raises(AdmissibilityError):
        RootModel(complex_poles=[(0.5, 0.0)])
    with pytest.raises(AdmissibilityError):
        RootModel(complex_poles=[(1.0, 1.0)])
    with pytest.raises(DegeneracyError):
        RootModel(real_poles=[0.3, 0.3])
    with pytest.raises(DegeneracyError):
        RootModel(real_poles=[0.3], real_zeros=[0.3])


def test_theta_round_trip():
    rm = RootModel([0.2], [(0.5, 1.0)], [-0.4], [(0.7, 2.0)], sigma2=2.0)
    assert rm.theta.tolist() == [0.2, 0.5, 1.0, -0.4, 0.7, 2.0]
    again = RootModel.from_theta(rm.theta, rm.config, 2.0)
    assert again == rm


def test_time_series_is_read_only_and_finite():
    ts = TimeSeries([1.0, 2.0])
    with pytest.raises(ValueError):
        ts.values[0] = 5.0
    with pytest.raises(ValueError):
        TimeSeries([1.0, float("inf")])


# --- conversions -----------------------------------------------------------

def test_vieta_single_real_pole():
    assert roots_to_coeffs(RootModel(real_poles=[0.5])).a == (-0.5,)


def test_vieta_complex_pair():
    a = roots_to_coeffs(RootModel(complex_poles=[(0.9, math.pi / 2)])).a
    np.testing.assert_allclose(a, [0.0, 0.81], atol=1e-15)
    assert all(isinstance(v, float) for v in a)


def test_arma_model1_roots():
    rm = coeffs_to_roots(CoeffModel([-0.5], [0.8]))
    assert rm.real_poles == pytest.approx((0.5,))
    assert rm.real_zeros == pytest.approx((-0.8,))


def test_complex_pair_from_coeffs():
    rm = coeffs_to_roots(CoeffModel([0.0, 0.81]))
    (r, phi), = rm.complex_poles
    assert r == pytest.approx(0.9, abs=1e-14)
    assert phi == pytest.approx(math.pi / 2, abs=1e-14)


def test_arma_model2_quadratic_formula_oracle():
    rm = coeffs_to_roots(CoeffModel([0.64, 0.7], [0.8]))
    (r, phi), = rm.complex_poles
    assert r == pytest.approx(math.sqrt(0.7), abs=1e-14)
    assert -2 * r * math.cos(phi) == pytest.approx(0.64, abs=1e-14)
    back = roots_to_coeffs(rm)
    np.testing.assert_allclose(back.a, [0.64, 0.7], atol=1e-10)
    np.testing.assert_allclose(back.b, [0.8], atol=1e-10)


def test_coeffs_to_roots_orders_canonically():
    rm = RootModel(real_poles=[0.6, -0.2], complex_poles=[(0.8, 2.0), (0.5, 0.4)])
    got = coeffs_to_roots(roots_to_coeffs(rm))
    assert got.real_poles == pytest.approx((-0.2, 0.6))
    assert [p[1] for p in got.complex_poles] == pytest.approx([0.4, 2.0])


def test_coeffs_to_roots_backward_error(rng):
    for _ in range(50):
        rm = random_root_model(rng, 4, 2)
        cm = roots_to_coeffs(rm)
        got = coeffs_to_roots(cm)
        assert backward_error(cm.a, got.poles()) < 1e-8
        assert backward_error(cm.b, got.zeros()) < 1e-8


def test_repeated_root_is_degenerate():
    with pytest.raises(DegeneracyError):
        coeffs_to_roots(CoeffModel([-1.0, 0.25]))   # (1 - 0.5 q^-1)^2


@st.composite
def _root_models(draw):
    n = draw(st.integers(0, 6))
    m = draw(st.integers(0, 6 - n))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    return random_root_model(np.random.default_rng(seed), n, m)


@given(_root_models())
def test_vieta_round_trip_property(rm):
    cm = roots_to_coeffs(rm)
    back = roots_to_coeffs(coeffs_to_roots(cm))
    np.testing.assert_allclose(back.a, cm.a, atol=1e-10)
    np.testing.assert_allclose(back.b, cm.b, atol=1e-10)


# --- simulation ------------------------------------------------------------

def test_white_noise_simulation_is_the_innovation_stream():
    ts = simulate(CoeffModel(), 50, 0, seed=11)
    np.testing.assert_array_equal(ts.values, innovations(50, 1.0, 11))


def test_simulation_is_deterministic_and_drops_burn_in():
    mdl = CoeffModel([-0.5], [0.3])
    a = simulate(mdl, 300, 100, seed=5)
    b = simulate(mdl, 300, 100, seed=5)
    full = simulate(mdl, 300, 0, seed=5)
    assert len(a) == 200 and a.burn_in == 100
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.values, full.values[100:])
    with pytest.raises(ValueError):
        simulate(mdl, 100, 100)


def test_ar1_lag_one_autocorrelation():
    y = simulate(CoeffModel([-0.5]), 100_000, 100, seed=1).values
    y = y - y.mean()
    rho = float(y[1:] @ y[:-1]) / float(y @ y)
    assert rho == pytest.approx(0.5, abs=0.02)


def test_arma11_variance_oracle():
    # (1 + 0.3 q^-1) y = (1 + 0.5 q^-1) e has its pole at -0.3
    a, b = 0.3, 0.5
    g = -a
    var = (1 + b * b + 2 * g * b) / (1 - g * g)
    y = simulate(CoeffModel([a], [b]), 200_000, 100, seed=2).values
    assert y.var() == pytest.approx(var, rel=0.03)


def test_simulated_series_are_stationary(rng):
    for _ in range(5):
        rm = random_root_model(rng, 3, 2, max_mag=0.9)
        cm = roots_to_coeffs(rm)
        y = simulate(cm, 10_100, 100, seed=int(rng.integers(1 << 30))).values
        # standard deviation of the sample mean uses the long-run variance
        long_run_sd = abs(sum(cm.ma_poly) / sum(cm.ar_poly))
        assert abs(y.mean()) < 4 * long_run_sd / math.sqrt(len(y))
        assert np.all(np.isfinite(y))


# --- prediction errors and likelihood -----------------------------------------

def test_ar_prediction_errors_equal_fir_filtering(rng):
    y = rng.standard_normal(200)
    a = [0.3, -0.2, 0.1]
    e, s2 = prediction_errors(y, CoeffModel(a))
    direct = y.copy()
    for i, ai in enumerate(a, start=1):
        direct[i:] += ai * y[:-i]
    np.testing.assert_array_equal(e, lfilter(np.r_[1.0, a], [1.0], y))
    np.testing.assert_allclose(e, direct, atol=1e-14)
    assert s2 == pytest.approx(np.mean(direct ** 2))


def test_ma1_impulse_residuals():
    y = np.zeros(6)
    y[0] = 1.0
    e, _ = prediction_errors(y, CoeffModel([], [0.8]))
    np.testing.assert_allclose(e, [(-0.8) ** k for k in range(6)], atol=1e-15)


def test_residuals_recover_innovations():
    mdl = CoeffModel([0.64, 0.7], [0.8])
    y = simulate(mdl, 10_000, 0, seed=9).values
    e, _ = prediction_errors(y, mdl)
    assert np.corrcoef(e, innovations(10_000, 1.0, 9))[0, 1] > 0.99


def test_prediction_errors_reject_noninvertible_b():
    class Fake:
        a, b = (), (1.5,)

        def zeros(self):
            return np.array([-1.5])
    with pytest.raises(AdmissibilityError):
        prediction_errors([1.0, 2.0], Fake())


def test_log_likelihood_single_zero_sample():
    assert log_likelihood([0.0], CoeffModel()) == pytest.approx(-0.5 * math.log(2 * math.pi))


def test_profile_likelihood_identity(rng):
    y = rng.standard_normal(80)
    mdl = CoeffModel([0.2], [0.4])
    _, s2 = prediction_errors(y, mdl)
    assert log_likelihood(y, mdl, sigma2=s2) == pytest.approx(
        -0.5 * 80 * math.log(2 * math.pi * math.e * s2), rel=1e-13)
    assert profile_log_likelihood(y, mdl) == pytest.approx(log_likelihood(y, mdl, s2), rel=1e-13)


def test_log_likelihood_gradient_matches_filter_gradient(rng):
    y = simulate(CoeffModel([-0.5], [0.8]), 300, 100, seed=4).values
    a, b = np.array([-0.45, 0.1]), np.array([0.7])
    N = len(y)
    _, grad = arma_cost_and_gradient(y, a, b)
    # with sigma2 = 1, d lnL = -(N/2) d cost
    theta = np.r_[a, b]
    h = 1e-6
    for i in range(3):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        fd = (log_likelihood(y, CoeffModel(tp[:2], tp[2:]), 1.0)
              - log_likelihood(y, CoeffModel(tm[:2], tm[2:]), 1.0)) / (2 * h)
        assert fd == pytest.approx(-0.5 * N * grad[i], rel=1e-5)


def test_likelihood_invariant_under_root_representation(rng):
    y = rng.standard_normal(150)
    for _ in range(10):
        rm = random_root_model(rng, 3, 2, max_mag=0.9)
        cm = roots_to_coeffs(rm)
        cm2 = roots_to_coeffs(coeffs_to_roots(cm))
        assert abs(log_likelihood(y, cm) - log_likelihood(y, cm2)) < 1e-10


# --- files -----------------------------------------------------------------

def test_model_files_round_trip(tmp_path):
    cm = CoeffModel([0.64, 0.7], [0.8], 1.5)
    rm = RootModel([0.5], [(0.9, 1.2)], [], [], 1.0)
    for mdl in (cm, rm):
        save_model(mdl, tmp_path / "m.json")
        assert load_model(tmp_path / "m.json") == mdl


def test_model_from_dict_checks_declared_orders():
    with pytest.raises(ValueError):
        model_from_dict({"n": 2, "a": [0.1]})
    with pytest.raises(ValueError):
        model_from_dict({"sigma2": 1.0})
    d = json.loads('{"complex_poles": [[0.9, 1.5707963267948966]]}')
    assert isinstance(model_from_dict(d), RootModel)


def test_series_files_round_trip(tmp_path):
    y = np.array([0.1, -2.5, 1e-300, 3.0])
    save_series(y, tmp_path / "y.txt")
    np.testing.assert_array_equal(load_series(tmp_path / "y.txt").values, y)
