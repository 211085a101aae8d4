import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from otoclab import analysis as an
from otoclab.errors import CalibrationError, ContractError, DegenerateError, FitError
from otoclab.quantum import OTOCSeries


def _series(t, c):
    return OTOCSeries(np.asarray(t, dtype=float), np.asarray(c, dtype=float))


def test_fit_recovers_noiseless_model():
    t = np.linspace(0, 3, 40)
    fit = an.fit_exponential(_series(t, 0.3 + 2 * np.exp(1.4 * t)), an.FitWindow(0, 3))
    assert fit.offset == pytest.approx(0.3, abs=1e-8)
    assert fit.amplitude == pytest.approx(2.0, abs=1e-8)
    assert fit.rate_c == pytest.approx(1.4, abs=1e-8)
    assert fit.lambda_q == pytest.approx(0.7, abs=1e-8)
    assert fit.rel_residual < 1e-10


def test_fit_with_multiplicative_noise():
    rng = np.random.default_rng(3)
    t = np.linspace(0, 3, 60)
    clean = 0.3 + 2 * np.exp(1.4 * t)
    rates = []
    for _ in range(100):
        noisy = clean * (1 + 0.01 * rng.normal(size=t.size))
        rates.append(an.fit_exponential(_series(t, noisy), an.FitWindow(0, 3)).rate_c)
    assert np.max(np.abs(np.array(rates) / 1.4 - 1)) <= 0.05


def test_fit_needs_enough_points():
    t = np.linspace(0, 3, 40)
    series = _series(t, np.exp(t))
    with pytest.raises(ContractError):
        an.fit_exponential(series, an.FitWindow(0.0, 0.2))


def test_fit_window_contract():
    with pytest.raises(ContractError):
        an.FitWindow(2.0, 1.0)
    with pytest.raises(ContractError):
        an.FitWindow(-1.0, 1.0)
    with pytest.raises(ContractError):
        an.FitWindow(0.0, 1.0, "guessed")


@given(st.floats(min_value=1e-3, max_value=1e6), st.floats(min_value=0.1, max_value=2.0))
def test_scale_covariance(k, rate):
    t = np.linspace(0, 4, 50)
    c = 1.0 + 0.5 * np.exp(rate * t) + 0.05 * np.sin(7 * t)
    w = an.FitWindow(0, 4)
    base = an.fit_exponential(_series(t, c), w)
    scaled = an.fit_exponential(_series(t, k * c), w)
    assert scaled.rate_c == pytest.approx(base.rate_c, abs=1e-10)
    assert scaled.offset == pytest.approx(k * base.offset, rel=1e-8, abs=1e-12)
    assert scaled.amplitude == pytest.approx(k * base.amplitude, rel=1e-8)


def _three_phase(t, rate=0.8, t_on=2.0, t_sat=6.0):
    """Polynomial start, exponential middle, flat plateau."""
    c_on = 0.5 * t_on**2
    exp_part = c_on * np.exp(rate * (t - t_on))
    c = np.where(t < t_on, 0.5 * t**2 + 1e-6, exp_part)
    return np.where(t > t_sat, c_on * np.exp(rate * (t_sat - t_on)), c)


def test_calibration_finds_window_inside_exponential_phase():
    t = np.linspace(0, 12, 481)
    series = _series(t, _three_phase(t))
    grid = an.window_grid(6.0, 0.8)
    w = an.calibrate_window(series, 0.4, grid)
    assert w.source == "calibrated"
    assert 2.0 - 1e-9 <= w.t0 and w.t1 <= 6.0 + 1e-9


def test_calibration_fails_on_plateau():
    t = np.linspace(0, 12, 481)
    with pytest.raises(CalibrationError):
        an.calibrate_window(_series(t, np.full_like(t, 3.0)), 0.4, an.window_grid(6.0, 0.8))


def test_best_window_lies_in_exponential_phase():
    t = np.linspace(0, 12, 481)
    fit = an.best_window_fit(_series(t, _three_phase(t)), an.window_grid(8.0, 0.8))
    assert 2.0 - 1e-9 <= fit.window[0] and fit.window[1] <= 6.0 + 1e-9
    assert fit.rate_c == pytest.approx(0.8, rel=1e-6)


def test_best_window_on_pure_exponential_is_window_independent():
    t = np.linspace(0, 10, 400)
    series = _series(t, 0.2 + np.exp(0.9 * t))
    grid = an.window_grid(5.0, 0.9)
    rates = [an.fit_exponential(series, w).rate_c for w in grid]
    assert np.ptp(rates) <= 1e-6
    assert an.best_window_fit(series, grid).rate_c == pytest.approx(0.9, abs=1e-6)


def test_best_window_errors():
    t = np.linspace(0, 10, 400)
    with pytest.raises(ContractError):
        an.best_window_fit(_series(t, np.exp(t)), [])
    with pytest.raises(FitError):
        an.best_window_fit(_series(t, np.full_like(t, 2.0)), an.window_grid(5.0, 0.9))


def test_window_grid_shape():
    grid = an.window_grid(10.0, 0.5)
    assert len(grid) == 20 * 4
    assert grid[0].t0 == 0.0 and grid[-1].t0 == pytest.approx(10.0)
    assert {round(w.t1 - w.t0, 12) for w in grid} == {1.0, 2.0, 3.0, 4.0}


def test_local_instability_window():
    w = an.local_instability_window(0.5, 60)
    assert (w.t0, w.t1) == pytest.approx((2.0, 2 * np.log(60)))
    assert w.source == "local-instability"


def test_bootstrap_rates_spread():
    rng = np.random.default_rng(0)
    t = np.linspace(0, 3, 60)
    c = (0.3 + 2 * np.exp(1.4 * t)) * (1 + 0.01 * rng.normal(size=t.size))
    rates = an.bootstrap_rates(_series(t, c), an.FitWindow(0, 3), 200, 1)
    assert rates.shape == (200,)
    assert 0 < np.nanstd(rates) < 0.05
    np.testing.assert_array_equal(rates, an.bootstrap_rates(_series(t, c), an.FitWindow(0, 3), 200, 1))


@given(st.floats(min_value=-3, max_value=3), st.floats(min_value=-3, max_value=3))
def test_hypothesis_fit_exact_recovery(a, b):
    lam_L = np.array([0.05, 0.1, 0.2, 0.25, 0.3])
    lam_loc = np.array([0.3, 0.2, 0.45, 0.1, 0.6])
    triples = list(zip(range(5), lam_L, lam_loc, a * lam_L + b * lam_loc))
    fit = an.hypothesis_fit(triples)
    assert fit.coef_a == pytest.approx(a, abs=1e-10)
    assert fit.coef_b == pytest.approx(b, abs=1e-10)
    assert fit.sum_ab == pytest.approx(a + b, abs=1e-10)


def test_hypothesis_fit_restricted_residuals_dominate():
    rng = np.random.default_rng(5)
    lam_L = rng.uniform(0.02, 0.1, 8)
    lam_loc = rng.uniform(0.1, 0.3, 8)
    y = 0.5 * lam_L + 1.5 * lam_loc + 0.01 * rng.normal(size=8)
    fit = an.hypothesis_fit(list(zip(range(8), lam_L, lam_loc, y)))
    for r in fit.restricted.values():
        assert fit.rel_residual <= r["rel_residual"]


def test_hypothesis_fit_degenerate_and_small():
    with pytest.raises(DegenerateError):
        an.hypothesis_fit([(0, 0.1, 0.2, 0.5), (1, 0.1, 0.2, 0.6), (2, 0.1, 0.2, 0.4)])
    with pytest.raises(ContractError):
        an.hypothesis_fit([(0, 0.1, 0.2, 0.5), (1, 0.2, 0.1, 0.6)])


def test_hypothesis_fit_excludes_regular_points():
    triples = [(0, 0.001, 0.002, 0.0), (1, 0.1, 0.2, 0.35), (2, 0.2, 0.3, 0.55), (3, 0.05, 0.4, 0.65)]
    fit = an.hypothesis_fit(triples)
    assert len(fit.excluded) == 1 and len(fit.triples) == 3


def test_hypothesis_fit_bootstrap_errors():
    lam_L = np.array([0.05, 0.1, 0.2, 0.25])
    lam_loc = np.array([0.3, 0.2, 0.45, 0.1])
    y = 0.5 * lam_L + 1.5 * lam_loc
    rng = np.random.default_rng(2)
    samples = y[:, None] * (1 + 0.02 * rng.normal(size=(4, 300)))
    fit = an.hypothesis_fit(list(zip(range(4), lam_L, lam_loc, y)), samples)
    assert 0 < fit.stderr_a < 1 and 0 < fit.stderr_b < 1


def test_decomposition_report_limits():
    def fit_with(a, b):
        lam_L, lam_loc = np.array([0.1, 0.2, 0.3]), np.array([0.3, 0.1, 0.5])
        return an.hypothesis_fit(list(zip(range(3), lam_L, lam_loc, a * lam_L + b * lam_loc)))

    avg = an.ab_decomposition_report(fit_with(1, 1))
    assert avg["decomposition"] == pytest.approx((1.0, 0.0))
    assert "average" in avg["flags"]
    lyap = an.ab_decomposition_report(fit_with(2, 0))
    assert "pure-lyapunov" in lyap["flags"]
    table_row = an.ab_decomposition_report(fit_with(0.48, 1.55))
    assert table_row["sum_ab"] == pytest.approx(2.03)
    for row in table_row["rows"]:
        assert row["mean_term"] + row["remainder"] == pytest.approx(row["two_lambda_q"])


def test_fit_record_is_json(tmp_path):
    t = np.linspace(0, 3, 40)
    fit = an.fit_exponential(_series(t, 0.3 + 2 * np.exp(1.4 * t)), an.FitWindow(0, 3, "scanned"))
    rec = an.fit_record(fit, config_hash="abc", seed=1, window_source="scanned")
    an.write_json(rec, tmp_path / "fit.json")
    back = json.loads((tmp_path / "fit.json").read_text())
    assert back["provenance"]["config_hash"] == "abc"
    assert back["lambda_q"] == pytest.approx(0.7)


def test_power_combination_prefers_linear():
    lam_L = np.array([0.05, 0.1, 0.2, 0.25, 0.3])
    lam_loc = np.array([0.3, 0.2, 0.45, 0.1, 0.6])
    triples = list(zip(range(5), lam_L, lam_loc, 0.5 * lam_L + 1.5 * lam_loc))
    assert an.power_combination_residual(triples, 1, 1) < 1e-12
    assert an.power_combination_residual(triples, 2, 1) > 1e-3
