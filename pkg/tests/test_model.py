import math
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lz_decoherence.constants import NoiseModel, RegimeQuadrant, ReportFlag
from lz_decoherence.errors import DomainError, RegimeMismatchError
from lz_decoherence.model import (
    NoiseSpec,
    SystemParams,
    ThermalParams,
    TimeGrid,
    classify_regime,
    crossing_avoidance_rate,
    excitation_rate_long_corr,
    excitation_rate_short_corr,
    int_below,
    lz_failure_probability,
    lz_success_probability,
    n_min_thermal,
    noise_excitation_probability,
    p_failure_long_corr,
    p_failure_short_corr,
    photon_order,
    predict,
    predict_high_amp,
    predict_low_amp_long_corr,
    predict_low_amp_short_corr,
    predicted_failure,
    strong_dephasing_success_probability,
    thermal_floor,
    thermal_occupation,
)


def ou(amplitude, tau=None, omega_max=None, **kwargs):
    if omega_max is not None:
        return NoiseSpec.from_omega_max(
            omega_max, model=NoiseModel.ornstein_uhlenbeck, amplitude=amplitude, **kwargs
        )
    return NoiseSpec(model=NoiseModel.ornstein_uhlenbeck, amplitude=amplitude, tau=tau, **kwargs)


# Domain types


def test_system_params_validation():
    with pytest.raises(DomainError):
        SystemParams(delta=-1.0, v=1.0)
    with pytest.raises(DomainError):
        SystemParams(delta=1.0, v=0.0)
    with pytest.raises(DomainError):
        SystemParams(delta=1.0, v=1.0, t_start=1.0, t_end=2.0)
    with pytest.raises(DomainError):
        SystemParams(delta=1.0, v=1.0, t_start=-1.0)


def test_with_sweep_rate_drops_window():
    system = SystemParams(delta=1.0, v=1.0, t_start=-5.0, t_end=5.0)
    faster = system.with_sweep_rate(2.0)
    assert faster.v == 2.0
    assert not faster.has_window
    assert system.has_window


def test_noise_spec_validation():
    with pytest.raises(DomainError):
        ou(-0.1, tau=1.0)
    with pytest.raises(DomainError):
        ou(0.1, tau=0.0)
    with pytest.raises(DomainError):
        ou(0.1, tau=1.0, channels=0)


def test_noise_spec_total_amplitude_adds_channels_in_quadrature():
    spec = ou(0.5, tau=1.0, channels=16)
    assert spec.total_amplitude == pytest.approx(2.0)
    assert ou(0.5, tau=1.0).total_amplitude == 0.5


def test_noise_spec_from_omega_max():
    spec = ou(0.1, omega_max=10.0)
    assert spec.tau == pytest.approx(0.1)
    assert spec.omega_max == pytest.approx(10.0)


def test_silent_noise():
    assert NoiseSpec().is_silent
    assert ou(0.0, tau=1.0).is_silent
    assert not ou(0.1, tau=1.0).is_silent


def test_time_grid():
    grid = TimeGrid(-1.0, 1.0, 4)
    assert grid.dt == pytest.approx(0.5)
    assert grid.n_points == 5
    np.testing.assert_allclose(grid.times, [-1.0, -0.5, 0.0, 0.5, 1.0])
    with pytest.raises(DomainError):
        TimeGrid(1.0, 1.0, 4)
    with pytest.raises(DomainError):
        TimeGrid(0.0, 1.0, 0)


def test_thermal_params_validation():
    with pytest.raises(DomainError):
        ThermalParams(0.0)


# Closed-form sweep probabilities


def test_lz_success_probability_examples():
    assert lz_success_probability(1.0, math.pi / 2) == pytest.approx(1.0 - math.exp(-1.0))
    assert lz_success_probability(1.0, math.pi / 2) == pytest.approx(0.632121, abs=1e-6)
    assert lz_success_probability(0.0, 3.0) == 0.0
    assert lz_success_probability(1.0, math.pi / (2.0 * math.log(2.0))) == pytest.approx(0.5)


def test_lz_success_probability_rejects_bad_sweep_rate():
    with pytest.raises(DomainError):
        lz_success_probability(1.0, 0.0)
    with pytest.raises(DomainError):
        lz_success_probability(1.0, -1.0)


def test_lz_failure_complements_success():
    assert lz_failure_probability(1.0, 0.7) + lz_success_probability(1.0, 0.7) == pytest.approx(1.0)


@given(
    delta=st.floats(0.05, 5.0),
    v1=st.floats(0.01, 100.0),
    v2=st.floats(0.01, 100.0),
)
def test_lz_success_decreases_with_sweep_rate(delta, v1, v2):
    slow, fast = min(v1, v2), max(v1, v2)
    assert lz_success_probability(delta, slow) >= lz_success_probability(delta, fast)


def test_lz_success_limits():
    assert lz_success_probability(1.0, 1e-3) == pytest.approx(1.0)
    assert lz_success_probability(1.0, 1e9) == pytest.approx(0.0, abs=1e-8)


def test_strong_dephasing_success_saturates_at_half():
    assert strong_dephasing_success_probability(1.0, 0.01) == pytest.approx(0.5)
    assert strong_dephasing_success_probability(1.0, 100.0) < 0.5
    assert strong_dephasing_success_probability(1.0, 1.0) == pytest.approx(
        0.5 * (1.0 - math.exp(-math.pi))
    )


# Regime classification


def test_int_below_is_strict():
    assert int_below(3.0) == 2
    assert int_below(2.5) == 2
    assert int_below(0.5) == 0
    assert int_below(-0.5) == -1
    with pytest.raises(DomainError):
        int_below(math.inf)


def test_photon_order():
    assert photon_order(1.0, 0.4) == 3
    assert photon_order(1.0, 1.0) == 1


def test_classify_regime_examples():
    assert classify_regime(ou(0.1, omega_max=10.0), 1.0) == RegimeQuadrant.low_amp_short_corr
    assert classify_regime(ou(5.0, omega_max=0.01), 1.0) == RegimeQuadrant.high_amp_long_corr
    assert classify_regime(ou(0.2, omega_max=0.4), 1.0) == RegimeQuadrant.low_amp_long_corr
    assert classify_regime(ou(5.0, omega_max=10.0), 1.0) == RegimeQuadrant.high_amp_short_corr


def test_classify_regime_tie_breaks():
    assert classify_regime(ou(1.0, tau=1.0), 1.0) == RegimeQuadrant.high_amp_long_corr


def test_classify_regime_rejects_zero_gap():
    with pytest.raises(DomainError):
        classify_regime(ou(0.1, tau=1.0), 0.0)


def test_classify_regime_uses_total_amplitude():
    spec = ou(0.3, omega_max=10.0, channels=16)
    assert classify_regime(spec, 1.0) == RegimeQuadrant.high_amp_short_corr


@given(
    amplitude=st.floats(0.0, 100.0),
    tau=st.floats(1e-3, 1e3),
    delta=st.floats(1e-3, 100.0),
)
def test_classify_regime_is_total(amplitude, tau, delta):
    assert classify_regime(ou(amplitude, tau=tau), delta) in set(RegimeQuadrant)


# Low-amplitude estimators


def test_predict_low_amp_short_corr_example():
    report = predict_low_amp_short_corr(ou(0.1, omega_max=10.0), 1.0)
    assert report.quadrant == RegimeQuadrant.low_amp_short_corr
    assert report.excitation_rate == pytest.approx(0.001)
    assert report.v_optimal == pytest.approx(1.0 / math.log(1000.0))
    assert report.v_optimal == pytest.approx(0.14476, rel=1e-4)
    assert report.p_failure == pytest.approx(0.001)
    assert report.flags == set()


def test_predict_low_amp_short_corr_noise_probability():
    report = predict_low_amp_short_corr(ou(0.1, omega_max=10.0), 1.0, v=0.1)
    assert report.p_noise == pytest.approx(0.01)


def test_predict_low_amp_short_corr_noiseless():
    report = predict_low_amp_short_corr(ou(0.0, omega_max=10.0), 1.0)
    assert report.excitation_rate == 0.0
    assert report.p_failure == 0.0
    assert report.v_optimal is None
    assert ReportFlag.noiseless in report.flags


def test_predict_low_amp_short_corr_marginal_optimum_is_outside_validity():
    # omega_max delta / A^2 = 1.1 / 0.81, between 1 and e
    report = predict_low_amp_short_corr(ou(0.9, omega_max=1.1), 1.0)
    assert report.v_optimal is None
    assert ReportFlag.v_optimal_above_gap_scale in report.flags
    assert ReportFlag.log_argument_invalid not in report.flags
    assert any("validity" in line for line in report.diagnostics)


def test_predict_low_amp_short_corr_just_above_e_keeps_optimum():
    # omega_max delta / A^2 = 1.2 / 0.4 = 3 > e
    report = predict_low_amp_short_corr(ou(math.sqrt(0.4), omega_max=1.2), 1.0)
    assert report.v_optimal == pytest.approx(1.0 / math.log(3.0))
    assert ReportFlag.v_optimal_above_gap_scale not in report.flags


def test_predict_clamps_and_flags():
    report = predict_low_amp_short_corr(ou(0.9, omega_max=1.1), 1.0, v=0.01)
    assert report.p_noise == 1.0
    assert ReportFlag.clamped in report.flags
    assert any("p_noise" in line for line in report.diagnostics)


def test_predict_low_amp_long_corr_example():
    report = predict_low_amp_long_corr(ou(0.2, omega_max=0.4), 1.0)
    assert report.photon_order == 3
    assert report.excitation_rate == pytest.approx(3.2e-5)
    assert report.p_failure == pytest.approx(3.2e-5)
    assert report.v_optimal == pytest.approx(1.0 / math.log(0.4 / 0.2**7))
    assert report.v_optimal == pytest.approx(0.09663, rel=1e-3)


def test_predict_low_amp_long_corr_invalid_logarithm():
    # omega_max delta^4 / A^5 = 0.5 / 0.9^5 < 1
    report = predict_low_amp_long_corr(ou(0.9, omega_max=0.5), 1.0)
    assert report.v_optimal is None
    assert ReportFlag.log_argument_invalid in report.flags


def test_long_corr_at_single_photon_matches_short_corr_formulas():
    amplitude, delta = 0.3, 1.0
    long_rate = excitation_rate_long_corr(amplitude, delta, delta, 1)
    short_rate = excitation_rate_short_corr(amplitude, delta)
    assert long_rate == pytest.approx(short_rate * amplitude / delta)
    assert p_failure_long_corr(amplitude, delta, delta, 1) == pytest.approx(
        p_failure_short_corr(amplitude, delta, delta) * amplitude / delta
    )


@given(
    a1=st.floats(0.01, 0.99),
    a2=st.floats(0.01, 0.99),
    omega_max=st.floats(1.01, 100.0),
)
def test_short_corr_failure_increases_with_amplitude(a1, a2, omega_max):
    low, high = min(a1, a2), max(a1, a2)
    assert p_failure_short_corr(low, omega_max, 1.0) <= p_failure_short_corr(high, omega_max, 1.0)


@given(
    amplitude=st.floats(0.01, 0.99),
    w1=st.floats(0.05, 1.0),
    w2=st.floats(0.05, 1.0),
)
def test_long_corr_failure_decreases_with_omega_max_at_fixed_order(amplitude, w1, w2):
    n = 3
    low, high = min(w1, w2), max(w1, w2)
    assert p_failure_long_corr(amplitude, high, 1.0, n) <= p_failure_long_corr(
        amplitude, low, 1.0, n
    )


def test_regime_specific_predictor_rejects_other_quadrants():
    with pytest.raises(RegimeMismatchError):
        predict_low_amp_short_corr(ou(5.0, tau=10.0), 1.0)
    with pytest.raises(RegimeMismatchError):
        predict_high_amp(ou(0.1, omega_max=10.0), 1.0)


def test_noise_excitation_and_predicted_failure():
    noise = ou(0.1, omega_max=10.0)
    assert noise_excitation_probability(noise, 1.0, 0.1) == pytest.approx(0.01)
    expected = 0.01 + math.exp(-math.pi / 0.2)
    assert predicted_failure(noise, 1.0, 0.1) == pytest.approx(expected)


def test_predicted_failure_minimum_tracks_optimal_sweep():
    noise = ou(0.1, omega_max=10.0)
    v_grid = np.geomspace(0.01, 10.0, 400)
    failures = [predicted_failure(noise, 1.0, v) for v in v_grid]
    v_best = v_grid[int(np.argmin(failures))]
    v_optimal = predict(noise, 1.0).v_optimal
    assert v_optimal / 3.0 <= v_best <= 3.0 * v_optimal


# High-amplitude estimators


def test_predict_high_amp_example():
    report = predict_high_amp(ou(5.0, tau=10.0), 1.0)
    assert report.quadrant == RegimeQuadrant.high_amp_long_corr
    assert report.p_env_lz == pytest.approx(math.exp(-math.pi))
    assert report.p_env_lz == pytest.approx(0.043214, rel=1e-5)
    assert report.v_env == pytest.approx(0.5)
    assert report.environment_criterion == pytest.approx(math.pi)
    assert report.p_failure == report.p_env_lz
    assert report.v_optimal is None
    assert ReportFlag.negligible_environment_effect not in report.flags


def test_predict_high_amp_crossing_count():
    report = predict_high_amp(ou(5.0, tau=100.0), 1.0, v=0.1)
    assert report.crossing_count == pytest.approx(0.5)


def test_predict_high_amp_negligible_flag_threshold():
    noise = ou(1.0, tau=100.0)
    assert ReportFlag.negligible_environment_effect in predict_high_amp(noise, 1.0).flags
    report = predict_high_amp(noise, 1.0, negligible_threshold=1000.0)
    assert ReportFlag.negligible_environment_effect not in report.flags


def test_predict_high_amp_avoidance_flag():
    noise = ou(5.0, tau=1.0)
    assert crossing_avoidance_rate(noise) == pytest.approx(5.0)
    assert ReportFlag.avoidance_needs_fast_sweep in predict_high_amp(noise, 1.0).flags


def test_predict_high_amp_short_corr_failure():
    noise = ou(5.0, tau=0.1)
    assert predict_high_amp(noise, 1.0).p_failure == 0.5
    report = predict_high_amp(noise, 1.0, v=1.0)
    assert report.p_failure == pytest.approx(1.0 - 0.5 * (1.0 - math.exp(-math.pi)))


def test_predict_high_amp_adiabatic_limit():
    assert predict_high_amp(ou(5.0, tau=1e4), 1.0).p_env_lz == pytest.approx(0.0, abs=1e-12)


# Thermal formulas


def test_thermal_examples():
    thermal = ThermalParams(0.5)
    assert thermal_occupation(1.0, thermal) == pytest.approx(1.0 / (1.0 + math.exp(2.0)))
    assert thermal_occupation(1.0, thermal) == pytest.approx(0.11920, abs=1e-5)
    assert thermal_floor(1.0, thermal) == pytest.approx(0.88080, abs=1e-5)
    assert thermal_occupation(0.0, thermal) == 0.5
    assert thermal_floor(0.0, thermal) == 0.5


def test_thermal_zero_temperature_limit():
    cold = ThermalParams(1e-3)
    assert thermal_occupation(1.0, cold) == 0.0
    assert thermal_floor(1.0, cold) == 1.0


@given(delta=st.floats(0.0, 50.0), k_b_t=st.floats(1e-3, 50.0))
def test_thermal_occupation_and_floor_sum_to_one(delta, k_b_t):
    thermal = ThermalParams(k_b_t)
    total = thermal_occupation(delta, thermal) + thermal_floor(delta, thermal)
    assert total == pytest.approx(1.0, abs=1e-12)


def test_n_min_thermal_examples():
    assert n_min_thermal(1.0, ThermalParams(0.3)) == 3
    assert n_min_thermal(1.0, ThermalParams(2.0)) == 1
    assert n_min_thermal(1.0, ThermalParams(1.0)) == 1


def test_n_min_thermal_saturates_near_zero_temperature():
    assert n_min_thermal(1.0, ThermalParams(1e-320)) == sys.maxsize
    assert n_min_thermal(1.0, ThermalParams(1e-300)) == sys.maxsize


def test_predict_attaches_thermal_fields():
    report = predict(ou(0.1, omega_max=10.0), 1.0, thermal=ThermalParams(0.5))
    assert report.thermal_occupation == pytest.approx(0.11920, abs=1e-5)
    assert report.thermal_floor == pytest.approx(0.88080, abs=1e-5)
    assert report.n_min == 1
    assert ReportFlag.thermal_limited not in report.flags


def test_predict_flags_thermal_limited_failure():
    report = predict(ou(0.9, omega_max=1.1), 1.0, thermal=ThermalParams(0.5))
    assert report.p_failure > report.thermal_occupation
    assert ReportFlag.thermal_limited in report.flags


def test_report_to_dict_omits_inapplicable_fields():
    out = predict(ou(0.1, omega_max=10.0), 1.0).to_dict()
    assert out["quadrant"] == "LowAmpShortCorr"
    assert "v_env" not in out
    assert "p_env_lz" not in out
    assert "photon_order" not in out
    assert out["flags"] == []

    high = predict(ou(5.0, tau=10.0), 1.0).to_dict()
    assert "v_optimal" not in high
    assert high["quadrant"] == "HighAmpLongCorr"
