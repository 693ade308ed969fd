import math

import numpy as np
import pytest

from lz_decoherence import ensemble
from lz_decoherence.constants import NoiseModel
from lz_decoherence.errors import DomainError, IntegrationError
from lz_decoherence.ensemble import (
    EnsembleConfig,
    EnsembleResult,
    curve_points,
    curve_rows,
    lindblad_curve,
    run_ensemble,
    success_curve,
)
from lz_decoherence.model import NoiseSpec, SystemParams, lz_success_probability
from lz_decoherence.seeding import derive_seed


def test_config_validation():
    with pytest.raises(DomainError):
        EnsembleConfig(n_trajectories=0)
    with pytest.raises(DomainError):
        EnsembleConfig(n_trajectories=10, max_trajectories=5)
    with pytest.raises(DomainError):
        EnsembleConfig(target_standard_error=0.0)
    with pytest.raises(DomainError):
        EnsembleConfig(batch_size=0)
    assert EnsembleConfig(n_trajectories=10).cap == 10
    assert EnsembleConfig(n_trajectories=10, max_trajectories=50).cap == 50


def test_silent_noise_runs_one_trajectory(unit_system):
    result = run_ensemble(unit_system, NoiseSpec(), EnsembleConfig(n_trajectories=5, master_seed=3))
    assert result.success_probability == pytest.approx(1.0 - math.exp(-1.0), abs=2e-3)
    assert result.standard_error == 0.0
    assert result.n_used == 5
    assert result.seeds == [derive_seed(3, i) for i in range(5)]


def test_weak_noise_stays_near_coherent_result(unit_system, weak_fast_noise):
    result = run_ensemble(unit_system, weak_fast_noise, EnsembleConfig(n_trajectories=32, master_seed=1))
    assert result.success_probability == pytest.approx(
        lz_success_probability(1.0, unit_system.v), abs=0.05
    )
    assert 0.0 <= result.standard_error < 0.05
    assert result.n_used == 32


def test_seeds_follow_trajectory_index(unit_system, weak_fast_noise):
    config = EnsembleConfig(n_trajectories=10, master_seed=88, batch_size=4)
    result = run_ensemble(unit_system, weak_fast_noise, config)
    assert result.seeds == [derive_seed(88, i) for i in range(10)]


def test_result_does_not_depend_on_thread_count(unit_system, weak_fast_noise):
    config = EnsembleConfig(n_trajectories=12, master_seed=5, batch_size=4)
    serial = run_ensemble(unit_system, weak_fast_noise, config, threads=1)
    parallel = run_ensemble(unit_system, weak_fast_noise, config, threads=3)
    assert serial.success_probability == parallel.success_probability
    assert serial.standard_error == parallel.standard_error
    assert serial.seeds == parallel.seeds


def test_master_seed_changes_result(unit_system):
    noise = NoiseSpec(model=NoiseModel.ornstein_uhlenbeck, amplitude=0.8, tau=0.5)
    first = run_ensemble(unit_system, noise, EnsembleConfig(n_trajectories=4, master_seed=1))
    second = run_ensemble(unit_system, noise, EnsembleConfig(n_trajectories=4, master_seed=2))
    assert first.success_probability != second.success_probability


def test_adaptive_stopping_adds_whole_batches_up_to_cap(unit_system):
    noise = NoiseSpec(model=NoiseModel.ornstein_uhlenbeck, amplitude=0.8, tau=0.5)
    config = EnsembleConfig(
        n_trajectories=8, master_seed=4, target_standard_error=1e-9, max_trajectories=20, batch_size=8
    )
    result = run_ensemble(unit_system, noise, config)
    assert result.n_used == 20
    assert result.target_met is False
    assert result.seeds == [derive_seed(4, i) for i in range(20)]


def test_adaptive_stopping_stops_when_target_met(unit_system, weak_fast_noise):
    config = EnsembleConfig(
        n_trajectories=8, master_seed=4, target_standard_error=0.5, max_trajectories=64
    )
    result = run_ensemble(unit_system, weak_fast_noise, config)
    assert result.n_used == 8
    assert result.target_met is True
    assert "target_met" in result.to_dict()


def test_integration_failure_reports_trajectory_seed(monkeypatch, unit_system, weak_fast_noise):
    monkeypatch.setattr(ensemble, "NORM_DRIFT_LIMIT", -1.0)
    with pytest.raises(IntegrationError) as info:
        run_ensemble(unit_system, weak_fast_noise, EnsembleConfig(n_trajectories=2, master_seed=9))
    assert info.value.seed == derive_seed(9, 0)
    assert str(derive_seed(9, 0)) in str(info.value)


def test_result_to_dict_can_drop_seeds():
    result = EnsembleResult(0.5, 0.01, 3, seeds=[1, 2, 3])
    assert result.to_dict()["seeds"] == [1, 2, 3]
    assert "seeds" not in result.to_dict(include_seeds=False)
    assert "target_met" not in result.to_dict()


def test_success_curve_validates_grid(unit_system, weak_fast_noise):
    with pytest.raises(DomainError):
        success_curve(unit_system, weak_fast_noise, [])
    with pytest.raises(DomainError):
        success_curve(unit_system, weak_fast_noise, [1.0, -1.0])


def test_success_curve_rows(unit_system):
    v_grid = [0.5, 2.0]
    results = success_curve(unit_system, NoiseSpec(), v_grid, EnsembleConfig(n_trajectories=3))
    assert [v for v, _ in results] == v_grid
    header, rows = curve_rows(curve_points(unit_system.delta, results))
    assert header == ["v", "delta2_over_v", "p_success", "std_err", "n"]
    assert rows[0][1] == pytest.approx(2.0)
    assert rows[1][4] == 3
    assert rows[0][2] > rows[1][2]


def test_lindblad_curve_points(unit_system):
    results = lindblad_curve(unit_system, 0.05, [1.0, 4.0])
    points = curve_points(unit_system.delta, results)
    assert [p.n for p in points] == [1, 1]
    assert [p.std_err for p in points] == [0.0, 0.0]
    assert points[0].delta2_over_v == pytest.approx(1.0)


@pytest.mark.slow
def test_fast_noise_ensemble_matches_lindblad_dephasing():
    # weak fast Gaussian noise dephases the diabatic coherence at rate A^2 tau
    noise = NoiseSpec(model=NoiseModel.ornstein_uhlenbeck, amplitude=0.3, tau=0.1)
    gamma = noise.amplitude**2 * noise.tau
    system = SystemParams(delta=1.0, v=1.0)
    v_grid = [1.0 / ratio for ratio in np.geomspace(0.1, 1.0, 10)]
    numeric = success_curve(
        system, noise, v_grid, EnsembleConfig(n_trajectories=5000, master_seed=12), threads=4
    )
    mixed = lindblad_curve(system, gamma, v_grid)
    for (v, result), (_, evolution) in zip(numeric, mixed):
        assert result.success_probability == pytest.approx(
            evolution.ground_state_population, abs=3.0 * result.standard_error
        ), f"v = {v:.4g}"


@pytest.mark.slow
def test_dephasing_curves_peak_inside_and_order_by_rate(unit_system):
    v_grid = [1.0 / ratio for ratio in np.geomspace(0.1, 100.0, 15)]
    peaks = {}
    for gamma in (0.005, 0.05, 0.2):
        points = curve_points(1.0, lindblad_curve(unit_system, gamma, v_grid))
        p = [point.p_success for point in points]
        peaks[gamma] = (int(np.argmax(p)), max(p))

    best, peak = peaks[0.05]
    assert 0 < best < len(v_grid) - 1
    assert peak < 1.0
    assert peaks[0.005][1] > peaks[0.05][1] > peaks[0.2][1]

    plateau = lindblad_curve(unit_system, 10.0, [0.01])[0][1].ground_state_population
    assert plateau == pytest.approx(0.5, abs=0.02)


@pytest.mark.slow
def test_standard_error_shrinks_as_inverse_sqrt_n(unit_system):
    noise = NoiseSpec(model=NoiseModel.ornstein_uhlenbeck, amplitude=0.5, tau=0.1)
    errors = [
        run_ensemble(
            unit_system, noise, EnsembleConfig(n_trajectories=n, master_seed=3), threads=4
        ).standard_error
        for n in (1000, 4000, 16000)
    ]
    for coarse, fine in zip(errors, errors[1:]):
        assert coarse / fine == pytest.approx(2.0, rel=0.2)


@pytest.mark.slow
def test_stronger_noise_never_lifts_the_slow_sweep_plateau():
    system = SystemParams(delta=1.0, v=0.2)
    noiseless = lz_success_probability(1.0, 0.2)
    previous = None
    for amplitude in (0.15, 0.3, 0.6):
        noise = NoiseSpec(model=NoiseModel.ornstein_uhlenbeck, amplitude=amplitude, tau=0.1)
        result = run_ensemble(system, noise, EnsembleConfig(n_trajectories=256, master_seed=5))
        assert result.success_probability <= noiseless + 3.0 * result.standard_error
        if previous is not None:
            spread = 3.0 * math.hypot(result.standard_error, previous.standard_error)
            assert result.success_probability <= previous.success_probability + spread
        previous = result
