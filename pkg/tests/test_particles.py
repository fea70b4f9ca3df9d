import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdcdme.particles import (
    SimConfig,
    compare_stats,
    derive_seed,
    fold,
    run_ensemble,
    sample_analytic_stats,
    simulate_trajectory,
)
from bdcdme.rates import ConstantRate, DiracRate, TabulatedRate

LD = ConstantRate(0.5)


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-10.0, 10.0, allow_nan=False))
def test_fold_lands_in_unit_interval(x):
    y = fold(np.array([x]))[0]
    assert 0.0 <= y <= 1.0
    # folding is a reflection, so it is even and 2-periodic
    assert fold(np.array([-x]))[0] == pytest.approx(y, abs=1e-12)
    assert fold(np.array([x + 2.0]))[0] == pytest.approx(y, abs=1e-9)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(LD, LD, dt=0.0)
    with pytest.raises(ValueError):
        SimConfig(LD, LD, t_end=1.0, snapshots=(2.0,))


def test_no_creation_keeps_empty():
    cfg = SimConfig(ConstantRate(0.0), LD, t_end=1.0, dt=1e-2, trajectories=50, snapshots=(0.5, 1.0))
    stats = run_ensemble(cfg)
    assert stats.counts.sum() == 0


def test_fast_degradation_mean_count():
    # stationary mean lambda_c / lambda_d for a well-mixed birth-death process
    cfg = SimConfig(ConstantRate(5.0), ConstantRate(50.0), t_end=0.5, dt=1e-3,
                    trajectories=4000, snapshots=(0.5,), seed=3)
    stats = run_ensemble(cfg)
    expected = 0.1 * (1 - math.exp(-25.0))
    assert abs(stats.mean_count(0) - expected) <= 4 * stats.mean_count_se(0) + 0.1 * 50 * 1e-3


def test_deterministic_and_thread_independent():
    cfg = SimConfig(DiracRate(0.0, 0.5), LD, t_end=1.0, dt=1e-2, trajectories=600,
                    batch_size=100, snapshots=(0.5, 1.0), seed=9)
    a, b = run_ensemble(cfg), run_ensemble(cfg, threads=4)
    assert np.array_equal(a.counts, b.counts)
    assert np.array_equal(a.histograms, b.histograms)
    c = run_ensemble(SimConfig(**{**cfg.__dict__, "seed": 10}))
    assert not np.array_equal(a.counts, c.counts)


def test_single_trajectory_matches_batch():
    cfg = SimConfig(ConstantRate(2.0), LD, t_end=1.0, dt=1e-2, trajectories=1, snapshots=(0.5, 1.0), seed=4)
    stats = run_ensemble(cfg)
    traj = simulate_trajectory(cfg, derive_seed(4, 0))
    assert [p.size for p in traj] == list(stats.counts[:, 0])
    for j, p in enumerate(traj):
        assert np.array_equal(np.histogram(p, bins=cfg.edges)[0], stats.histograms[j])


def test_dirac_creation_starts_at_atom():
    cfg = SimConfig(DiracRate(0.5, 1000.0), LD, t_end=0.01, dt=1e-2, trajectories=1,
                    snapshots=(0.01,), seed=0)
    (pos,) = simulate_trajectory(cfg, derive_seed(0, 0))
    assert pos.size > 0 and np.all(pos == 0.5)


def test_analytic_self_test(smooth_case):
    dist, _ = smooth_case
    stats = sample_analytic_stats(dist, (0.25, 1.0, 4.0), 10_000, bins=50, seed=5)
    assert compare_stats(stats, dist).passed


def test_comparison_rejects_wrong_model(smooth_case, dirac0_case):
    dist, _ = smooth_case
    wrong, _ = dirac0_case
    stats = sample_analytic_stats(dist, (0.25,), 10_000, seed=5)
    assert not compare_stats(stats, wrong).passed


def test_dt_refinement_mean_count():
    base = dict(lambda_c=ConstantRate(1.0), lambda_d=LD, t_end=1.0, trajectories=4000, snapshots=(1.0,))
    coarse = run_ensemble(SimConfig(dt=1e-2, seed=1, **base))
    fine = run_ensemble(SimConfig(dt=1e-3, seed=2, **base))
    se = math.hypot(coarse.mean_count_se(0), fine.mean_count_se(0))
    assert abs(coarse.mean_count(0) - fine.mean_count(0)) < 2 * se + 0.01


def test_pair_positions_independent():
    cfg = SimConfig(ConstantRate(2.0), LD, t_end=1.0, dt=1e-2, trajectories=4000, snapshots=(1.0,), seed=8)
    r, se = run_ensemble(cfg).pair_correlation(0)
    assert abs(r) <= 3 * se


def test_smooth_scenario_agrees(smooth_rate, smooth_case):
    dist, _ = smooth_case
    cfg = SimConfig(smooth_rate, LD, t_end=1.0, dt=1e-3, trajectories=3000, snapshots=(0.25, 1.0), seed=12)
    report = compare_stats(run_ensemble(cfg), dist)
    for row in report.snapshots:
        assert row.tv <= 0.03
        assert row.p_value > 1e-3


@pytest.mark.parametrize("loc,expected_bin", [(0.0, 0), (0.5, 2)])
def test_dirac_histogram_modes(loc, expected_bin):
    cfg = SimConfig(DiracRate(loc, 0.5), LD, t_end=0.25, dt=1e-3, trajectories=3000, bins=5, snapshots=(0.25,), seed=2)
    assert int(np.argmax(run_ensemble(cfg).histograms[0])) == expected_bin


def test_spatial_degradation_supported():
    ld = TabulatedRate.from_function(lambda x: 0.5 + 0 * x, 101)
    cfg = SimConfig(ConstantRate(1.0), ld, t_end=0.5, dt=1e-2, trajectories=200, snapshots=(0.5,))
    assert run_ensemble(cfg).counts.shape == (1, 200)
