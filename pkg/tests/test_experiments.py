import math

import numpy as np
import pytest

from tailgini import experiments
from tailgini.errors import ConfigError, DegenerateSampleError, EstimatorError, ExperimentError
from tailgini.experiments import (
    METHODS,
    TABLE_POINT,
    ExperimentSpec,
    GridPoint,
    logratio_diagnostics,
    normal_qq,
    phi0_check,
    ratio_summary,
    run_replications,
    smse,
    smse_grid,
    sweep_grid,
)
from tailgini.simulation import PRESETS, PUBLISHED_TRUE_VALUES


def _published(name):
    return {p: PUBLISHED_TRUE_VALUES[(name, p)] for p in (0.01, 0.001)}


def test_sweep_grid_holds_the_other_fractions_fixed():
    grid = sweep_grid(alphas=[0.03, 0.05], alpha1s=[0.05], alpha2s=[])
    assert grid == (GridPoint(0.03, 0.05, 0.05), GridPoint(0.05, 0.05, 0.05), TABLE_POINT)


def test_smse():
    assert smse([1.0, 1.0]) == 0.0
    assert smse([0.5, 1.5]) == pytest.approx(0.25)
    with pytest.raises(ConfigError):
        smse([])


def test_spec_rejects_level_above_tail_fraction():
    with pytest.raises(ConfigError, match="exceeds alpha"):
        ExperimentSpec(PRESETS["model1a"], p_levels=(0.2,))


def test_spec_rejects_tiny_tail_counts():
    with pytest.raises(ConfigError, match="fewer than 10"):
        ExperimentSpec(PRESETS["model1a"], n=100, p_levels=(0.01,))


def test_replications_are_reproducible_and_worker_independent():
    spec = ExperimentSpec(PRESETS["model1a"], n=2000, m=8, p_levels=(0.01,), seed=5)
    serial = run_replications(spec, _published("model1a"), workers=1)
    threaded = run_replications(spec, _published("model1a"), workers=4)
    assert [r.theta_extreme for r in serial.records] == [r.theta_extreme for r in threaded.records]
    assert len(serial.records) == 8
    assert all(r.ok for r in serial.records)
    assert {s.method for s in serial.summaries} == set(METHODS)


def test_records_for_each_grid_point_and_level():
    spec = ExperimentSpec.with_sweeps(
        PRESETS["model1b"], alphas=(0.05, 0.08), alpha1s=(0.04,), alpha2s=(0.06,),
        n=2000, m=4, p_levels=(0.01, 0.001), seed=1,
    )
    result = run_replications(spec, _published("model1b"), workers=2)
    assert len(result.records) == spec.m * len(spec.grid) * 2
    rows = smse_grid(result)
    # 2 p levels x 2 methods x 4 sweep points
    assert len(rows) == 16
    assert not any(row.is_gap for row in rows)


def test_missing_true_value_is_a_config_error():
    spec = ExperimentSpec(PRESETS["model1a"], n=2000, m=2, p_levels=(0.01, 0.001))
    with pytest.raises(ConfigError, match="no true value"):
        run_replications(spec, {0.01: 0.5835})


def test_too_many_failed_replications_abort_the_run(monkeypatch):
    def broken(x, k1):
        raise EstimatorError("hill_gamma1", "forced")

    monkeypatch.setattr(experiments, "hill_gamma1", broken)
    spec = ExperimentSpec(PRESETS["model1a"], n=2000, m=4, p_levels=(0.01,))
    with pytest.raises(ExperimentError, match="4 of 4"):
        run_replications(spec, _published("model1a"), workers=1)


def test_normal_qq_on_gaussian_values():
    values = np.random.default_rng(0).normal(size=400)
    diagnostics = normal_qq(values)
    assert diagnostics.correlation > 0.99
    assert len(diagnostics.rows) == 400
    assert diagnostics.rows[0].normal_quantile < 0 < diagnostics.rows[-1].normal_quantile


def test_normal_qq_needs_spread_and_size():
    with pytest.raises(ConfigError):
        normal_qq(np.zeros(10))
    with pytest.raises(DegenerateSampleError):
        normal_qq(np.ones(40))


@pytest.mark.slow
def test_ratio_table_for_model1a():
    spec = ExperimentSpec(PRESETS["model1a"], n=5000, m=200, p_levels=(0.01,))
    result = run_replications(spec, _published("model1a"))
    summaries = {s.method: s for s in ratio_summary(result)}
    assert summaries["AIE"].mean == pytest.approx(0.9263, abs=0.10)
    assert summaries["HW"].mean == pytest.approx(1.3955, abs=0.20)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["model1a", "model1b", "model1c", "model1d"])
def test_aie_beats_the_baseline(name):
    spec = ExperimentSpec(PRESETS[name], n=5000, m=200, p_levels=(0.01,))
    summaries = {s.method: s for s in run_replications(spec, _published(name)).summaries}
    assert abs(summaries["AIE"].mean - 1) < abs(summaries["HW"].mean - 1)
    assert summaries["AIE"].sd < summaries["HW"].sd


@pytest.mark.slow
def test_log_ratios_look_normal_for_model1b():
    spec = ExperimentSpec(PRESETS["model1b"], n=5000, m=500, p_levels=(0.01,))
    diagnostics = logratio_diagnostics(run_replications(spec, _published("model1b")), 0.01)
    assert diagnostics.correlation >= 0.98


@pytest.mark.slow
def test_phi0_limit_for_model1a():
    check = phi0_check(PRESETS["model1a"], 1e-3, reps=50, size=200_000, seed=20240101)
    assert math.isfinite(check.phi0)
    assert abs(check.relative_error) <= 0.20


@pytest.mark.slow
def test_model2_ratios_are_far_less_stable_than_model1a():
    sd = {}
    for name in ("model1a", "model2"):
        spec = ExperimentSpec(PRESETS[name], n=5000, m=200, p_levels=(0.01,))
        summaries = {s.method: s for s in run_replications(spec, _published(name)).summaries}
        sd[name] = summaries["AIE"].sd
    assert sd["model2"] > 2 * sd["model1a"]
