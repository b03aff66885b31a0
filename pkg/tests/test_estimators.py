import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailgini.errors import ConfigError, ConvergenceError, EstimatorError
from tailgini.estimators import (
    TailConfig,
    eta_hat,
    extrapolation_exponent,
    fit_tail_gini,
    hill_gamma1,
    phi0_constant,
    sensitivity_path,
    tg_extreme,
    tg_hw_baseline,
    tg_intermediate,
)
from tailgini.sample_core import PairedSample
from tailgini.simulation import PRESETS, SimModel

INVARIANCE = settings(max_examples=100, deadline=None)


def test_hill_hand_computed():
    # top two of [1, 2, 4, 8] over threshold 2: (log 4 + log 8)/2 - log 2 = 1.5 log 2
    assert hill_gamma1([1.0, 2.0, 4.0, 8.0], 2) == pytest.approx(1.5 * math.log(2))


def test_hill_on_doubling_sample():
    # threshold is the smallest point, so the estimate is the mean of log 2, log 4, log 8, log 16
    assert hill_gamma1([1.0, 2.0, 4.0, 8.0, 16.0], 4) == pytest.approx(2.5 * math.log(2))


def test_eta_hat_hand_computed():
    # ranks over n + 1 give T = 5/4, 5/3, 5/2, 5 for X = Y = 1..4
    sample = PairedSample([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0])
    expected = 0.5 * (math.log(5) + math.log(2.5)) - math.log(5 / 3)
    assert expected == pytest.approx(0.7520, abs=1e-4)
    assert eta_hat(sample, 2) == pytest.approx(expected)


def test_hill_rejects_non_positive_threshold():
    with pytest.raises(EstimatorError, match="hill_gamma1"):
        hill_gamma1([-3.0, -2.0, 0.0, 1.0, 2.0], 3)


def test_hill_recovers_pareto_index(rng):
    x = rng.random(20000) ** -0.35
    assert hill_gamma1(x, 1000) == pytest.approx(0.35, abs=0.05)


def test_eta_hat_separates_independence_from_comonotonicity(rng):
    x = rng.standard_normal(20000)
    independent = PairedSample(x, rng.standard_normal(20000))
    comonotone = PairedSample(x, x)
    assert eta_hat(independent, 500) == pytest.approx(0.5, abs=0.1)
    assert eta_hat(comonotone, 500) == pytest.approx(1.0, abs=0.1)


def test_exponent_values():
    assert extrapolation_exponent(0.35, 6 / 7) == pytest.approx(0.18333333333333, abs=1e-10)
    assert extrapolation_exponent(0.6, 0.95) == pytest.approx(0.54736842105263, abs=1e-10)
    assert round(extrapolation_exponent(0.35, 6 / 7), 3) == 0.183
    assert round(extrapolation_exponent(0.6, 0.95), 3) == 0.547


def test_extreme_and_baseline_extrapolation():
    # d_n = 100 / (1000 * 0.01) = 10
    assert tg_extreme(2.0, 100, 1000, 0.01, 0.5, 1.0) == pytest.approx(2.0 * math.sqrt(10.0))
    assert tg_hw_baseline(2.0, 10.0, 0.5) == pytest.approx(2.0 * math.sqrt(10.0))
    assert tg_extreme(2.0, 100, 1000, 0.01, 0.35, 6 / 7) == pytest.approx(2.0 * 10 ** (0.35 + 1 - 7 / 6))


def test_no_extrapolation_at_intermediate_level():
    assert tg_extreme(1.7, 100, 1000, 0.1, 0.4, 0.6) == pytest.approx(1.7)


def test_inward_extrapolation_is_rejected():
    with pytest.raises(ConfigError, match="inward"):
        tg_extreme(1.0, 100, 1000, 0.2, 0.5, 0.8)


def test_tail_config_from_fractions():
    config = TailConfig.from_fractions(5000, 0.01)
    assert (config.k, config.k1, config.k2) == (450, 250, 250)
    assert config.d_n(5000) == pytest.approx(9.0)


def test_tail_config_rejects_level_above_tail_fraction():
    with pytest.raises(ConfigError, match="outward"):
        TailConfig.from_fractions(100, 0.5)


def test_fit_records_ingredients(pareto_pair):
    config = TailConfig.from_fractions(pareto_pair.n, 0.01)
    fit = fit_tail_gini(pareto_pair, config)
    assert fit.theta_intermediate == pytest.approx(tg_intermediate(pareto_pair, config.k))
    assert fit.gamma1_hat == pytest.approx(hill_gamma1(pareto_pair.x, config.k1))
    assert fit.eta_hat == pytest.approx(eta_hat(pareto_pair, config.k2))
    assert fit.theta_extreme == pytest.approx(
        tg_extreme(fit.theta_intermediate, config.k, pareto_pair.n, 0.01, fit.gamma1_hat, fit.eta_hat)
    )
    assert fit.diagnostics.qualifying == config.k


def test_null_extrapolation_returns_the_intermediate_estimate(pareto_pair):
    config = TailConfig(k=180, k1=100, k2=100, p=180 / 2000)
    fit = fit_tail_gini(pareto_pair, config, fixed_gamma1=0.0, fixed_eta=1.0)
    assert fit.theta_extreme == fit.theta_intermediate
    assert fit.theta_hw == fit.theta_intermediate


def test_fixed_eta_of_one_reproduces_the_baseline(pareto_pair):
    fit = fit_tail_gini(pareto_pair, TailConfig.from_fractions(pareto_pair.n, 0.001), fixed_eta=1.0)
    assert fit.theta_extreme == pytest.approx(fit.theta_hw)


def test_sensitivity_path_rows(pareto_pair):
    rows = sensitivity_path(pareto_pair, [0.03, 0.05], [0.01])
    parameters = [r.parameter for r in rows]
    assert parameters.count("gamma1") == 2
    assert parameters.count("eta") == 2
    assert parameters.count("theta") == 2
    assert all(math.isfinite(r.value) for r in rows)


def test_phi0_closed_form_for_mixture_model():
    model = PRESETS["model1a"]
    constants = phi0_constant(model.tau_at_one, model.gamma1, model.eta)
    # tau(x^(-1/g), 1) is 2^(1/6) below x = 1 and 2^(1/6) x^(-1/a2) above it
    expected = 2 ** (1 / 6) / (1 - model.a2)
    assert constants.integral == pytest.approx(expected, rel=1e-6)
    assert constants.prefactor == pytest.approx(2 * (1.35 - 7 / 6) / (0.65 + 7 / 6))


def test_phi0_converges_for_slowly_decaying_mixture():
    model = SimModel("model1", 0.98, 0.95)
    constants = phi0_constant(model.tau_at_one, model.gamma1, model.eta)
    expected = 2 ** (0.98 / 0.95 - 1) / (1 - 0.95)
    assert expected == pytest.approx(20.4, abs=0.1)
    assert constants.integral == pytest.approx(expected, rel=1e-6)


def test_phi0_diverges_for_gaussian_copula_model():
    model = PRESETS["model2"]
    with pytest.raises(ConvergenceError, match="diverges"):
        phi0_constant(model.tau_at_one, model.gamma1, model.eta)


def test_phi0_rejects_parameters_outside_range():
    with pytest.raises(ConfigError):
        phi0_constant(lambda x: x, 1.2, 0.8)
    with pytest.raises(ConfigError):
        phi0_constant(lambda x: x, 0.3, 0.4)


def _sample(seed: int, n: int) -> PairedSample:
    rng = np.random.default_rng(seed)
    x = rng.random(n) ** -0.4
    return PairedSample(x, 0.5 * np.log(x) + rng.standard_normal(n))


@INVARIANCE
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(0.01, 100.0), k1=st.integers(2, 40))
def test_hill_is_scale_invariant(seed, scale, k1):
    x = _sample(seed, 200).x
    assert hill_gamma1(scale * x, k1) == pytest.approx(hill_gamma1(x, k1), abs=1e-10)


@INVARIANCE
@given(seed=st.integers(0, 2**32 - 1), k2=st.integers(2, 40), shift=st.floats(-5.0, 5.0))
def test_eta_hat_is_invariant_under_increasing_transforms(seed, k2, shift):
    sample = _sample(seed, 200)
    transformed = PairedSample(np.log(sample.x) + shift, np.exp(sample.y / 4.0))
    assert eta_hat(transformed, k2) == pytest.approx(eta_hat(sample, k2), abs=1e-10)


@INVARIANCE
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(0.01, 100.0), k=st.integers(2, 60))
def test_intermediate_estimate_is_linear_in_x(seed, scale, k):
    sample = _sample(seed, 200)
    scaled = sample.with_x(scale * sample.x)
    assert tg_intermediate(scaled, k) == pytest.approx(scale * tg_intermediate(sample, k), rel=1e-10, abs=1e-10 * scale)


@INVARIANCE
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 60))
def test_intermediate_estimate_ignores_increasing_transforms_of_y(seed, k):
    sample = _sample(seed, 200)
    transformed = sample.with_y(np.arctan(sample.y) * 3.0 + sample.y ** 3)
    assert tg_intermediate(transformed, k) == pytest.approx(tg_intermediate(sample, k), abs=1e-10)


@INVARIANCE
@given(
    theta_kn=st.floats(0.01, 100.0),
    gamma1=st.floats(0.05, 0.95),
    eta=st.one_of(st.just(1.0), st.floats(0.5, 0.999), st.floats(1.001, 2.0)),
    d=st.floats(1.5, 1000.0),
)
def test_baseline_dominates_extreme_estimate_iff_eta_at_most_one(theta_kn, gamma1, eta, d):
    k, n = 100, 1000
    p = k / (n * d)
    extreme = tg_extreme(theta_kn, k, n, p, gamma1, eta)
    baseline = tg_hw_baseline(theta_kn, k / (n * p), gamma1)
    assert (baseline >= extreme) == (eta <= 1.0)
