import numpy as np
import pytest
from scipy.stats import kstest, norm

from tailgini.errors import ConfigError
from tailgini.simulation import (
    PRESETS,
    PUBLISHED_EXPONENTS,
    PUBLISHED_TRUE_VALUES,
    SimModel,
    exponent_discrepancies,
    open_uniform,
    resolve_model,
    sample_model,
    sample_pareto,
    tail_covariance,
    true_f1,
    true_f2,
    true_q1,
    true_tg_oracle,
    true_tg_replicates,
)
from tailgini.workers import RngStream


def test_presets_carry_published_parameters():
    assert (PRESETS["model1a"].a1, PRESETS["model1a"].a2) == (0.35, 0.3)
    assert PRESETS["model1a"].eta == pytest.approx(6 / 7)
    assert PRESETS["model2"].eta == pytest.approx(0.95)
    assert set(PUBLISHED_EXPONENTS) == set(PRESETS)
    assert {name for name, _ in PUBLISHED_TRUE_VALUES} == set(PRESETS)


def test_printed_exponent_inconsistencies_are_flagged():
    flagged = exponent_discrepancies()
    assert set(flagged) == {"model1b", "model1c", "model1d"}
    assert flagged["model1c"][0] == pytest.approx(0.4)
    assert flagged["model1d"][0] == pytest.approx(0.25)


def test_resolve_custom_model():
    model = resolve_model("custom:0.4,0.3")
    assert model.variant == "model1"
    assert model.eta == pytest.approx(0.75)


@pytest.mark.parametrize("spec", ["model9", "custom:0.4", "custom:a,b"])
def test_resolve_rejects_unknown_models(spec):
    with pytest.raises(ConfigError):
        resolve_model(spec)


def test_mixture_parameters_must_keep_eta_in_range():
    with pytest.raises(ConfigError, match="a1/2 < a2 < a1"):
        SimModel("model1", 0.6, 0.2)


def test_open_uniform_stays_inside_unit_interval():
    u = open_uniform(np.random.default_rng(0), 100000)
    assert u.min() > 0.0
    assert u.max() < 1.0


def test_model1_shares_the_common_shock_half_the_time():
    sample = sample_model(PRESETS["model1a"], 20000, RngStream(3))
    assert sample.x.min() >= 1.0 and sample.y.min() >= 1.0
    assert np.mean(sample.x == sample.y) == pytest.approx(0.5, abs=0.02)


def test_model2_margins():
    model = PRESETS["model2"]
    sample = sample_model(model, 20000, RngStream(4))
    assert sample.x.min() >= 1.0
    assert np.mean(sample.y) == pytest.approx(0.0, abs=0.05)
    assert np.mean(true_f1(model, sample.x) > 0.99) == pytest.approx(0.01, abs=0.003)


def test_sampling_is_reproducible_per_stream():
    a = sample_model(PRESETS["model1b"], 100, RngStream(7, 2))
    b = sample_model(PRESETS["model1b"], 100, RngStream(7, 2))
    c = sample_model(PRESETS["model1b"], 100, RngStream(7, 3))
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    assert not np.array_equal(a.x, c.x)


def test_closed_form_cdfs():
    model = PRESETS["model1a"]
    # half Pareto(0.35) plus half Pareto(0.3) survival at 2
    expected = 1 - 0.5 * 2 ** (-1 / 0.35) - 0.5 * 2 ** (-1 / 0.3)
    assert true_f2(model, 2.0) == pytest.approx(expected)
    assert true_f1(model, 0.5) == 0.0
    assert true_f2(PRESETS["model2"], 0.0) == pytest.approx(0.5)


@pytest.mark.parametrize("name", ["model1a", "model2"])
def test_tau_is_homogeneous(name):
    model = PRESETS[name]
    grid = np.array([0.05, 0.3, 1.0, 2.5, 40.0])
    x, y = np.meshgrid(grid, grid)
    for t in (0.01, 0.7, 3.0, 250.0):
        assert np.allclose(model.tau(t * x, t * y), t ** (1 / model.eta) * model.tau(x, y), rtol=1e-12, atol=0.0)


def test_model1_x_follows_the_mixture_cdf():
    model = PRESETS["model1a"]
    x = sample_model(model, 100_000, RngStream(21)).x
    assert kstest(x, lambda v: true_f1(model, v)).statistic < 0.01


def test_pareto_survival_and_quantile():
    x = sample_pareto(0.5, 10**6, RngStream(22))
    assert np.mean(x > 4.0) == pytest.approx(4.0 ** -2, abs=0.002)
    tail = sample_pareto(0.35, 10**6, RngStream(23))
    assert np.quantile(tail, 0.99) == pytest.approx(0.01 ** -0.35, rel=0.02)


def test_model2_gaussian_copula_round_trip():
    model = PRESETS["model2"]
    sample = sample_model(model, 200_000, RngStream(24))
    x_tilde = norm.isf(sample.x ** (-1 / model.a1))
    assert np.corrcoef(x_tilde, sample.y)[0, 1] == pytest.approx(model.a2, abs=0.01)


@pytest.mark.parametrize("name", ["model1a", "model1c", "model2"])
def test_true_q1_inverts_true_f1(name):
    model = PRESETS[name]
    assert true_f1(model, true_q1(model, 0.999)) == pytest.approx(0.999, abs=1e-10)


def test_tail_covariance_needs_enough_tail_points():
    f2 = np.linspace(0.0, 0.999, 1000)
    assert tail_covariance(np.arange(1000.0), f2, 0.005) is None


def test_oracle_rejects_small_samples():
    with pytest.raises(ConfigError, match="p\\*size"):
        true_tg_oracle(PRESETS["model1a"], 0.001, 5, 50_000, RngStream(0))


def test_oracle_is_independent_of_worker_count():
    model = PRESETS["model1a"]
    serial = true_tg_replicates(model, 0.01, 6, 20_000, RngStream(11), workers=1)
    threaded = true_tg_replicates(model, 0.01, 6, 20_000, RngStream(11), workers=3)
    assert serial.replicates == threaded.replicates
    assert serial.value == threaded.value


@pytest.mark.slow
@pytest.mark.parametrize("name, published", [("model1a", 0.5835), ("model1c", 4.2418)])
def test_oracle_reproduces_published_true_values(name, published):
    value = true_tg_oracle(PRESETS[name], 0.01, 50, 200_000, RngStream(20240101))
    assert value == pytest.approx(published, rel=0.15)
