"""
Tail Gini estimation under asymptotic independence.

Two steps: estimate TG at the intermediate level k/n with a rank-based pair
statistic, then extrapolate to the extreme level p with

    theta_p = d_n ** (1 - 1/eta_hat + gamma1_hat) * theta_{k/n},   d_n = k / (n p)

gamma1 is the extreme value index of X (Hill), eta the coefficient of tail
dependence (Hill applied to T_i = 1 / max(1 - F_n1(X_i), 1 - F_n2(Y_i))).
The HW baseline is the same extrapolation with eta fixed at 1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate

from tailgini.errors import ConfigError, ConvergenceError, EstimatorError, InvalidSampleError
from tailgini.sample_core import (
    PairedSample,
    as_finite_array,
    check_tail_count,
    empirical_cdf_at_sample,
    tail_selection,
    tg_scale,
)

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.09
DEFAULT_ALPHA1 = 0.05
DEFAULT_ALPHA2 = 0.05


def fraction_to_count(fraction: float, n: int) -> int:
    return max(2, int(round(fraction * n)))


@dataclass(frozen=True)
class TailConfig:
    """Tail counts (k, k1, k2) and the extreme level p."""

    k: int
    k1: int
    k2: int
    p: float

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ConfigError(f"p={self.p} must lie in (0, 1)")

    @classmethod
    def from_fractions(
        cls,
        n: int,
        p: float,
        alpha: float = DEFAULT_ALPHA,
        alpha1: float = DEFAULT_ALPHA1,
        alpha2: float = DEFAULT_ALPHA2,
    ) -> "TailConfig":
        config = cls(
            k=fraction_to_count(alpha, n),
            k1=fraction_to_count(alpha1, n),
            k2=fraction_to_count(alpha2, n),
            p=p,
        )
        config.validate(n)
        return config

    def d_n(self, n: int) -> float:
        return self.k / (n * self.p)

    def validate(self, n: int) -> "TailConfig":
        try:
            for name in ("k", "k1", "k2"):
                check_tail_count(getattr(self, name), n, name)
        except InvalidSampleError as exc:
            raise ConfigError(str(exc)) from exc
        if self.d_n(n) < 1.0 - 1e-12:
            raise ConfigError(
                f"p={self.p} exceeds k/n={self.k / n:.6g}; extrapolation must go outward (d_n >= 1)"
            )
        return self


@dataclass(frozen=True)
class FitDiagnostics:
    qualifying: int
    ties_at_threshold: bool
    positive_pairs: int
    k_below_rate_bound: bool


@dataclass(frozen=True)
class TailGiniFit:
    theta_intermediate: float
    gamma1_hat: float
    eta_hat: float
    d_n: float
    theta_extreme: float
    theta_hw: float
    config: TailConfig
    diagnostics: FitDiagnostics

    @property
    def exponent(self) -> float:
        return extrapolation_exponent(self.gamma1_hat, self.eta_hat)


@dataclass(frozen=True)
class LimitConstants:
    phi0: float
    integral: float
    prefactor: float
    description: str = "integral over (0, inf) of tau(x ** (-1/gamma1), 1), split at x = 1"


def _hill(values: np.ndarray, k: int, estimator: str) -> float:
    n = values.size
    top = np.partition(values, n - k - 1)
    threshold = top[n - k - 1]
    if threshold <= 0:
        raise EstimatorError(estimator, f"order statistic {n - k} of {n} is {threshold} <= 0; log undefined")
    return float(np.mean(np.log(top[n - k:])) - math.log(threshold))


def hill_gamma1(x: Sequence[float] | np.ndarray, k1: int) -> float:
    """Hill estimator from the k1 upper order statistics of x."""
    arr = as_finite_array(x, "x")
    k1 = check_tail_count(k1, arr.size, "k1", minimum=1)
    return _hill(arr, k1, "hill_gamma1")


def transformed_sample(sample: PairedSample) -> np.ndarray:
    """T_i = 1 / max(1 - F_n1(X_i), 1 - F_n2(Y_i)); every T_i >= 1."""
    survival_x = 1.0 - empirical_cdf_at_sample(sample.x)
    survival_y = 1.0 - empirical_cdf_at_sample(sample.y)
    return 1.0 / np.maximum(survival_x, survival_y)


def eta_hat(sample: PairedSample, k2: int) -> float:
    k2 = check_tail_count(k2, sample.n, "k2", minimum=1)
    return _hill(transformed_sample(sample), k2, "eta_hat")


def intermediate_estimate(sample: PairedSample, k: int, f2: np.ndarray | None = None) -> tuple[float, FitDiagnostics]:
    n = sample.n
    selection = tail_selection(sample.y, k)
    if f2 is None:
        f2 = empirical_cdf_at_sample(sample.y)
    idx = selection.indices[sample.x[selection.indices] > 0]
    xs = sample.x[idx]
    fs = f2[idx]
    pair_terms = np.subtract.outer(xs, xs) * np.subtract.outer(fs, fs)
    total = float(np.triu(pair_terms, 1).sum())
    diagnostics = FitDiagnostics(
        qualifying=selection.qualifying,
        ties_at_threshold=selection.ties_at_threshold,
        positive_pairs=int(idx.size),
        k_below_rate_bound=False,
    )
    return tg_scale(n, selection.k) * total, diagnostics


def tg_intermediate(sample: PairedSample, k: int) -> float:
    """Pair statistic over the k largest-Y points only; equals tg_bruteforce."""
    return intermediate_estimate(sample, k)[0]


def extrapolation_exponent(gamma1: float, eta: float) -> float:
    return 1.0 - 1.0 / eta + gamma1


def tg_extreme(theta_kn: float, k: int, n: int, p: float, gamma1_hat: float, eta_hat: float) -> float:
    if not 0.0 < p <= 1.0:
        raise ConfigError(f"p={p} must lie in (0, 1]")
    d_n = k / (n * p)
    if d_n < 1.0 - 1e-12:
        raise ConfigError(f"p={p} exceeds k/n={k / n:.6g}; inward extrapolation is not defined")
    if eta_hat <= 0:
        raise EstimatorError("tg_extreme", f"eta_hat={eta_hat} must be positive")
    return math.exp(extrapolation_exponent(gamma1_hat, eta_hat) * math.log(max(d_n, 1.0))) * theta_kn


def tg_hw_baseline(theta_kn: float, d_n: float, gamma1_hat: float) -> float:
    if d_n < 1.0 - 1e-12:
        raise ConfigError(f"d_n={d_n} must be >= 1")
    return math.exp(gamma1_hat * math.log(max(d_n, 1.0))) * theta_kn


def assemble_fit(
    theta_kn: float,
    gamma1: float,
    eta: float,
    n: int,
    config: TailConfig,
    diagnostics: FitDiagnostics,
) -> TailGiniFit:
    """Combine the three ingredient estimates into a fit record."""
    d_n = config.d_n(n)
    theta_p = tg_extreme(theta_kn, config.k, n, config.p, gamma1, eta)
    theta_hw = tg_hw_baseline(theta_kn, d_n, gamma1)
    below = config.k <= n ** (1.0 - eta) if eta > 0 else True
    if below != diagnostics.k_below_rate_bound:
        diagnostics = FitDiagnostics(
            diagnostics.qualifying, diagnostics.ties_at_threshold, diagnostics.positive_pairs, below
        )
    return TailGiniFit(
        theta_intermediate=theta_kn,
        gamma1_hat=gamma1,
        eta_hat=eta,
        d_n=d_n,
        theta_extreme=theta_p,
        theta_hw=theta_hw,
        config=config,
        diagnostics=diagnostics,
    )


def fit_tail_gini(
    sample: PairedSample,
    config: TailConfig,
    fixed_gamma1: float | None = None,
    fixed_eta: float | None = None,
) -> TailGiniFit:
    n = sample.n
    config.validate(n)
    gamma1 = hill_gamma1(sample.x, config.k1) if fixed_gamma1 is None else fixed_gamma1
    eta = eta_hat(sample, config.k2) if fixed_eta is None else fixed_eta
    try:
        theta_kn, diagnostics = intermediate_estimate(sample, config.k)
    except InvalidSampleError as exc:
        raise EstimatorError("tg_intermediate", str(exc)) from exc
    fit = assemble_fit(theta_kn, gamma1, eta, n, config, diagnostics)
    logger.debug(
        "fit n=%d k=%d k1=%d k2=%d p=%g: theta_kn=%.6g gamma1=%.4f eta=%.4f theta_p=%.6g",
        n, config.k, config.k1, config.k2, config.p, theta_kn, gamma1, eta, fit.theta_extreme,
    )
    return fit


@dataclass(frozen=True)
class SensitivityRow:
    parameter: str
    fraction: float
    count: int
    p: float | None
    value: float


def sensitivity_path(
    sample: PairedSample,
    alphas: Iterable[float],
    p_levels: Iterable[float],
    alpha1: float = DEFAULT_ALPHA1,
    alpha2: float = DEFAULT_ALPHA2,
) -> list[SensitivityRow]:
    """gamma1_hat against alpha1, eta_hat against alpha2 and theta_p against alpha.

    The plug-in gamma1/eta for the theta_p path are taken at alpha1/alpha2.
    """
    n = sample.n
    alphas = sorted(set(alphas))
    p_levels = sorted(set(p_levels), reverse=True)
    rows: list[SensitivityRow] = []
    for fraction in alphas:
        count = fraction_to_count(fraction, n)
        if count >= n:
            continue
        rows.append(SensitivityRow("gamma1", fraction, count, None, hill_gamma1(sample.x, count)))
        rows.append(SensitivityRow("eta", fraction, count, None, eta_hat(sample, count)))
    gamma1 = hill_gamma1(sample.x, fraction_to_count(alpha1, n))
    eta = eta_hat(sample, fraction_to_count(alpha2, n))
    f2 = empirical_cdf_at_sample(sample.y)
    for fraction in alphas:
        k = fraction_to_count(fraction, n)
        if k >= n:
            continue
        theta_kn, _ = intermediate_estimate(sample, k, f2)
        for p in p_levels:
            if k / (n * p) < 1.0:
                logger.info("skipping alpha=%g at p=%g: k/n < p", fraction, p)
                continue
            rows.append(SensitivityRow("theta", fraction, k, p, tg_extreme(theta_kn, k, n, p, gamma1, eta)))
    return rows


def _block_integral(f: Callable[[float], float], a: float, b: float, rtol: float) -> float:
    value, _err = integrate.quad(f, a, b, epsrel=rtol, epsabs=0.0, limit=200)
    return value


def _half_line(
    f: Callable[[float], float],
    edges: Iterable[tuple[float, float]],
    rtol: float,
    side: str,
    min_blocks: int = 8,
    stable_blocks: int = 3,
) -> float:
    """Sum dyadic blocks, closing the remainder as a geometric series once block ratios settle.

    Power-law integrands give a constant ratio r between consecutive blocks,
    so the unsummed tail is block * r / (1 - r). Blocks that keep growing
    mean the integral diverges.
    """
    total = 0.0
    blocks: list[float] = []
    small_run = 0
    growth_run = 0
    for count, (a, b) in enumerate(edges, start=1):
        block = _block_integral(f, a, b, rtol)
        if not math.isfinite(block):
            raise ConvergenceError(f"phi0 integral: non-finite block on [{a:.3g}, {b:.3g}] ({side} side)")
        total += block
        if blocks and abs(block) >= abs(blocks[-1]) > 0:
            growth_run += 1
        else:
            growth_run = 0
        blocks.append(block)
        if count < min_blocks:
            continue
        if growth_run >= 4:
            raise ConvergenceError(
                f"phi0 integral diverges on the {side} side: dyadic block contributions keep growing"
            )
        if block == 0.0:
            small_run += 1
            if small_run >= stable_blocks:
                return total
            continue
        small_run = 0
        recent = blocks[-(stable_blocks + 1):]
        if any(v == 0.0 for v in recent[:-1]):
            continue
        ratios = [later / earlier for earlier, later in zip(recent, recent[1:])]
        r = ratios[-1]
        if not 0.0 < r < 1.0:
            continue
        tail = block * r / (1.0 - r)
        settled = max(ratios) - min(ratios) <= 1e-6 * r
        if settled or abs(tail) <= rtol * abs(total):
            return total + tail
    raise ConvergenceError(f"phi0 integral did not converge on the {side} side")


def phi0_constant(
    tau_at_one: Callable[[float], float],
    gamma1: float,
    eta: float,
    rtol: float = 1e-8,
    max_blocks: int = 400,
) -> LimitConstants:
    """phi0 = 2(1 + g - 1/eta) / (1 - g + 1/eta) * int_0^inf tau(x^(-1/g), 1) dx.

    The integral is split at x = 1 and each half is summed over dyadic
    blocks [2^j, 2^(j+1)] (resp. [2^-(j+1), 2^-j]); a divergent integral
    raises ConvergenceError instead of returning a number.
    """
    if not 0.0 < gamma1 < 1.0:
        raise ConfigError(f"gamma1={gamma1} must lie in (0, 1)")
    if not 0.5 < eta <= 1.0:
        raise ConfigError(f"eta={eta} must lie in (1/2, 1]")

    def integrand(x: float) -> float:
        return float(tau_at_one(x ** (-1.0 / gamma1)))

    upper_edges = ((2.0 ** j, 2.0 ** (j + 1)) for j in range(max_blocks))
    lower_edges = ((2.0 ** -(j + 1), 2.0 ** -j) for j in range(max_blocks))
    integral = _half_line(integrand, lower_edges, rtol, "lower") + _half_line(integrand, upper_edges, rtol, "upper")
    prefactor = 2.0 * (1.0 + gamma1 - 1.0 / eta) / (1.0 - gamma1 + 1.0 / eta)
    return LimitConstants(phi0=prefactor * integral, integral=integral, prefactor=prefactor)
