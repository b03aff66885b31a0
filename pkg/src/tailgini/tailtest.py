"""
Screening for asymptotic independence.

Each margin is fitted with a GEV distribution by maximum likelihood and mapped
to the unit Frechet scale (u -> -1/log u). The tail quotient correlation is
then computed at a fixed threshold, the smaller of the two empirical 95th
percentiles of the transformed margins:

    a = max_i (W_i v u) / (Z_i v u),   b = max_i (Z_i v u) / (W_i v u)
    q = (a + b - 2) / (a b - 1)        (q = 1 when a = b = 1)

q lies in [0, 1]; values near 0 are what asymptotic independence produces.
The null distribution is obtained by permuting one coordinate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy import optimize
from scipy.stats import rankdata

from tailgini.errors import ConfigError, ConvergenceError, DegenerateSampleError, InvalidSampleError
from tailgini.observability import tracer
from tailgini.sample_core import PairedSample, as_finite_array
from tailgini.workers import RngStream, parallel_map

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329
MIN_GEV_OBSERVATIONS = 30
MIN_EXCEEDANCES = 10
THRESHOLD_QUANTILE = 0.95
DEFAULT_NULL_REPS = 999
MIN_NULL_REPS = 200
_GUMBEL_BAND = 1e-8


@dataclass(frozen=True)
class GevFit:
    """GEV(location, scale, shape) with 1 + shape (x - location) / scale > 0 on the support."""

    location: float
    scale: float
    shape: float
    log_likelihood: float
    converged: bool

    def cdf(self, x) -> np.ndarray:
        z = (np.asarray(x, dtype=float) - self.location) / self.scale
        if abs(self.shape) < _GUMBEL_BAND:
            return np.exp(-np.exp(-z))
        t = 1.0 + self.shape * z
        with np.errstate(divide="ignore", over="ignore"):
            inner = np.where(t > 0, np.maximum(t, 0.0) ** (-1.0 / self.shape), np.inf if self.shape > 0 else 0.0)
        return np.exp(-inner)

    def supports(self, x: np.ndarray) -> bool:
        if abs(self.shape) < _GUMBEL_BAND:
            return True
        return bool(np.all(1.0 + self.shape * (x - self.location) / self.scale > 0))


def _negative_log_likelihood(params: np.ndarray, x: np.ndarray) -> float:
    location, log_scale, shape = params
    scale = math.exp(log_scale)
    z = (x - location) / scale
    if abs(shape) < _GUMBEL_BAND:
        return float(x.size * log_scale + np.sum(z) + np.sum(np.exp(-z)))
    t = 1.0 + shape * z
    if np.any(t <= 0):
        return math.inf
    log_t = np.log(t)
    value = x.size * log_scale + (1.0 + 1.0 / shape) * np.sum(log_t) + np.sum(np.exp(-log_t / shape))
    return float(value) if math.isfinite(value) else math.inf


def _starting_points(x: np.ndarray) -> list[np.ndarray]:
    """Moment-style initialisers: Gumbel location/scale with a few shapes."""
    scale = math.sqrt(6.0) * float(np.std(x, ddof=1)) / math.pi
    location = float(np.mean(x)) - EULER_GAMMA * scale
    return [np.array([location, math.log(scale), shape]) for shape in (0.1, 0.0, -0.1, 0.3, 0.5)]


def fit_gev(series: Sequence[float] | np.ndarray) -> GevFit:
    """Maximum-likelihood GEV fit by Nelder-Mead from several starts; best converged fit wins."""
    x = as_finite_array(series, "series")
    if x.size < MIN_GEV_OBSERVATIONS:
        raise InvalidSampleError(f"GEV fit needs at least {MIN_GEV_OBSERVATIONS} observations, got {x.size}")
    if float(np.std(x)) == 0.0:
        raise DegenerateSampleError("constant series: GEV scale degenerates to zero")

    best: GevFit | None = None
    for start in _starting_points(x):
        if not math.isfinite(_negative_log_likelihood(start, x)):
            continue
        res = optimize.minimize(
            _negative_log_likelihood,
            start,
            args=(x,),
            method="Nelder-Mead",
            options={"maxiter": 6000, "maxfev": 12000, "xatol": 1e-8, "fatol": 1e-10},
        )
        if not res.success or not math.isfinite(res.fun):
            logger.debug("GEV start %s did not converge: %s", start, res.message)
            continue
        location, log_scale, shape = res.x
        fit = GevFit(float(location), math.exp(log_scale), float(shape), -float(res.fun), True)
        if not fit.supports(x):
            continue
        if best is None or fit.log_likelihood > best.log_likelihood:
            best = fit
    if best is None:
        raise ConvergenceError("GEV maximum likelihood did not converge from any start")
    return best


def to_unit_frechet(u: np.ndarray) -> np.ndarray:
    u = np.clip(np.asarray(u, dtype=float), np.finfo(float).tiny, np.nextafter(1.0, 0.0))
    return -1.0 / np.log(u)


@dataclass(frozen=True)
class MarginTransform:
    """Maps one margin to the unit Frechet scale, through a GEV fit or through ranks."""

    kind: Literal["gev", "rank"]
    fit: GevFit | None = None

    def apply(self, values: np.ndarray) -> np.ndarray:
        if self.kind == "gev":
            return to_unit_frechet(self.fit.cdf(values))
        return to_unit_frechet(rankdata(values, method="max") / (values.size + 1))


def margin_transform(values: np.ndarray, method: Literal["gev", "rank"] = "gev") -> MarginTransform:
    if method == "rank":
        return MarginTransform("rank")
    try:
        return MarginTransform("gev", fit_gev(values))
    except (ConvergenceError, DegenerateSampleError) as exc:
        logger.warning("GEV fit failed (%s); falling back to the rank transform", exc)
        return MarginTransform("rank")


@dataclass(frozen=True)
class TqccStatistic:
    value: float
    threshold: float
    exceedances: int


def _quotient_correlation(w: np.ndarray, z: np.ndarray, threshold: float) -> float:
    wu = np.maximum(w, threshold)
    zu = np.maximum(z, threshold)
    a = float(np.max(wu / zu))
    b = float(np.max(zu / wu))
    denominator = a * b - 1.0
    if denominator <= 0.0:
        return 1.0
    return (a + b - 2.0) / denominator


def _tqcc_on_transformed(w: np.ndarray, z: np.ndarray) -> TqccStatistic:
    threshold = float(min(np.quantile(w, THRESHOLD_QUANTILE), np.quantile(z, THRESHOLD_QUANTILE)))
    exceedances = int(np.sum((w > threshold) | (z > threshold)))
    if exceedances < MIN_EXCEEDANCES:
        raise InvalidSampleError(f"only {exceedances} points exceed the TQCC threshold; need {MIN_EXCEEDANCES}")
    return TqccStatistic(_quotient_correlation(w, z, threshold), threshold, exceedances)


def tqcc_statistic(
    sample: PairedSample,
    margin_transforms: tuple[MarginTransform, MarginTransform] | None = None,
) -> TqccStatistic:
    if margin_transforms is None:
        margin_transforms = (margin_transform(sample.x), margin_transform(sample.y))
    tx, ty = margin_transforms
    return _tqcc_on_transformed(tx.apply(sample.x), ty.apply(sample.y))


@dataclass(frozen=True)
class IndependenceTestResult:
    statistic: float
    threshold: float
    p_value: float
    null_reps: int
    level: float
    transform: str

    @property
    def reject(self) -> bool:
        """True when asymptotic independence is rejected at ``level``."""
        return self.p_value < self.level


def tqcc_pvalue(
    sample: PairedSample,
    null_reps: int = DEFAULT_NULL_REPS,
    rng: RngStream | None = None,
    level: float = 0.05,
    method: Literal["gev", "rank"] = "gev",
    workers: int | None = None,
) -> IndependenceTestResult:
    """Permutation p-value (1 + #{null >= observed}) / (null_reps + 1)."""
    if null_reps < MIN_NULL_REPS:
        raise ConfigError(f"null_reps={null_reps} < {MIN_NULL_REPS}")
    if not 0.0 < level < 1.0:
        raise ConfigError(f"level={level} must lie in (0, 1)")
    rng = rng or RngStream(0)

    with tracer().start_as_current_span("tqcc_pvalue") as span:
        tx, ty = margin_transform(sample.x, method), margin_transform(sample.y, method)
        w, z = tx.apply(sample.x), ty.apply(sample.y)
        observed = _tqcc_on_transformed(w, z)

        def null_statistic(index: int) -> float:
            permutation = rng.child(index).generator().permutation(z.size)
            return _quotient_correlation(w, z[permutation], observed.threshold)

        null = np.array(parallel_map(null_statistic, range(null_reps), workers))
        p_value = (1.0 + float(np.sum(null >= observed.value))) / (null_reps + 1.0)
        span.set_attribute("statistic", observed.value)
        span.set_attribute("p_value", p_value)

    transform = tx.kind if tx.kind == ty.kind else f"{tx.kind}/{ty.kind}"
    logger.info("TQCC=%.4g p=%.4g (%d permutations, %s transform)", observed.value, p_value, null_reps, transform)
    return IndependenceTestResult(observed.value, observed.threshold, p_value, null_reps, level, transform)
