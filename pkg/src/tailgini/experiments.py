"""
Simulation harness: seeded replications, sMSE surfaces, ratio tables and
log-ratio normality diagnostics.

True values are an input. Each replication i draws its sample from
RngStream(seed, i), so results do not depend on the worker count.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import norm

from tailgini.errors import ConfigError, DegenerateSampleError, ExperimentError, TailGiniError
from tailgini.estimators import (
    DEFAULT_ALPHA,
    DEFAULT_ALPHA1,
    DEFAULT_ALPHA2,
    TailConfig,
    assemble_fit,
    eta_hat,
    fraction_to_count,
    hill_gamma1,
    intermediate_estimate,
    phi0_constant,
)
from tailgini.observability import tracer
from tailgini.sample_core import empirical_cdf_at_sample
from tailgini.simulation import SimModel, sample_model, true_q1, true_tg_replicates
from tailgini.workers import RngStream, parallel_map

logger = logging.getLogger(__name__)

METHODS = ("AIE", "HW")
MAX_FAILURE_SHARE = 0.05
SWEEP_FRACTIONS = (0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10)


@dataclass(frozen=True, order=True)
class GridPoint:
    alpha: float
    alpha1: float
    alpha2: float


TABLE_POINT = GridPoint(DEFAULT_ALPHA, DEFAULT_ALPHA1, DEFAULT_ALPHA2)


def sweep_grid(
    alphas: Iterable[float] = (),
    alpha1s: Iterable[float] = (),
    alpha2s: Iterable[float] = (),
    fixed: float = 0.05,
    table_point: GridPoint | None = TABLE_POINT,
) -> tuple[GridPoint, ...]:
    """One-at-a-time sweeps (the other two fractions held at ``fixed``) plus the table point."""
    points = {GridPoint(a, fixed, fixed) for a in alphas}
    points |= {GridPoint(fixed, a1, fixed) for a1 in alpha1s}
    points |= {GridPoint(fixed, fixed, a2) for a2 in alpha2s}
    if table_point is not None:
        points.add(table_point)
    return tuple(sorted(points))


@dataclass(frozen=True)
class ExperimentSpec:
    model: SimModel
    n: int = 5000
    m: int = 200
    p_levels: tuple[float, ...] = (0.01, 0.001)
    grid: tuple[GridPoint, ...] = (TABLE_POINT,)
    seed: int = 20240101
    alphas: tuple[float, ...] = ()
    alpha1s: tuple[float, ...] = ()
    alpha2s: tuple[float, ...] = ()
    fixed: float = 0.05
    table_point: GridPoint = TABLE_POINT

    def __post_init__(self):
        if self.m < 2:
            raise ConfigError(f"m={self.m} replications; need at least 2")
        if not self.p_levels:
            raise ConfigError("at least one extreme level p is required")
        for point in self.grid:
            for fraction in (point.alpha, point.alpha1, point.alpha2):
                if fraction * self.n < 10:
                    raise ConfigError(f"tail fraction {fraction} leaves fewer than 10 points at n={self.n}")
            for p in self.p_levels:
                if p > point.alpha:
                    raise ConfigError(f"p={p} exceeds alpha={point.alpha}")

    @classmethod
    def with_sweeps(
        cls,
        model: SimModel,
        alphas: Sequence[float] = SWEEP_FRACTIONS,
        alpha1s: Sequence[float] = SWEEP_FRACTIONS,
        alpha2s: Sequence[float] = SWEEP_FRACTIONS,
        fixed: float = 0.05,
        **kwargs,
    ) -> "ExperimentSpec":
        table_point = kwargs.pop("table_point", TABLE_POINT)
        return cls(
            model=model,
            grid=sweep_grid(alphas, alpha1s, alpha2s, fixed, table_point),
            alphas=tuple(alphas),
            alpha1s=tuple(alpha1s),
            alpha2s=tuple(alpha2s),
            fixed=fixed,
            table_point=table_point,
            **kwargs,
        )


@dataclass(frozen=True)
class ReplicationRecord:
    replication: int
    point: GridPoint
    p: float
    k: int
    k1: int
    k2: int
    theta_intermediate: float
    gamma1_hat: float
    eta_hat: float
    d_n: float
    theta_extreme: float
    theta_hw: float
    true_value: float
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def ratio(self, method: str) -> float:
        estimate = self.theta_extreme if method == "AIE" else self.theta_hw
        return estimate / self.true_value


@dataclass(frozen=True)
class RatioSummary:
    model: str
    p: float
    method: str
    mean: float
    sd: float
    count: int


@dataclass(frozen=True)
class SmseRow:
    model: str
    p: float
    method: str
    varying: str
    point: GridPoint
    smse: float | None
    count: int

    @property
    def is_gap(self) -> bool:
        return self.smse is None


@dataclass(frozen=True)
class QQRow:
    rank: int
    log_ratio: float
    standardized: float
    normal_quantile: float


@dataclass(frozen=True)
class LogRatioDiagnostics:
    rows: tuple[QQRow, ...]
    correlation: float
    excluded: int
    log_ratios: tuple[float, ...]


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    true_values: dict[float, float]
    records: list[ReplicationRecord]
    failed_replications: int = 0
    summaries: list[RatioSummary] = field(default_factory=list)
    smse: list[SmseRow] = field(default_factory=list)

    def successful(self, point: GridPoint | None = None, p: float | None = None) -> list[ReplicationRecord]:
        return [
            r for r in self.records
            if r.ok and (point is None or r.point == point) and (p is None or r.p == p)
        ]

    def ratios(self, point: GridPoint, p: float, method: str = "AIE") -> np.ndarray:
        records = sorted(self.successful(point, p), key=lambda r: r.replication)
        return np.array([r.ratio(method) for r in records], dtype=float)


def _failed_records(replication: int, spec: ExperimentSpec, true_values: Mapping[float, float], n: int, message: str):
    out = []
    for point in spec.grid:
        for p in spec.p_levels:
            out.append(ReplicationRecord(
                replication, point, p,
                fraction_to_count(point.alpha, n), fraction_to_count(point.alpha1, n),
                fraction_to_count(point.alpha2, n),
                math.nan, math.nan, math.nan, math.nan, math.nan, math.nan,
                true_values[p], message,
            ))
    return out


def _replicate(spec: ExperimentSpec, true_values: Mapping[float, float], replication: int) -> list[ReplicationRecord]:
    n = spec.n
    sample = sample_model(spec.model, n, RngStream(spec.seed, replication))
    try:
        f2 = empirical_cdf_at_sample(sample.y)
        ks = {fraction_to_count(pt.alpha, n) for pt in spec.grid}
        k1s = {fraction_to_count(pt.alpha1, n) for pt in spec.grid}
        k2s = {fraction_to_count(pt.alpha2, n) for pt in spec.grid}
        intermediate = {k: intermediate_estimate(sample, k, f2) for k in ks}
        gammas = {k1: hill_gamma1(sample.x, k1) for k1 in k1s}
        etas = {k2: eta_hat(sample, k2) for k2 in k2s}
    except TailGiniError as exc:
        logger.warning("replication %d failed: %s", replication, exc)
        return _failed_records(replication, spec, true_values, n, str(exc))

    records = []
    for point in spec.grid:
        k = fraction_to_count(point.alpha, n)
        k1 = fraction_to_count(point.alpha1, n)
        k2 = fraction_to_count(point.alpha2, n)
        theta_kn, diagnostics = intermediate[k]
        for p in spec.p_levels:
            config = TailConfig(k=k, k1=k1, k2=k2, p=p)
            try:
                fit = assemble_fit(theta_kn, gammas[k1], etas[k2], n, config, diagnostics)
            except TailGiniError as exc:
                records.append(ReplicationRecord(
                    replication, point, p, k, k1, k2, theta_kn, gammas[k1], etas[k2],
                    config.d_n(n), math.nan, math.nan, true_values[p], str(exc),
                ))
                continue
            records.append(ReplicationRecord(
                replication, point, p, k, k1, k2,
                fit.theta_intermediate, fit.gamma1_hat, fit.eta_hat, fit.d_n,
                fit.theta_extreme, fit.theta_hw, true_values[p],
            ))
    return records


def run_replications(
    spec: ExperimentSpec,
    true_values: Mapping[float, float],
    workers: int | None = None,
) -> ExperimentResult:
    """m seeded replications; every grid point and p level is fitted on each sample."""
    missing = [p for p in spec.p_levels if p not in true_values]
    if missing:
        raise ConfigError(f"no true value supplied for p in {missing}")
    true_values = {p: float(true_values[p]) for p in spec.p_levels}

    with tracer().start_as_current_span("run_replications") as span:
        span.set_attribute("model", spec.model.label)
        span.set_attribute("m", spec.m)
        span.set_attribute("n", spec.n)
        span.set_attribute("grid_points", len(spec.grid))
        batches = parallel_map(lambda i: _replicate(spec, true_values, i), range(spec.m), workers)

    records = [record for batch in batches for record in batch]
    failed = len({r.replication for r in records if not r.ok})
    if failed > MAX_FAILURE_SHARE * spec.m:
        raise ExperimentError(f"{failed} of {spec.m} replications failed (limit {MAX_FAILURE_SHARE:.0%})")
    if failed:
        logger.warning("%d of %d replications failed and are excluded", failed, spec.m)

    result = ExperimentResult(spec=spec, true_values=true_values, records=records, failed_replications=failed)
    result.summaries = ratio_summary(result)
    result.smse = smse_grid(result, spec.fixed)
    logger.info("%s: %d replications, %d grid points, %d records", spec.model.label, spec.m, len(spec.grid), len(records))
    return result


def smse(ratios: Sequence[float] | np.ndarray) -> float:
    """Mean of (ratio - 1)^2."""
    arr = np.asarray(ratios, dtype=float)
    if arr.size == 0:
        raise ConfigError("sMSE of an empty ratio set")
    return float(np.mean((arr - 1.0) ** 2))


def ratio_summary(result: ExperimentResult, point: GridPoint | None = None) -> list[RatioSummary]:
    point = point or result.spec.table_point
    rows = []
    for p in result.spec.p_levels:
        for method in METHODS:
            ratios = result.ratios(point, p, method)
            if ratios.size == 0:
                continue
            sd = float(np.std(ratios, ddof=1)) if ratios.size > 1 else math.nan
            rows.append(RatioSummary(result.spec.model.label, p, method, float(np.mean(ratios)), sd, int(ratios.size)))
    return rows


def smse_grid(result: ExperimentResult, fixed: float = 0.05) -> list[SmseRow]:
    """sMSE along each one-at-a-time sweep; a requested point without records is a gap row."""
    spec = result.spec
    sweeps = (
        ("alpha", [GridPoint(a, fixed, fixed) for a in spec.alphas]),
        ("alpha1", [GridPoint(fixed, a1, fixed) for a1 in spec.alpha1s]),
        ("alpha2", [GridPoint(fixed, fixed, a2) for a2 in spec.alpha2s]),
    )
    rows = []
    for p in spec.p_levels:
        for method in METHODS:
            for varying, points in sweeps:
                for point in points:
                    ratios = result.ratios(point, p, method)
                    value = smse(ratios) if ratios.size else None
                    rows.append(SmseRow(spec.model.label, p, method, varying, point, value, int(ratios.size)))
    return rows


def normal_qq(log_ratios: Sequence[float] | np.ndarray, excluded: int = 0) -> LogRatioDiagnostics:
    """Standardize, sort and pair with normal quantiles at i/(m+1)."""
    values = np.asarray(log_ratios, dtype=float)
    m = values.size
    if m < 30:
        raise ConfigError(f"log-ratio diagnostics need at least 30 values, got {m}")
    sd = float(np.std(values, ddof=1))
    if sd == 0.0 or not math.isfinite(sd):
        raise DegenerateSampleError("log-ratios have zero spread; cannot standardize")
    order = np.argsort(values, kind="stable")
    ordered = values[order]
    standardized = (ordered - values.mean()) / sd
    quantiles = norm.ppf(np.arange(1, m + 1) / (m + 1))
    correlation = float(np.corrcoef(standardized, quantiles)[0, 1])
    rows = tuple(
        QQRow(i + 1, float(ordered[i]), float(standardized[i]), float(quantiles[i])) for i in range(m)
    )
    return LogRatioDiagnostics(rows=rows, correlation=correlation, excluded=excluded, log_ratios=tuple(values))


def logratio_diagnostics(
    result: ExperimentResult,
    p: float | None = None,
    point: GridPoint | None = None,
    method: str = "AIE",
) -> LogRatioDiagnostics:
    point = point or result.spec.table_point
    p = result.spec.p_levels[0] if p is None else p
    ratios = result.ratios(point, p, method)
    positive = ratios > 0
    excluded = int((~positive).sum())
    if excluded:
        logger.warning("log-ratio diagnostics: %d non-positive ratios excluded", excluded)
    return normal_qq(np.log(ratios[positive]), excluded)


@dataclass(frozen=True)
class Phi0Check:
    model: str
    p: float
    monte_carlo: float
    phi0: float

    @property
    def relative_error(self) -> float:
        return self.monte_carlo / self.phi0 - 1.0


def phi0_check(
    model: SimModel,
    p: float,
    reps: int,
    size: int,
    seed: int,
    workers: int | None = None,
) -> Phi0Check:
    """Monte Carlo TG_p / (p^(1/eta - 1) Q1(1 - p)) against the quadrature value of phi0."""
    constants = phi0_constant(model.tau_at_one, model.gamma1, model.eta)
    tg = true_tg_replicates(model, p, reps, size, RngStream(seed), workers).value
    scale = p ** (1.0 / model.eta - 1.0) * true_q1(model, 1.0 - p)
    return Phi0Check(model.label, p, tg / scale, constants.phi0)
