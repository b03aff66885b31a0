"""
Order statistics, empirical distribution values and the brute-force tail Gini oracle.

Every estimator in the package builds on the pieces here. The empirical
distribution function always uses the n+1 denominator:

    F_n(v) = #{i : sample_i <= v} / (n + 1)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from tailgini.errors import InvalidSampleError

logger = logging.getLogger(__name__)


def as_finite_array(values: Sequence[float] | np.ndarray, name: str = "values") -> np.ndarray:
    """Coerce to a 1-d float64 array, rejecting NaN/inf with the index of the first offender."""
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise InvalidSampleError(f"{name} must be one-dimensional, got shape {arr.shape}")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise InvalidSampleError(f"{name}[{bad[0]}] is not finite ({arr[bad[0]]})")
    return arr


@dataclass(frozen=True, eq=False)
class PairedSample:
    """n paired loss observations (x_i, y_i); y is the systemic variable."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = as_finite_array(self.x, "x")
        y = as_finite_array(self.y, "y")
        if x.size != y.size:
            raise InvalidSampleError(f"x and y differ in length ({x.size} != {y.size})")
        if x.size < 2:
            raise InvalidSampleError(f"a paired sample needs n >= 2, got {x.size}")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return int(self.x.size)

    def with_x(self, x: Sequence[float] | np.ndarray) -> "PairedSample":
        return PairedSample(np.asarray(x, dtype=float), self.y)

    def with_y(self, y: Sequence[float] | np.ndarray) -> "PairedSample":
        return PairedSample(self.x, np.asarray(y, dtype=float))


@dataclass(frozen=True, eq=False)
class OrderStats:
    """Ascending order statistics with the 0-based index each one came from."""

    sorted: np.ndarray
    source_permutation: np.ndarray

    def __len__(self) -> int:
        return int(self.sorted.size)

    def upper(self, i: int) -> float:
        """X_{n-i+1,n}: the i-th largest value, i = 1..n."""
        return float(self.sorted[self.sorted.size - i])

    def nth(self, j: int) -> float:
        """X_{j,n}: the j-th smallest value, j = 1..n."""
        return float(self.sorted[j - 1])


def order_statistics(v: Sequence[float] | np.ndarray) -> OrderStats:
    arr = as_finite_array(v)
    if arr.size < 1:
        raise InvalidSampleError("order statistics need at least one value")
    perm = np.argsort(arr, kind="stable")
    return OrderStats(sorted=arr[perm], source_permutation=perm)


class EmpiricalCdf:
    """F_n(v) = #{i : sample_i <= v} / (n + 1), built once per sample."""

    def __init__(self, sample: Sequence[float] | np.ndarray):
        arr = as_finite_array(sample, "sample")
        if arr.size == 0:
            raise InvalidSampleError("empirical cdf of an empty sample")
        self.sorted = np.sort(arr, kind="stable")
        self.n = int(arr.size)

    def __call__(self, v):
        counts = np.searchsorted(self.sorted, v, side="right")
        return counts / (self.n + 1)


def empirical_cdf_value(sample: Sequence[float] | np.ndarray, v: float) -> float:
    if not np.isfinite(v):
        raise InvalidSampleError(f"evaluation point {v} is not finite")
    return float(EmpiricalCdf(sample)(v))


def empirical_cdf_at_sample(v: np.ndarray) -> np.ndarray:
    """F_n evaluated at every sample point (ties share the max rank)."""
    return rankdata(v, method="max") / (v.size + 1)


def check_tail_count(k: int, n: int, name: str = "k", minimum: int = 2) -> int:
    if int(k) != k:
        raise InvalidSampleError(f"{name} must be an integer, got {k}")
    k = int(k)
    if not minimum <= k < n:
        raise InvalidSampleError(f"{name}={k} outside [{minimum}, {n - 1}] for n={n}")
    return k


@dataclass(frozen=True, eq=False)
class TailSelection:
    """Indices with y strictly above Y_{n-k,n}."""

    indices: np.ndarray
    threshold: float
    k: int

    @property
    def qualifying(self) -> int:
        return int(self.indices.size)

    @property
    def ties_at_threshold(self) -> bool:
        return self.qualifying < self.k


def tail_selection(y: np.ndarray, k: int) -> TailSelection:
    n = y.size
    k = check_tail_count(k, n)
    threshold = float(np.partition(y, n - k - 1)[n - k - 1])
    indices = np.flatnonzero(y > threshold)
    if indices.size < k:
        logger.warning(
            "ties at Y_{n-k,n}=%r: %d of k=%d points exceed the threshold", threshold, indices.size, k
        )
    return TailSelection(indices=indices, threshold=threshold, k=k)


def tg_scale(n: int, k: int) -> float:
    """4n / (k^2 (k-1)), the normalisation in front of the pair sum."""
    return 4.0 * n / (k * k * (k - 1))


def tg_bruteforce(sample: PairedSample, k: int) -> float:
    """Literal O(n^2) double sum over i<j. Kept as the oracle for the fast estimator."""
    n = sample.n
    k = check_tail_count(k, n)
    x, y = sample.x, sample.y
    f2 = empirical_cdf_at_sample(y)
    threshold = tail_selection(y, k).threshold

    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            if x[i] > 0 and x[j] > 0 and y[i] > threshold and y[j] > threshold:
                total += (x[i] - x[j]) * (f2[i] - f2[j])
    return tg_scale(n, k) * total
