"""Replication-level parallelism and per-replication random streams."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

THREADS_ENV = "TAILGINI_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def default_workers() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning("ignoring %s=%r: not an integer", THREADS_ENV, raw)
    return min(8, os.cpu_count() or 1)


@dataclass(frozen=True)
class RngStream:
    """One independent stream per (master seed, index).

    Streams come from SeedSequence spawn keys, so they do not depend on how
    replications are split across workers.
    """

    seed: int
    index: int = 0
    parents: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(*self.parents, self.index))
        return np.random.default_rng(sequence)

    def child(self, index: int) -> "RngStream":
        """A sub-stream; children of different streams never coincide."""
        return RngStream(self.seed, index, (*self.parents, self.index))


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """Map in a thread pool; results come back in input order."""
    items = list(items)
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
