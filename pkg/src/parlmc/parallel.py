"""Round-based parallel gradient execution with deterministic reduction.

One *round* evaluates R gradients that may run concurrently; rounds are the
unit of time complexity.  A worker budget (``parallel_width``) below R splits
the round into ceil(R / width) waves, which is exactly what the accounting
records.  Results land in pre-assigned slots by index, never by completion
order, so trajectories are bitwise independent of scheduling.

The physical thread count can be capped with the ``PARLMC_WORKERS``
environment variable without changing the accounting.
"""

from __future__ import annotations

import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from time import perf_counter

import numpy as np

from .errors import ConfigurationError, RoundExecutionError

_pools: dict[int, ThreadPoolExecutor] = {}
_pools_lock = threading.Lock()


def worker_limit() -> int | None:
    """Physical worker cap from the PARLMC_WORKERS environment variable."""
    raw = os.environ.get("PARLMC_WORKERS")
    if raw is None:
        return None
    try:
        value = int(raw)
    except ValueError:
        raise ConfigurationError(f"PARLMC_WORKERS must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigurationError(f"PARLMC_WORKERS must be >= 1, got {value}")
    return value


def _pool(workers: int) -> ThreadPoolExecutor:
    with _pools_lock:
        pool = _pools.get(workers)
        if pool is None:
            pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="parlmc-round")
            _pools[workers] = pool
        return pool


@dataclass
class RoundPlan:
    """R evaluation points for one round plus the worker budget."""

    points: list[np.ndarray]
    round_index: int = 0
    parallel_width: int | None = None  # None means unbounded (= R)


@dataclass
class RoundResult:
    """Gradients in slot order plus round accounting."""

    gradients: list[np.ndarray]
    wall_time: float
    rounds_consumed: int


def execute_round(plan: RoundPlan, potential) -> RoundResult:
    """Evaluate all points of a round; output order equals input order.

    Updates the potential's counter: +R evaluations (one per point, via the
    oracle itself) and +ceil(R / parallel_width) sequential rounds.
    """
    R = len(plan.points)
    if R == 0:
        raise ConfigurationError("round plan has no points")
    width = R if plan.parallel_width is None else int(plan.parallel_width)
    if width < 1:
        raise ConfigurationError(f"parallel width must be >= 1, got {width}")
    rounds = math.ceil(R / width)

    start = perf_counter()
    gradients: list[np.ndarray | None] = [None] * R
    workers = min(width, worker_limit() or width, R)
    if workers == 1:
        for i, point in enumerate(plan.points):
            try:
                gradients[i] = potential.gradient(point)
            except Exception as exc:
                raise RoundExecutionError(f"gradient failed at round slot {i}: {exc}", index=i) from exc
    else:
        pool = _pool(workers)
        for wave_start in range(0, R, width):
            wave = range(wave_start, min(wave_start + width, R))
            futures = {i: pool.submit(potential.gradient, plan.points[i]) for i in wave}
            for i in wave:
                try:
                    gradients[i] = futures[i].result()
                except Exception as exc:
                    raise RoundExecutionError(f"gradient failed at round slot {i}: {exc}", index=i) from exc
    wall = perf_counter() - start
    potential.counter.add_rounds(rounds, wall_time=wall)
    return RoundResult(gradients=gradients, wall_time=wall, rounds_consumed=rounds)


def weighted_prefix_combine(gradients: list[np.ndarray], weights: np.ndarray) -> list[np.ndarray]:
    """output[r] = sum_{j<=r} weights[..., r, j] * gradients[j].

    Summation runs in ascending j, a fixed order so reductions are
    reproducible under any scheduling.  `weights` is (..., R, R) lower
    triangular with batch dimensions broadcasting against the gradients.
    """
    R = len(gradients)
    weights = np.asarray(weights, dtype=float)
    if weights.shape[-2:] != (R, R):
        raise ConfigurationError(
            f"weights trailing shape {weights.shape[-2:]} does not match {R} gradients"
        )
    combined = []
    for r in range(R):
        acc = weights[..., r, 0, None] * gradients[0]
        for j in range(1, r + 1):
            acc = acc + weights[..., r, j, None] * gradients[j]
        combined.append(acc)
    return combined
