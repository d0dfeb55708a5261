"""Deterministic sharded Monte-Carlo averaging and importance proposals.

The sample budget is split into fixed-size shards, each driven by its
own child seed spawned from the master seed in shard order.  Shards may
evaluate concurrently; their (count, sum, sum-of-squares) statistics
are merged by a pairwise tree in shard order, so the result is
bit-identical for a given (seed, samples) no matter how many worker
threads ran the shards.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

__all__ = ["MCSettings", "sharded_mean", "exponential_positions", "exponential_density"]

SHARD_SIZE = 16384


@dataclass(frozen=True)
class MCSettings:
    """Knobs of one Monte-Carlo estimate.

    Attributes:
        samples: total sample count (>= 1).
        seed: master seed; fixes every draw.
        proposal_scale: widens (>1) or narrows (<1) the proposal cloud.
        mu: importance exponent of the proposal density
            ``prod exp(-2*mu*|y_i|)``; None defers to the model's
            certified decay rate.
        threads: shard workers; 0 picks the CPU count.  Results never
            depend on this value.
    """

    samples: int
    seed: int
    proposal_scale: float = 1.0
    mu: float | None = None
    threads: int = 1

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.proposal_scale <= 0.0:
            raise ValueError("proposal_scale must be positive")
        if self.mu is not None and self.mu <= 0.0:
            raise ValueError("mu must be positive when given")
        if self.threads < 0:
            raise ValueError("threads must be >= 0")

    def worker_count(self):
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)


def _tree_reduce(stats):
    while len(stats) > 1:
        merged = [
            (a[0] + b[0], a[1] + b[1], a[2] + b[2])
            for a, b in zip(stats[0::2], stats[1::2])
        ]
        if len(stats) % 2:
            merged.append(stats[-1])
        stats = merged
    return stats[0]


def sharded_mean(draw_values, settings):
    """Mean and standard error of ``draw_values(rng, count)`` over the budget.

    ``draw_values`` must return a float array of shape (count,) computed
    purely from the rng draws; it is called once per shard.
    """
    total = settings.samples
    n_shards = (total + SHARD_SIZE - 1) // SHARD_SIZE
    seeds = np.random.SeedSequence(settings.seed).spawn(n_shards)

    def run_shard(index):
        count = SHARD_SIZE if index < n_shards - 1 else total - SHARD_SIZE * (n_shards - 1)
        values = np.asarray(draw_values(np.random.default_rng(seeds[index]), count), dtype=float)
        return count, float(values.sum()), float((values * values).sum())

    workers = min(settings.worker_count(), n_shards)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            stats = list(pool.map(run_shard, range(n_shards)))
    else:
        stats = [run_shard(i) for i in range(n_shards)]

    count, total_sum, total_sq = _tree_reduce(stats)
    mean = total_sum / count
    if count > 1:
        variance = max(0.0, total_sq - total_sum * total_sum / count) / (count * (count - 1))
    else:
        variance = 0.0
    return mean, float(np.sqrt(variance))


def exponential_positions(rng, count, blocks, rate):
    """Draw (count, blocks, 3) points from ``prod_i (rate^3/pi) exp(-2*rate*|y_i|)``.

    Radial law Gamma(3, 1/(2*rate)) with uniform directions.
    """
    radius = rng.gamma(3.0, 1.0 / (2.0 * rate), size=(count, blocks))
    direction = rng.standard_normal((count, blocks, 3))
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    return radius[..., None] * direction


def exponential_density(points, rate):
    """Density of :func:`exponential_positions` at ``points`` (..., blocks, 3)."""
    points = np.asarray(points, dtype=float)
    blocks = points.shape[-2]
    norms = np.linalg.norm(points, axis=-1).sum(axis=-1)
    return (rate**3 / np.pi) ** blocks * np.exp(-2.0 * rate * norms)
