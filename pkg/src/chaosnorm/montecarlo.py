"""Seeded simulation of ``F_n = S_n / V_n`` and estimators built on it.

Uniforms come from numpy's Philox counter-based generator, one independent key
per (seed, chunk), so a batch is a pure function of ``(n, count, seed)`` and a
shorter batch is a prefix of a longer one. Normals are ``ndtri`` of 53-bit
uniforms taken strictly inside (0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .hermite import hermite_eval
from .patterns import MultiplicityPattern

GENERATOR_VERSION = "philox4x64-ndtri53-v1"
CHUNK_ROWS = 1 << 16
MIN_DISTANCE_COUNT = 1000
BOOTSTRAP_RESAMPLES = 200
_SEED_MASK = (1 << 64) - 1
_KOLMOGOROV_STREAM = (1 << 63) + 1
_WASSERSTEIN_STREAM = (1 << 63) + 2
_REFERENCE_STREAM = (1 << 63) + 3


def normal_cdf(z):
    return ndtr(z)


def normal_quantile(q):
    arr = np.asarray(q, dtype=float)
    if np.any(~((arr > 0) & (arr < 1))):
        raise ValueError(f"normal_quantile needs q in (0, 1), got {q}")
    out = ndtri(arr)
    return float(out) if out.ndim == 0 else out


def _philox(seed: int, stream: int) -> np.random.Philox:
    return np.random.Philox(key=(seed & _SEED_MASK) | (stream << 64))


def _uniform53(bitgen: np.random.Philox, shape: tuple[int, ...]) -> np.ndarray:
    raw = bitgen.random_raw(size=shape)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def increment_chunks(n: int, count: int, seed: int) -> Iterator[np.ndarray]:
    """Yield the Gaussian increments behind a batch as ``(rows, n)`` arrays."""
    for chunk, start in enumerate(range(0, count, CHUNK_ROWS)):
        rows = min(CHUNK_ROWS, count - start)
        yield ndtri(_uniform53(_philox(seed, chunk), (rows, n)))


def _self_normalized(x: np.ndarray) -> np.ndarray:
    return x.sum(axis=1) / np.sqrt(np.einsum("ij,ij->i", x, x))


@dataclass(frozen=True)
class SampleBatch:
    """Draws of ``F_n``; ``n is None`` marks a reference batch of exact standard normals."""

    n: int | None
    seed: int
    count: int
    values: np.ndarray = field(repr=False)
    generator_version: str = GENERATOR_VERSION

    @property
    def summary(self) -> dict[str, float]:
        v = self.values
        return {"mean": float(np.mean(v)), "second_moment": float(np.mean(v * v)), "count": self.count}


def _check_count(count: int) -> None:
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")


def sample_fn(n: int, count: int, seed: int) -> SampleBatch:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    _check_count(count)
    values = np.concatenate([_self_normalized(x) for x in increment_chunks(n, count, seed)])
    # Cauchy-Schwarz, with a little room for rounding
    if np.any(np.abs(values) > math.sqrt(n) * (1 + 1e-12)):
        raise AssertionError("a draw violates |F_n| <= sqrt(n)")
    values.setflags(write=False)
    return SampleBatch(n, seed, count, values)


def sample_standard_normal(count: int, seed: int) -> SampleBatch:
    """Reference batch from the same uniform source, for null calibration."""
    _check_count(count)
    values = ndtri(_uniform53(_philox(seed, _REFERENCE_STREAM), (count,)))
    values.setflags(write=False)
    return SampleBatch(None, seed, count, values)


def mc_coefficients(patterns: Sequence[MultiplicityPattern], n: int, batch: SampleBatch,
                    slots: Sequence[int] | None = None) -> list[tuple[float, float]]:
    """``E[F_n prod_r H_{p_r}(X_r)]`` for each pattern, with plug-in standard errors.

    The increments of ``batch`` are regenerated from its seed. Pattern parts go to the
    increments listed in ``slots`` (0-based, default ``0, 1, ...``).
    """
    if batch.n != n:
        raise ValueError(f"batch was drawn for n={batch.n}, not n={n}")
    for p in patterns:
        if p.part_count > n:
            raise ValueError(f"pattern {p} has {p.part_count} parts, more than n={n}")
    if slots is not None:
        if len(set(slots)) != len(slots) or any(not 0 <= s < n for s in slots):
            raise ValueError(f"slots must be distinct indices in 0..{n - 1}, got {slots}")
        if any(p.part_count > len(slots) for p in patterns):
            raise ValueError("not enough slots for every pattern part")
    slots = list(range(n)) if slots is None else list(slots)
    total = np.zeros(len(patterns))
    total_sq = np.zeros(len(patterns))
    for x in increment_chunks(n, batch.count, batch.seed):
        f = _self_normalized(x)
        for j, p in enumerate(patterns):
            y = f.copy()
            for slot, part in zip(slots, p.parts):
                y *= hermite_eval(part, x[:, slot])
            total[j] += y.sum()
            total_sq[j] += np.dot(y, y)
    count = batch.count
    out = []
    for s, s2 in zip(total, total_sq):
        mean = s / count
        var = max(s2 / count - mean * mean, 0.0) * count / max(count - 1, 1)
        out.append((float(mean), math.sqrt(var / count)))
    return out


def mc_coefficient(p: MultiplicityPattern, n: int, batch: SampleBatch,
                   slots: Sequence[int] | None = None) -> tuple[float, float]:
    return mc_coefficients([p], n, batch, slots)[0]


def _check_distance_batch(batch: SampleBatch) -> None:
    if batch.count < MIN_DISTANCE_COUNT:
        raise ValueError(f"distance estimators need at least {MIN_DISTANCE_COUNT} draws, got {batch.count}")
    if not np.all(np.isfinite(batch.values)):
        raise ValueError("batch contains non-finite draws")


def _sup_gap(points: np.ndarray, weights: np.ndarray, cdf: np.ndarray) -> float:
    # ECDF jumps at each distinct point; compare both one-sided limits with the CDF there
    cum = np.cumsum(weights)
    total = cum[-1]
    after = cum / total
    before = (cum - weights) / total
    return float(max(np.max(np.abs(after - cdf)), np.max(np.abs(before - cdf))))


def _resample_weights(rng: np.random.Generator, owner: np.ndarray, size: int) -> np.ndarray:
    # multinomial bootstrap: how often each distinct value is drawn
    picks = owner[rng.integers(0, owner.size, owner.size)]
    return np.bincount(picks, minlength=size).astype(float)


def _bootstrap_rng(batch: SampleBatch, stream: int) -> np.random.Generator:
    return np.random.Generator(_philox(batch.seed, stream))


def empirical_kolmogorov(batch: SampleBatch) -> tuple[float, float]:
    """``sup_z |G(z) - Phi(z)|`` with a bootstrap standard error."""
    _check_distance_batch(batch)
    points, owner, counts = np.unique(batch.values, return_inverse=True, return_counts=True)
    cdf = ndtr(points)
    distance = _sup_gap(points, counts.astype(float), cdf)
    rng = _bootstrap_rng(batch, _KOLMOGOROV_STREAM)
    boot = [_sup_gap(points, _resample_weights(rng, owner, points.size), cdf)
            for _ in range(BOOTSTRAP_RESAMPLES)]
    return distance, float(np.std(boot, ddof=1))


def _quantile_coupling(sorted_values: np.ndarray, weights: np.ndarray) -> float:
    cum = np.cumsum(weights)
    total = cum[-1]
    mid = (cum - 0.5 * weights) / total
    keep = weights > 0
    return float(np.sum(weights[keep] * np.abs(sorted_values[keep] - ndtri(mid[keep]))) / total)


def empirical_wasserstein1(batch: SampleBatch) -> float:
    """Quantile coupling: mean of ``|x_(i) - Phi^{-1}((i - 1/2)/count)|``."""
    _check_distance_batch(batch)
    return _quantile_coupling(np.sort(batch.values), np.ones(batch.count))


def empirical_wasserstein1_stderr(batch: SampleBatch) -> float:
    _check_distance_batch(batch)
    x = np.sort(batch.values)
    rng = _bootstrap_rng(batch, _WASSERSTEIN_STREAM)
    owner = np.arange(x.size)
    boot = [_quantile_coupling(x, _resample_weights(rng, owner, x.size)) for _ in range(BOOTSTRAP_RESAMPLES)]
    return float(np.std(boot, ddof=1))


CSV_COLUMNS = ("n", "seed", "count", "stat", "value", "stderr")
