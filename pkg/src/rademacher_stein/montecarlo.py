"""Reproducible sampling of configurations and batch-based error estimates.

Random bits come from a counter-based generator (Philox).  Samples are grouped
in blocks of :data:`GEN_BLOCK`; block ``b`` of stream ``s`` under ``seed`` is
generated from the key ``(seed, s)`` with counter ``b``, so any sample can be
regenerated in isolation and parallel runs see exactly the same bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._parallel import ordered_map
from .core import Configuration, Functional, RademacherSpace, batch_to_masks

GEN_BLOCK = 256

STREAM_MAIN = 0
STREAM_PILOT = 1
STREAM_MEHLER_COPY = 2
STREAM_MEHLER_CLOCK = 3

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SampleSpec:
    """Sample count, seed and number of batches used for standard errors."""

    count: int
    seed: int = 0
    batches: int = 100

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("sample count must be positive")
        if not 1 <= self.batches <= self.count:
            raise ValueError("need 1 <= batches <= count")

    def batch_bounds(self) -> np.ndarray:
        """Start offsets of each batch plus the final end offset."""
        return np.linspace(0, self.count, self.batches + 1).round().astype(np.int64)


def _generator(seed: int, stream: int, block: int) -> np.random.Generator:
    key = (int(seed) & _MASK64) | (int(stream) << 64)
    counter = np.array([0, 0, block, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def uniform_block(m: int, block: int, seed: int, stream: int = STREAM_MAIN) -> np.ndarray:
    """``(GEN_BLOCK, m)`` float32 uniforms of one block."""
    return _generator(seed, stream, block).random((GEN_BLOCK, m), dtype=np.float32)


def sample_block(space: RademacherSpace, block: int, seed: int, stream: int = STREAM_MAIN) -> np.ndarray:
    """Configurations of one block as a boolean ``(GEN_BLOCK, m)`` batch."""
    return uniform_block(space.m, block, seed, stream) < space.p.astype(np.float32)


def sample_range(
    space: RademacherSpace, start: int, count: int, seed: int, stream: int = STREAM_MAIN
) -> np.ndarray:
    """Samples ``start .. start + count - 1`` as a boolean batch."""
    if count <= 0:
        return np.zeros((0, space.m), dtype=bool)
    first, last = start // GEN_BLOCK, (start + count - 1) // GEN_BLOCK
    blocks = [sample_block(space, b, seed, stream) for b in range(first, last + 1)]
    rows = np.concatenate(blocks)
    off = start - first * GEN_BLOCK
    return rows[off:off + count]


def sample_configuration(space: RademacherSpace, sample_index: int, seed: int) -> Configuration:
    """The ``sample_index``-th configuration of the main stream for ``seed``."""
    row = sample_range(space, sample_index, 1, seed)
    return Configuration(int(batch_to_masks(row)[0]), space.m)


def block_units(count: int, unit_blocks: int = 4) -> list[tuple[int, int]]:
    """Split ``0 .. count`` into fixed work units of whole generator blocks."""
    size = unit_blocks * GEN_BLOCK
    return [(s, min(s + size, count)) for s in range(0, count, size)]


def batched_sums(
    spec: SampleSpec,
    space: RademacherSpace,
    per_sample: Callable[[np.ndarray], np.ndarray],
    width: int,
    stream: int = STREAM_MAIN,
) -> np.ndarray:
    """Per-batch sums of ``per_sample(batch)`` (shape ``(N, width)``).

    Returns an array of shape ``(spec.batches, width)``.  Work units and the
    reduction order are fixed, so the result does not depend on the thread count.
    """
    bounds = spec.batch_bounds()
    batch_id = np.searchsorted(bounds, np.arange(spec.count), side="right") - 1

    def run(unit: tuple[int, int]) -> np.ndarray:
        lo, hi = unit
        vals = np.asarray(per_sample(sample_range(space, lo, hi - lo, spec.seed, stream)), float)
        ids = batch_id[lo:hi]
        starts = np.flatnonzero(np.r_[True, ids[1:] != ids[:-1]])
        out = np.zeros((spec.batches, width))
        out[ids[starts]] = np.add.reduceat(vals.reshape(hi - lo, width), starts, axis=0)
        return out

    total = np.zeros((spec.batches, width))
    for part in ordered_map(run, block_units(spec.count)):
        total += part
    return total


def jackknife(
    batch_sums: np.ndarray, batch_counts: np.ndarray, fn: Callable[[np.ndarray], np.ndarray]
) -> tuple[np.ndarray, np.ndarray]:
    """Estimate ``fn(means)`` and its delete-one-batch jackknife standard error."""
    batch_sums = np.asarray(batch_sums, float)
    counts = np.asarray(batch_counts, float)
    total, n = batch_sums.sum(axis=0), counts.sum()
    est = np.asarray(fn(total / n), float)
    b = batch_sums.shape[0]
    if b < 2:
        return est, np.full_like(est, np.nan)
    loo = np.array([fn((total - batch_sums[i]) / (n - counts[i])) for i in range(b)], float)
    err = np.sqrt((b - 1) / b * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
    return est, err


def estimate_functional_stats(
    space: RademacherSpace,
    f: Functional,
    spec: SampleSpec,
    moments: Sequence[float] = (),
    stream: int = STREAM_MAIN,
) -> dict:
    """Mean, variance and absolute moments ``E|F|^r`` of ``f`` with standard errors."""
    moments = [float(r) for r in moments]
    if any(r < 1 for r in moments):
        raise ValueError("moment orders must be >= 1")
    shift = float(f.evaluate(sample_range(space, 0, 1, spec.seed, stream))[0])

    def per_sample(batch: np.ndarray) -> np.ndarray:
        v = f.evaluate(batch)
        d = v - shift
        cols = [d, d * d] + [np.abs(v) ** r for r in moments]
        return np.stack(cols, axis=1)

    sums = batched_sums(spec, space, per_sample, 2 + len(moments), stream)
    counts = np.diff(spec.batch_bounds())

    def fn(means: np.ndarray) -> np.ndarray:
        var = max(means[1] - means[0] ** 2, 0.0)
        return np.concatenate([[means[0] + shift, var], means[2:]])

    est, err = jackknife(sums, counts, fn)
    err = np.where(np.isfinite(err), err, 0.0)
    return {
        "mean": float(est[0]),
        "variance": float(est[1]),
        "moments": {r: float(v) for r, v in zip(moments, est[2:])},
        "stderrs": {
            "mean": float(err[0]),
            "variance": float(err[1]),
            "moments": {r: float(v) for r, v in zip(moments, err[2:])},
        },
        "count": spec.count,
    }
