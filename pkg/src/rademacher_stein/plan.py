"""Index plans: which single indices, pairs and triples a Monte Carlo bound visits.

The seven-term bound sums expectations over indices ``k``, interacting pairs
``(k, l)`` and triples ``(l, j, k)`` with ``j, k`` both interacting with ``l``.
When the law of the statistic is invariant under a group acting on the
indices, all tuples in one orbit share the same expectations.  A plan groups
tuples into such classes, keeps the class size and a handful of
representatives, and the estimator averages over the representatives.
Without a known symmetry every tuple is its own class.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class TupleClasses:
    """Classes of index tuples with sizes and representatives (grouped by class)."""

    arity: int
    counts: np.ndarray
    reps: np.ndarray
    starts: np.ndarray

    @property
    def n_classes(self) -> int:
        return int(self.counts.size)

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(np.r_[self.starts, self.reps.shape[0]])

    def class_mean(self, values: np.ndarray) -> np.ndarray:
        """Average per-representative columns ``(N, R)`` to per-class ``(N, C)``."""
        if self.n_classes == 0:
            return np.zeros((values.shape[0], 0))
        return np.add.reduceat(values, self.starts, axis=1) / self.sizes

    @classmethod
    def build(cls, arity: int, groups: Iterable[tuple[float, np.ndarray]]) -> "TupleClasses":
        counts, reps = [], []
        for count, r in groups:
            r = np.asarray(r, dtype=np.int64).reshape(-1, arity)
            if r.shape[0] == 0:
                continue
            counts.append(float(count))
            reps.append(r)
        if not reps:
            return cls(arity, np.zeros(0), np.zeros((0, arity), np.int64), np.zeros(0, np.int64))
        sizes = np.array([r.shape[0] for r in reps])
        starts = np.r_[0, np.cumsum(sizes)[:-1]].astype(np.int64)
        return cls(arity, np.array(counts), np.concatenate(reps), starts)


@dataclass(frozen=True, eq=False)
class IndexPlan:
    singles: TupleClasses
    pairs: TupleClasses
    triples: TupleClasses

    def gradient_indices(self) -> np.ndarray:
        parts = [self.singles.reps[:, 0], self.pairs.reps[:, 0], self.triples.reps[:, 1:].ravel()]
        return np.unique(np.concatenate(parts))

    def second_gradient_pairs(self) -> np.ndarray:
        """Unique ``(l, k)`` pairs whose ``D_l D_k F`` is needed."""
        t = self.triples.reps
        parts = [self.pairs.reps[:, ::-1], t[:, [0, 1]], t[:, [0, 2]]]
        both = np.concatenate(parts).reshape(-1, 2)
        if both.shape[0] == 0:
            return both
        return np.unique(both, axis=0)


def _pick(members: list, reps: int, rng: np.random.Generator) -> np.ndarray:
    arr = np.asarray(members, dtype=np.int64)
    if reps <= 0 or arr.shape[0] <= reps:
        return arr
    idx = np.sort(rng.choice(arr.shape[0], size=reps, replace=False))
    return arr[idx]


def _group(
    tuples: Iterable[tuple[int, ...]],
    key: Callable[[tuple[int, ...]], Hashable] | None,
    reps: int,
    rng: np.random.Generator,
) -> list[tuple[float, np.ndarray]]:
    if key is None:
        return [(1.0, np.asarray([t])) for t in tuples]
    classes: dict = {}
    for t in tuples:
        classes.setdefault(key(t), []).append(t)
    return [(float(len(v)), _pick(v, reps, rng)) for v in classes.values()]


def enumerated_plan(
    m: int,
    interaction: Callable[[int], Sequence[int]],
    key: Callable[[tuple[int, ...]], Hashable] | None = None,
    reps: int = 16,
    seed: int = 0,
) -> IndexPlan:
    """Plan built by listing every interacting pair and triple.

    ``key`` maps a tuple to its symmetry class; ``None`` keeps every tuple as
    its own class (no pooling).
    """
    rng = np.random.default_rng(seed)
    nbrs = [sorted(int(x) for x in interaction(k)) for k in range(m)]
    singles = _group(((k,) for k in range(m)), key, reps, rng)
    pairs = _group(((k, l) for k in range(m) for l in nbrs[k]), key, reps, rng)
    triples = _group(
        ((l, j, k) for l in range(m) for j in nbrs[l] for k in nbrs[l]), key, reps, rng
    )
    return IndexPlan(
        TupleClasses.build(1, singles), TupleClasses.build(2, pairs), TupleClasses.build(3, triples)
    )
