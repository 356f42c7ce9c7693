"""Symmetry classes of index tuples for the Monte Carlo bound estimator.

Graph statistics on ``G(n, p)`` are invariant under relabelling vertices, so
an ordered tuple of edges matters only through its isomorphism type.  Types
and their multiplicities in ``K_n`` are obtained from the complete graph on
``2r`` vertices (enough room for any ``r`` edges): a type spanning ``w``
vertices occurs ``C(n, w) / C(2r, w)`` times as often in ``K_n``.

Regular rooted trees are invariant under permuting the children of any
vertex; tuples of edges are classified by relabelling child positions in
order of first appearance.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import product
from math import comb
from typing import Callable, Sequence

import numpy as np

from ..plan import IndexPlan, TupleClasses, enumerated_plan
from .graphs import EdgeIndexer

Edge = tuple[int, int]


def canonical_form(edges: Sequence[Edge]) -> tuple[Edge, ...]:
    """Canonical form of an ordered edge tuple under vertex relabelling.

    Each orientation of the edges is relabelled by first appearance; the
    smallest result is the representative.
    """
    best = None
    for flips in product((False, True), repeat=len(edges)):
        names: dict[int, int] = {}
        out = []
        for (a, b), f in zip(edges, flips):
            if f:
                a, b = b, a
            for x in (a, b):
                if x not in names:
                    names[x] = len(names)
            out.append((names[a], names[b]))
        key = tuple(out)
        if best is None or key < best:
            best = key
    return best


@lru_cache(maxsize=None)
def _type_table(arity: int) -> dict:
    """Tally of types of ordered tuples ``(k, ...)`` whose later entries differ from ``k``."""
    host = EdgeIndexer(2 * arity)
    table: dict = {}
    for labels in product(range(host.m), repeat=arity):
        if any(x == labels[0] for x in labels[1:]):
            continue
        form = canonical_form([host.pair(k) for k in labels])
        table[form] = table.get(form, 0) + 1
    return table


def _span(form: tuple[Edge, ...]) -> int:
    return 1 + max(x for e in form for x in e)


class VertexSymmetry:
    """Vertex-permutation symmetry of ``G(n, p)`` statistics."""

    def __init__(self, n: int, indexer: EdgeIndexer):
        self.n = n
        self.indexer = indexer

    def _sample(self, form, reps: int, rng: np.random.Generator) -> np.ndarray:
        w = _span(form)
        out = np.empty((reps, len(form)), dtype=np.int64)
        for i in range(reps):
            verts = rng.choice(self.n, size=w, replace=False)
            out[i] = [self.indexer.matrix[verts[a], verts[b]] for a, b in form]
        return out

    def _classes(self, arity, interacting, reps, rng) -> list:
        groups = []
        for form, tally in sorted(_type_table(arity).items()):
            w = _span(form)
            if w > self.n:
                continue
            rep = self._sample(form, reps, rng)
            if not interacting(rep[0]):
                continue
            groups.append((comb(self.n, w) * tally / comb(2 * arity, w), rep))
        return groups

    def plan(self, interaction: Callable[[int], Sequence[int]], reps: int = 16, seed: int = 0) -> IndexPlan:
        rng = np.random.default_rng(seed)
        m = self.indexer.m
        singles = [(float(m), self._sample(((0, 1),), reps, rng))]
        pairs = self._classes(2, lambda r: int(r[1]) in set(interaction(int(r[0]))), reps, rng)

        def triple_ok(r) -> bool:
            nb = set(interaction(int(r[0])))
            return int(r[1]) in nb and int(r[2]) in nb

        triples = self._classes(3, triple_ok, reps, rng)
        return IndexPlan(
            TupleClasses.build(1, singles), TupleClasses.build(2, pairs), TupleClasses.build(3, triples)
        )


class TreeSymmetry:
    """Child-permutation symmetry of a regular rooted tree."""

    def __init__(self, tree):
        self.tree = tree

    def key(self, labels: tuple[int, ...]) -> tuple:
        names: dict[tuple[int, int], int] = {}
        out = []
        for k in labels:
            path = []
            for parent, child in self.tree.root_path(k):
                slot = (parent, child)
                if slot not in names:
                    names[slot] = sum(1 for s in names if s[0] == parent)
                path.append(names[slot])
            out.append(tuple(path))
        return tuple(out)

    def plan(self, interaction: Callable[[int], Sequence[int]], reps: int = 16, seed: int = 0) -> IndexPlan:
        return enumerated_plan(self.tree.m, interaction, self.key, reps, seed)
