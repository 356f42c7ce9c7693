"""Erdos-Renyi graph statistics as Rademacher functionals.

Edges of the complete graph on ``n`` vertices are labelled ``0 .. C(n,2) - 1``
in lexicographic order of ``(min, max)``; edge ``k`` is present iff ``X_k = +1``.
Every statistic comes with analytic first and second gradient oracles and an
interaction oracle, and with its exact mean and variance.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import combinations, permutations
from math import comb, factorial, sqrt
from typing import Sequence

import numpy as np
from scipy.stats import binom

from ..core import Functional, RademacherSpace

_ROWS = 512


class EdgeIndexer:
    """Bijection between unordered vertex pairs and edge labels."""

    def __init__(self, n: int):
        if n < 2:
            raise ValueError("need at least two vertices")
        self.n = n
        iu, ju = np.triu_indices(n, k=1)
        self.u, self.v = iu.astype(np.int64), ju.astype(np.int64)
        self.matrix = np.full((n, n), -1, dtype=np.int64)
        self.matrix[iu, ju] = np.arange(iu.size)
        self.matrix[ju, iu] = np.arange(iu.size)

    @property
    def m(self) -> int:
        return int(self.u.size)

    def label(self, i: int, j: int) -> int:
        if i == j or not (0 <= i < self.n and 0 <= j < self.n):
            raise ValueError(f"invalid vertex pair ({i}, {j})")
        return int(self.matrix[i, j])

    def pair(self, k: int) -> tuple[int, int]:
        if not 0 <= k < self.m:
            raise IndexError(f"edge label {k} out of range")
        return int(self.u[k]), int(self.v[k])

    def adjacency(self, batch: np.ndarray, dtype=bool) -> np.ndarray:
        a = np.zeros((batch.shape[0], self.n, self.n), dtype=dtype)
        a[:, self.u, self.v] = batch
        a[:, self.v, self.u] = batch
        return a

    @cached_property
    def incidence(self) -> np.ndarray:
        inc = np.zeros((self.m, self.n), dtype=np.float32)
        inc[np.arange(self.m), self.u] = 1.0
        inc[np.arange(self.m), self.v] = 1.0
        return inc

    def degrees(self, batch: np.ndarray) -> np.ndarray:
        return np.rint(batch.astype(np.float32) @ self.incidence).astype(np.int64)

    def neighbours(self, k: int) -> list[int]:
        """Labels of the ``2(n - 2)`` edges sharing exactly one vertex with edge ``k``."""
        a, b = self.pair(k)
        out = [self.matrix[a, w] for w in range(self.n) if w not in (a, b)]
        out += [self.matrix[b, w] for w in range(self.n) if w not in (a, b)]
        return sorted(int(x) for x in out)

    def disjoint(self, k: int) -> list[int]:
        a, b = self.pair(k)
        mask = (self.u != a) & (self.u != b) & (self.v != a) & (self.v != b)
        return np.flatnonzero(mask).tolist()

    def shared_vertex(self, ks: np.ndarray, ls: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """For edge pairs: the common vertex (or -1) and the two other endpoints."""
        a1, b1, a2, b2 = self.u[ks], self.v[ks], self.u[ls], self.v[ls]
        common = np.full(ks.shape, -1, dtype=np.int64)
        x = np.full(ks.shape, -1, dtype=np.int64)
        y = np.full(ks.shape, -1, dtype=np.int64)
        for c1, o1 in ((a1, b1), (b1, a1)):
            for c2, o2 in ((a2, b2), (b2, a2)):
                hit = (c1 == c2) & (o1 != o2)
                common = np.where(hit, c1, common)
                x = np.where(hit, o1, x)
                y = np.where(hit, o2, y)
        return common, x, y


@dataclass(frozen=True)
class ErdosRenyiModel:
    """``G(n, p)`` with ``p = theta * n^-alpha``."""

    n: int
    alpha: float = 0.0
    theta: float = 0.5

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("need at least two vertices")
        if self.alpha < 0 or self.theta <= 0:
            raise ValueError("alpha must be >= 0 and theta > 0")
        if not 0 < self.p < 1:
            raise ValueError(f"edge probability {self.p} is not inside (0, 1)")

    @classmethod
    def with_p(cls, n: int, p: float) -> "ErdosRenyiModel":
        return cls(n, 0.0, p)

    @property
    def p(self) -> float:
        return self.theta * self.n ** (-self.alpha)

    @cached_property
    def indexer(self) -> EdgeIndexer:
        return EdgeIndexer(self.n)

    @property
    def m(self) -> int:
        return self.n * (self.n - 1) // 2

    @cached_property
    def space(self) -> RademacherSpace:
        return RademacherSpace.uniform(self.m, self.p)

    @property
    def pq(self) -> float:
        return self.p * (1 - self.p)


def _rows(fn, batch: np.ndarray) -> np.ndarray:
    if batch.shape[0] <= _ROWS:
        return fn(batch)
    return np.concatenate([fn(batch[i:i + _ROWS]) for i in range(0, batch.shape[0], _ROWS)])


def _symmetry(model: ErdosRenyiModel):
    from .symmetry import VertexSymmetry

    return VertexSymmetry(model.n, model.indexer)


# -- triangles ----------------------------------------------------------------------


def triangle_variance(n: int, p: float) -> float:
    return comb(n, 3) * p**3 * (1 - p**3) + comb(n, 2) * (n - 2) * (n - 3) * (p**5 - p**6)


def triangle_statistic(model: ErdosRenyiModel) -> Functional:
    """Number of triangles in ``G(n, p)``."""
    n = model.n
    if n < 3:
        raise ValueError("triangle counts need n >= 3")
    idx = model.indexer
    s = sqrt(model.pq)

    def count(batch):
        a = idx.adjacency(batch, np.float32)
        return ((a @ a) * a).sum(axis=(1, 2)).astype(np.float64) / 6.0

    def grad(batch, ks):
        ks = np.asarray(ks, dtype=np.int64)

        def part(b):
            a = idx.adjacency(b)
            wings = a[:, idx.u[ks], :] & a[:, idx.v[ks], :]
            return s * wings.sum(axis=2)

        return _rows(part, batch)

    def grad2(batch, ks, ls):
        ks, ls = np.asarray(ks, np.int64), np.asarray(ls, np.int64)
        common, x, y = idx.shared_vertex(ks, ls)
        ok = common >= 0
        third = np.where(ok, idx.matrix[np.maximum(x, 0), np.maximum(y, 0)], 0)
        return model.pq * (batch[:, third] & ok)

    return Functional(
        model.m,
        lambda b: _rows(count, b),
        grad,
        grad2,
        idx.neighbours,
        _symmetry(model),
        lambda: (comb(n, 3) * model.p**3, triangle_variance(n, model.p)),
        "triangles",
        {"statistic": "triangles", "n": n, "p": model.p},
    )


# -- general subgraph counts ------------------------------------------------------------


@dataclass(frozen=True)
class SubgraphPattern:
    """A simple undirected graph ``Gamma`` with at least one edge."""

    edges: tuple[tuple[int, int], ...]
    vertex_count: int | None = None

    def __post_init__(self) -> None:
        clean = []
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError("patterns must not have loops")
            clean.append((min(a, b), max(a, b)))
        if not clean:
            raise ValueError("pattern needs at least one edge")
        if len(set(clean)) != len(clean):
            raise ValueError("pattern has repeated edges")
        verts = sorted({x for e in clean for x in e})
        relabel = {x: i for i, x in enumerate(verts)}
        clean = tuple(sorted((relabel[a], relabel[b]) for a, b in clean))
        v = len(verts) if self.vertex_count is None else int(self.vertex_count)
        if v < len(verts):
            raise ValueError("vertex count smaller than the vertices used by edges")
        object.__setattr__(self, "edges", clean)
        object.__setattr__(self, "vertex_count", v)

    @classmethod
    def parse(cls, text: str) -> "SubgraphPattern":
        """Parse ``"0-1,1-2"`` style edge lists."""
        edges = []
        for item in text.replace(";", ",").split(","):
            item = item.strip()
            if item:
                a, b = item.split("-")
                edges.append((int(a), int(b)))
        return cls(tuple(edges))

    @classmethod
    def named(cls, name: str) -> "SubgraphPattern":
        table = {
            "edge": ((0, 1),),
            "path3": ((0, 1), (1, 2)),
            "triangle": ((0, 1), (1, 2), (0, 2)),
            "cycle4": ((0, 1), (1, 2), (2, 3), (0, 3)),
            "star3": ((0, 1), (0, 2), (0, 3)),
        }
        if name not in table:
            raise ValueError(f"unknown pattern {name!r}; known: {sorted(table)}")
        return cls(table[name])

    @property
    def v(self) -> int:
        return self.vertex_count

    @property
    def e(self) -> int:
        return len(self.edges)

    @cached_property
    def degrees(self) -> list[int]:
        deg = [0] * self.v
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    @cached_property
    def automorphisms(self) -> int:
        if self.v > 8:
            raise ValueError("brute-force automorphisms limited to 8 vertices")
        es = set(self.edges)
        count = 0
        for perm in permutations(range(self.v)):
            if all((min(perm[a], perm[b]), max(perm[a], perm[b])) in es for a, b in self.edges):
                count += 1
        return count

    @property
    def kind(self) -> str:
        deg = [d for d in self.degrees if d > 0]
        if self.e == 1:
            return "edge"
        if self.e == 3 and len(deg) == 3 and all(d == 2 for d in deg):
            return "triangle"
        if self.e == 4 and len(deg) == 4 and all(d == 2 for d in deg):
            return "cycle4"
        if max(deg) == self.e and len(deg) == self.e + 1:
            return "star"
        return "generic"

    def has_adjacent_edges(self) -> bool:
        return max(self.degrees) >= 2

    def has_disjoint_edges(self) -> bool:
        return any(not set(e) & set(f) for e, f in combinations(self.edges, 2))

    def copies(self, n: int) -> np.ndarray:
        """Edge-label sets of every copy in ``K_n``, shape ``(count, e)``."""
        return _copies(self, n)


@lru_cache(maxsize=32)
def _copies(pattern: SubgraphPattern, n: int) -> np.ndarray:
    idx = EdgeIndexer(n) if n >= 2 else None
    seen = set()
    for emb in permutations(range(n), pattern.v):
        labels = tuple(sorted(idx.matrix[emb[a], emb[b]] for a, b in pattern.edges))
        seen.add(labels)
    return np.array(sorted(seen), dtype=np.int64).reshape(-1, pattern.e)


def copy_count(pattern: SubgraphPattern, n: int) -> int:
    return factorial(n) // (factorial(n - pattern.v) * pattern.automorphisms)


def subgraph_moments(pattern: SubgraphPattern, n: int, p: float) -> tuple[float, float]:
    """Exact mean and variance of the copy count in ``G(n, p)``.

    Fix one copy ``A`` on vertices ``0 .. v-1`` and list the copies ``B`` of the
    pattern inside ``K_{2v}`` sharing an edge with ``A``.  A copy using ``w``
    vertices outside ``A`` occurs ``C(n - v, w) / C(v, w)`` times as often in
    ``K_n`` as in ``K_{2v}``.
    """
    v, e = pattern.v, pattern.e
    total = copy_count(pattern, n)
    mean = total * p**e
    host = 2 * v
    idx = EdgeIndexer(host)
    base = {int(idx.matrix[a, b]) for a, b in pattern.edges}
    base_verts = set(range(v))
    acc = 0.0
    for labels in _copies(pattern, host):
        shared = len(base & set(labels.tolist()))
        if shared == 0:
            continue
        verts = {int(x) for k in labels for x in idx.pair(int(k))}
        w = len(verts - base_verts)
        acc += comb(n - v, w) / comb(v, w) * (p ** (2 * e - shared) - p ** (2 * e))
    return float(mean), float(total * acc)


def _generic_subgraph(model: ErdosRenyiModel, pattern: SubgraphPattern):
    copies = pattern.copies(model.n)
    by_edge: list[list[int]] = [[] for _ in range(model.m)]
    for c, labels in enumerate(copies):
        for k in labels:
            by_edge[k].append(c)
    by_edge_arr = [np.array(x, dtype=np.int64) for x in by_edge]
    s = sqrt(model.pq)

    def count(batch):
        return batch[:, copies].all(axis=2).sum(axis=1).astype(float)

    def through(batch, k, forced):
        cs = copies[by_edge_arr[k]]
        present = batch[:, cs] | np.isin(cs, forced)[None, :, :]
        return present.all(axis=2).sum(axis=1)

    def grad(batch, ks):
        return s * np.stack([through(batch, int(k), [int(k)]) for k in ks], axis=1).reshape(batch.shape[0], -1)

    def grad2(batch, ks, ls):
        cols = []
        for k, l in zip(ks, ls):
            k, l = int(k), int(l)
            if k == l:
                cols.append(np.zeros(batch.shape[0]))
                continue
            both = np.intersect1d(by_edge_arr[k], by_edge_arr[l])
            cs = copies[both]
            present = batch[:, cs] | np.isin(cs, [k, l])[None, :, :]
            cols.append(model.pq * present.all(axis=2).sum(axis=1))
        return np.stack(cols, axis=1).reshape(batch.shape[0], -1) if cols else np.zeros((batch.shape[0], 0))

    return count, grad, grad2


def _star_subgraph(model: ErdosRenyiModel, leaves: int):
    idx = model.indexer
    s = sqrt(model.pq)

    def binom_int(x, r):
        # C(x, r) elementwise for integer arrays
        out = np.ones_like(x, dtype=float)
        for i in range(r):
            out *= (x - i) / (i + 1)
        return np.where(x >= r, out, 0.0)

    def count(batch):
        return binom_int(idx.degrees(batch), leaves).sum(axis=1)

    def grad(batch, ks):
        ks = np.asarray(ks, np.int64)
        deg = idx.degrees(batch)
        own = batch[:, ks].astype(np.int64)
        da = deg[:, idx.u[ks]] - own
        db = deg[:, idx.v[ks]] - own
        return s * (binom_int(da, leaves - 1) + binom_int(db, leaves - 1))

    def grad2(batch, ks, ls):
        ks, ls = np.asarray(ks, np.int64), np.asarray(ls, np.int64)
        common, _, _ = idx.shared_vertex(ks, ls)
        ok = common >= 0
        deg = idx.degrees(batch)
        dw = deg[:, np.maximum(common, 0)] - batch[:, ks] - batch[:, ls]
        return model.pq * binom_int(dw, leaves - 2) * ok

    return count, grad, grad2


def _cycle4_subgraph(model: ErdosRenyiModel):
    idx = model.indexer
    s = sqrt(model.pq)

    def count(batch):
        a = idx.adjacency(batch, np.float32)
        a2 = a @ a
        closed = np.einsum("bij,bij->b", a2, a2, dtype=np.float64)
        deg = a.sum(axis=2, dtype=np.float64)
        return (closed - 2 * (deg**2).sum(axis=1) + deg.sum(axis=1)) / 8.0

    def grad(batch, ks):
        ks = np.asarray(ks, np.int64)
        a_, b_ = idx.u[ks], idx.v[ks]
        rows = np.arange(ks.size)

        def part(bt):
            a = idx.adjacency(bt, np.float32)
            na = a[:, a_, :].copy()
            nb = a[:, b_, :].copy()
            na[:, rows, b_] = 0.0
            nb[:, rows, a_] = 0.0
            return s * np.einsum("bkn,bkn->bk", nb @ a, na, dtype=np.float64)

        return _rows(part, batch)

    def grad2(batch, ks, ls):
        ks, ls = np.asarray(ks, np.int64), np.asarray(ls, np.int64)
        common, x, y = idx.shared_vertex(ks, ls)
        adj = common >= 0
        out = np.zeros((batch.shape[0], ks.size))
        if adj.any():
            cols = np.flatnonzero(adj)

            def part(bt):
                a = idx.adjacency(bt)
                walks = (a[:, x[cols], :] & a[:, y[cols], :]).sum(axis=2)
                forced = a[:, x[cols], common[cols]] & a[:, y[cols], common[cols]]
                return walks - forced

            out[:, cols] = _rows(part, batch)
        dis = (common < 0) & (ks != ls)
        if dis.any():
            cols = np.flatnonzero(dis)
            a1, b1, a2, b2 = idx.u[ks[cols]], idx.v[ks[cols]], idx.u[ls[cols]], idx.v[ls[cols]]
            m = idx.matrix
            out[:, cols] = (batch[:, m[b1, a2]] & batch[:, m[b2, a1]]).astype(float) + (
                batch[:, m[b1, b2]] & batch[:, m[a2, a1]]
            )
        return model.pq * out

    return count, grad, grad2


def subgraph_statistic(
    model: ErdosRenyiModel, pattern: SubgraphPattern, method: str = "auto"
) -> Functional:
    """Number of copies of ``pattern`` in ``G(n, p)`` (subgraphs isomorphic to it).

    ``method="generic"`` forces the copy-list evaluator, which enumerates all
    injective embeddings and is meant for small ``n`` and cross-checks.
    """
    n = model.n
    if pattern.v > n:
        raise ValueError(f"pattern with {pattern.v} vertices does not fit into n={n}")
    kind = pattern.kind if method == "auto" else "generic"
    s = sqrt(model.pq)
    if kind == "edge":
        count = lambda b: b.sum(axis=1).astype(float)
        grad = lambda b, ks: np.full((b.shape[0], len(ks)), s)
        grad2 = lambda b, ks, ls: np.zeros((b.shape[0], len(ks)))
    elif kind == "triangle":
        tri = triangle_statistic(model)
        count, grad, grad2 = tri.fn, tri.gradient_oracle, tri.second_gradient_oracle
    elif kind == "star":
        count, grad, grad2 = _star_subgraph(model, pattern.e)
    elif kind == "cycle4":
        count, grad, grad2 = _cycle4_subgraph(model)
    else:
        count, grad, grad2 = _generic_subgraph(model, pattern)
    idx = model.indexer
    adjacent, disjoint = pattern.has_adjacent_edges(), pattern.has_disjoint_edges()

    @lru_cache(maxsize=None)
    def interaction(k: int) -> tuple[int, ...]:
        out = idx.neighbours(k) if adjacent else []
        if disjoint:
            out = out + idx.disjoint(k)
        return tuple(sorted(out))

    return Functional(
        model.m,
        lambda b: _rows(count, b),
        grad,
        grad2,
        interaction,
        _symmetry(model),
        lambda: subgraph_moments(pattern, n, model.p),
        f"subgraph{pattern.edges}",
        {"statistic": "subgraph", "n": n, "p": model.p, "pattern": pattern.edges},
    )


# -- degree counts ---------------------------------------------------------------------


def degree_moments(n: int, p: float, d: int) -> tuple[float, float]:
    pi = binom.pmf(d, n - 1, p)
    mean = n * pi
    joint = p * binom.pmf(d - 1, n - 2, p) ** 2 + (1 - p) * binom.pmf(d, n - 2, p) ** 2
    return float(mean), float(n * pi * (1 - pi) + n * (n - 1) * (joint - pi**2))


def degree_statistic(model: ErdosRenyiModel, d: int) -> Functional:
    """Number of vertices of degree exactly ``d``."""
    n = model.n
    if not 0 <= d <= n - 1:
        raise ValueError(f"degree {d} out of range 0..{n - 1}")
    idx = model.indexer
    s = sqrt(model.pq)

    def count(batch):
        return (idx.degrees(batch) == d).sum(axis=1).astype(float)

    def grad(batch, ks):
        ks = np.asarray(ks, np.int64)
        deg = idx.degrees(batch)
        own = batch[:, ks].astype(np.int64)
        out = np.zeros((batch.shape[0], ks.size))
        for ends in (idx.u[ks], idx.v[ks]):
            rest = deg[:, ends] - own
            out += (rest + 1 == d).astype(float) - (rest == d)
        return s * out

    def grad2(batch, ks, ls):
        ks, ls = np.asarray(ks, np.int64), np.asarray(ls, np.int64)
        common, _, _ = idx.shared_vertex(ks, ls)
        ok = common >= 0
        deg = idx.degrees(batch)
        rest = deg[:, np.maximum(common, 0)] - batch[:, ks] - batch[:, ls]
        mixed = (rest == d - 2).astype(float) - 2.0 * (rest == d - 1) + (rest == d)
        return model.pq * mixed * ok

    return Functional(
        model.m,
        count,
        grad,
        grad2,
        idx.neighbours,
        _symmetry(model),
        lambda: degree_moments(n, model.p, d),
        f"degree{d}",
        {"statistic": "degrees", "n": n, "p": model.p, "d": d},
    )


def edge_neighbourhood(model: ErdosRenyiModel, k: int) -> list[int]:
    return model.indexer.neighbours(k)


def scaled_gradient_law(values: Sequence[float], probs: Sequence[float]) -> dict[float, float]:
    """Collapse a value table with probabilities into a law ``{value: mass}``."""
    law: dict[float, float] = {}
    for v, w in zip(np.round(np.asarray(values, float), 9), probs):
        law[float(v)] = law.get(float(v), 0.0) + float(w)
    return law
