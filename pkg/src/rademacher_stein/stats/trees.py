"""Bond percolation on finite rooted trees.

Vertices are numbered in breadth-first order with the root as vertex 0, and
edge ``k`` joins vertex ``k + 1`` to its parent.  Listing children left to
right layer by layer is the planar embedding of the tree, so edge labels run
through ``0 .. |T_n| - 1`` layer by layer.
"""

from __future__ import annotations

from collections import deque
from functools import cached_property
from math import sqrt
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..core import Functional, RademacherSpace


class UnionFind:
    """Disjoint sets with path compression and union by size."""

    def __init__(self, size: int):
        self.parent = list(range(size))
        self.size = [1] * size

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


class TreeModel:
    """A finite rooted tree in breadth-first (planar) labelling."""

    def __init__(self, parents: Sequence[int], name: str = "tree"):
        parents = [int(x) for x in parents]
        if not parents or parents[0] != -1:
            raise ValueError("vertex 0 must be the root (parent -1)")
        for v, par in enumerate(parents[1:], start=1):
            if not 0 <= par < v:
                raise ValueError("parents must precede children in breadth-first order")
        self.parents = np.array(parents, dtype=np.int64)
        self.name = name
        depth = np.zeros(len(parents), dtype=np.int64)
        for v in range(1, len(parents)):
            depth[v] = depth[parents[v]] + 1
        if np.any(np.diff(depth) < 0):
            raise ValueError("vertices must be listed layer by layer")
        self.depths = depth

    # construction -------------------------------------------------------------

    @classmethod
    def from_children(cls, children: dict[int, list[int]], root, name: str = "tree") -> "TreeModel":
        order, parents, seen = [root], [-1], {root: 0}
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for c in children.get(v, []):
                if c in seen:
                    raise ValueError(f"vertex {c} reached twice; input is not a tree")
                seen[c] = len(order)
                order.append(c)
                parents.append(seen[v])
                queue.append(c)
        return cls(parents, name)

    @classmethod
    def regular(cls, D: int, depth: int) -> "TreeModel":
        """Every vertex has ``D`` children, truncated at ``depth`` generations."""
        if D < 1 or depth < 1:
            raise ValueError("need D >= 1 and depth >= 1")
        parents, layer = [-1], [0]
        for _ in range(depth):
            nxt = []
            for v in layer:
                for _ in range(D):
                    parents.append(v)
                    nxt.append(len(parents) - 1)
            layer = nxt
        tree = cls(parents, f"{D}-regular depth {depth}")
        tree.regular_degree = D
        return tree

    @classmethod
    def path(cls, length: int) -> "TreeModel":
        return cls.regular(1, length)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]], name: str = "tree") -> "TreeModel":
        children: dict[int, list[int]] = {}
        for par, child in pairs:
            children.setdefault(int(par), []).append(int(child))
        return cls.from_children(children, 1, name)

    @classmethod
    def from_file(cls, path: str | Path) -> "TreeModel":
        """Read ``parent child`` integer pairs, one per line; the root is vertex 1."""
        pairs = []
        for line in Path(path).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                a, b = line.split()
                pairs.append((int(a), int(b)))
        return cls.from_pairs(pairs, Path(path).stem)

    # structure ------------------------------------------------------------------

    regular_degree: int | None = None

    @property
    def m(self) -> int:
        return len(self.parents) - 1

    @property
    def depth(self) -> int:
        return int(self.depths.max())

    def edge(self, k: int) -> tuple[int, int]:
        if not 0 <= k < self.m:
            raise IndexError(f"edge label {k} out of range")
        return int(self.parents[k + 1]), k + 1

    def edge_depth(self, k: int) -> int:
        """Layer of the upper endpoint of edge ``k``."""
        return int(self.depths[k + 1]) - 1

    @cached_property
    def incident(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.m + 1)]
        for k in range(self.m):
            a, b = self.edge(k)
            out[a].append(k)
            out[b].append(k)
        return out

    def root_path(self, k: int) -> list[tuple[int, int]]:
        path = []
        v = k + 1
        while v != 0:
            par = int(self.parents[v])
            path.append((par, v))
            v = par
        return path[::-1]

    def neighbours(self, k: int) -> list[int]:
        a, b = self.edge(k)
        return sorted({e for e in self.incident[a] + self.incident[b] if e != k})

    def layout(self) -> np.ndarray:
        """Planar coordinates: root at (1, 1), layer ``d`` on the line ``y = d + 1``."""
        pos = np.zeros((self.m + 1, 2))
        slot: dict[int, int] = {}
        for v in range(self.m + 1):
            d = int(self.depths[v])
            slot[d] = slot.get(d, 0) + 1
            pos[v] = (slot[d], d + 1)
        return pos

    @cached_property
    def vertex_degrees(self) -> np.ndarray:
        return np.array([len(x) for x in self.incident])

    @cached_property
    def _incidence(self) -> np.ndarray:
        inc = np.zeros((self.m, self.m + 1), dtype=np.float32)
        ks = np.arange(self.m)
        inc[ks, self.parents[1:]] = 1.0
        inc[ks, ks + 1] = 1.0
        return inc

    def touched(self, batch: np.ndarray) -> np.ndarray:
        """Number of present edges at each vertex."""
        return np.rint(batch.astype(np.float32) @ self._incidence).astype(np.int64)


def components_union_find(tree: TreeModel, config: np.ndarray) -> int:
    """Components with at least one edge, by explicit union-find."""
    uf = UnionFind(tree.m + 1)
    used = set()
    for k in np.flatnonzero(config):
        a, b = tree.edge(int(k))
        uf.union(a, b)
        used.update((a, b))
    return len({uf.find(v) for v in used})


def percolation_moments(tree: TreeModel, p: float) -> tuple[float, float]:
    """Exact mean and variance of the component count.

    In a forest the count equals (vertices with a present edge) minus
    (present edges); both sums have short-range correlations only.
    """
    q = 1 - p
    deg = tree.vertex_degrees.astype(float)
    miss = q**deg
    mean = float(np.sum(1 - miss[deg > 0]) - tree.m * p)
    var_t = float(np.sum(miss * (1 - miss)))
    cov_tx = 0.0
    for k in range(tree.m):
        a, b = tree.edge(k)
        var_t += 2 * (q ** (deg[a] + deg[b] - 1) - q ** (deg[a] + deg[b]))
        cov_tx += p * (miss[a] + miss[b])
    return mean, float(var_t + tree.m * p * q - 2 * cov_tx)


def percolation_statistic(tree: TreeModel, p: float = 0.5, method: str = "forest") -> Functional:
    """Number of connected components with at least one edge after percolation.

    ``method="forest"`` counts touched vertices minus present edges, which is
    the component count of any forest; ``method="union_find"`` merges
    endpoints explicitly and is kept as a reference.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    m = tree.m
    s = sqrt(p * (1 - p))
    up = tree.parents[1:]
    down = np.arange(1, m + 1)

    if method == "forest":

        def count(batch):
            hits = tree.touched(batch)
            return (hits > 0).sum(axis=1) - batch.sum(axis=1).astype(float)

    elif method == "union_find":

        def count(batch):
            return np.array([components_union_find(tree, row) for row in batch], dtype=float)

    else:
        raise ValueError(f"unknown method {method!r}")

    def grad(batch, ks):
        ks = np.asarray(ks, np.int64)
        hits = tree.touched(batch)
        own = batch[:, ks].astype(np.int64)
        a = (hits[:, up[ks]] - own) > 0
        b = (hits[:, down[ks]] - own) > 0
        return s * (1.0 - a - b)

    def grad2(batch, ks, ls):
        ks, ls = np.asarray(ks, np.int64), np.asarray(ls, np.int64)
        ek = np.stack([up[ks], down[ks]], 1)
        el = np.stack([up[ls], down[ls]], 1)
        common = np.full(ks.shape, -1)
        for i in range(2):
            for j in range(2):
                common = np.where((ek[:, i] == el[:, j]) & (ks != ls), ek[:, i], common)
        ok = common >= 0
        hits = tree.touched(batch)
        rest = hits[:, np.maximum(common, 0)] - batch[:, ks] - batch[:, ls]
        return -(p * (1 - p)) * ((rest == 0) & ok)

    symmetry = None
    if tree.regular_degree is not None:
        from .symmetry import TreeSymmetry

        symmetry = TreeSymmetry(tree)

    return Functional(
        m,
        count,
        grad,
        grad2,
        tree.neighbours,
        symmetry,
        lambda: percolation_moments(tree, p),
        "components",
        {"statistic": "trees", "tree": tree.name, "m": m, "p": p},
    )


def tree_space(tree: TreeModel, p: float) -> RademacherSpace:
    return RademacherSpace.uniform(tree.m, p)
