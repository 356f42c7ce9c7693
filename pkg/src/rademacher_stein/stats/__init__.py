"""Random-graph and percolation statistics with analytic gradient oracles."""

from __future__ import annotations

from .graphs import (
    EdgeIndexer,
    ErdosRenyiModel,
    SubgraphPattern,
    degree_moments,
    degree_statistic,
    subgraph_moments,
    subgraph_statistic,
    triangle_statistic,
    triangle_variance,
)
from .rates import theoretical_rate
from .trees import (
    TreeModel,
    UnionFind,
    components_union_find,
    percolation_moments,
    percolation_statistic,
)


def interaction_neighborhood(model, k: int) -> list[int]:
    """Edges sharing a vertex with edge ``k`` in a graph model or a tree."""
    if isinstance(model, TreeModel):
        return model.neighbours(k)
    if isinstance(model, ErdosRenyiModel):
        return model.indexer.neighbours(k)
    raise TypeError(f"unsupported model {type(model).__name__}")


__all__ = [
    "EdgeIndexer",
    "ErdosRenyiModel",
    "SubgraphPattern",
    "TreeModel",
    "UnionFind",
    "components_union_find",
    "degree_moments",
    "degree_statistic",
    "interaction_neighborhood",
    "percolation_moments",
    "percolation_statistic",
    "subgraph_moments",
    "subgraph_statistic",
    "theoretical_rate",
    "triangle_statistic",
    "triangle_variance",
]
