from math import comb

import numpy as np
import pytest
from scipy.stats import binom

from rademacher_stein.core import (
    RademacherSpace,
    gradient,
    masks_to_batch,
    moments_exact,
    second_gradient,
)
from rademacher_stein.stats import (
    EdgeIndexer,
    ErdosRenyiModel,
    SubgraphPattern,
    TreeModel,
    UnionFind,
    components_union_find,
    degree_statistic,
    interaction_neighborhood,
    percolation_statistic,
    subgraph_statistic,
    theoretical_rate,
    triangle_statistic,
    triangle_variance,
)
from rademacher_stein.stats.graphs import scaled_gradient_law


def all_configs(m):
    return masks_to_batch(np.arange(1 << m), m)


def full(m):
    return np.ones((1, m), bool)


def empty(m):
    return np.zeros((1, m), bool)


def check_oracles(space, f, batch):
    """Oracle gradients against pathwise differences on every row of ``batch``."""
    m = space.m
    ks = np.arange(m)
    g = f.gradient_oracle(batch, ks)
    for k in range(m):
        assert np.allclose(g[:, k], gradient(space, f, k).evaluate(batch), atol=1e-9)
        nb = set(f.interaction_oracle(k))
        for l in range(m):
            if l == k:
                continue
            path = second_gradient(space, f, k, l).evaluate(batch)
            if l in nb:
                got = f.second_gradient_oracle(batch, np.array([k]), np.array([l]))[:, 0]
                assert np.allclose(got, path, atol=1e-9), (k, l)
            else:
                assert np.allclose(path, 0.0, atol=1e-9), (k, l)


# -- indexing ------------------------------------------------------------------------


def test_edge_indexer_bijection():
    idx = EdgeIndexer(7)
    assert idx.m == 21
    seen = set()
    for k in range(idx.m):
        i, j = idx.pair(k)
        assert i < j and idx.label(i, j) == k and idx.label(j, i) == k
        seen.add((i, j))
    assert len(seen) == 21
    assert idx.pair(0) == (0, 1) and idx.pair(1) == (0, 2)


@pytest.mark.parametrize("n, expected", [(3, 2), (4, 4), (7, 10)])
def test_er_neighbourhood(n, expected):
    model = ErdosRenyiModel.with_p(n, 0.5)
    for k in range(model.m):
        assert len(interaction_neighborhood(model, k)) == expected


def test_path_tree_neighbourhood():
    tree = TreeModel.path(5)
    assert interaction_neighborhood(tree, 2) == [1, 3]
    assert interaction_neighborhood(tree, 0) == [1]


def test_model_validation():
    assert ErdosRenyiModel(16, 0.5, 1.0).p == pytest.approx(0.25)
    with pytest.raises(ValueError):
        ErdosRenyiModel(4, 0.0, 1.5)
    with pytest.raises(ValueError):
        ErdosRenyiModel(1, 0.0, 0.5)
    with pytest.raises(TypeError):
        interaction_neighborhood(object(), 0)


# -- triangles ---------------------------------------------------------------------------


def test_triangle_counts():
    assert triangle_statistic(ErdosRenyiModel.with_p(3, 0.5)).evaluate(full(3))[0] == 1
    assert triangle_statistic(ErdosRenyiModel.with_p(4, 0.5)).evaluate(full(6))[0] == 4


@pytest.mark.parametrize("n", [4, 5])
def test_triangle_oracles(n):
    model = ErdosRenyiModel.with_p(n, 0.35)
    check_oracles(model.space, triangle_statistic(model), all_configs(model.m))


def test_triangle_moments():
    model = ErdosRenyiModel.with_p(5, 0.3)
    f = triangle_statistic(model)
    assert moments_exact(model.space, f) == pytest.approx(f.exact_moments(), abs=1e-12)
    assert f.exact_moments()[1] == pytest.approx(triangle_variance(5, 0.3))


@pytest.mark.parametrize("n", [5, 6])
def test_triangle_gradient_law(n):
    p = 0.3
    model = ErdosRenyiModel.with_p(n, p)
    f = triangle_statistic(model)
    probs = model.space.probability_table()
    batch = all_configs(model.m)
    scaled = f.gradient_oracle(batch, np.array([0]))[:, 0] / np.sqrt(p * (1 - p))
    law = scaled_gradient_law(scaled, probs)
    target = {float(j): binom.pmf(j, n - 2, p * p) for j in range(n - 1)}
    assert sum(abs(law.get(v, 0.0) - target.get(v, 0.0)) for v in set(law) | set(target)) < 1e-12
    # second gradients on interacting pairs: Bernoulli(p) after scaling
    for l in f.interaction_oracle(0):
        h = f.second_gradient_oracle(batch, np.array([0]), np.array([l]))[:, 0] / (p * (1 - p))
        law = scaled_gradient_law(h, probs)
        assert set(law) <= {0.0, 1.0}
        assert law[1.0] == pytest.approx(p, abs=1e-12)


def test_triangle_second_gradients_independent():
    p = 0.3
    model = ErdosRenyiModel.with_p(5, p)
    f = triangle_statistic(model)
    batch, probs = all_configs(model.m), model.space.probability_table()
    nb = list(f.interaction_oracle(0))
    a = f.second_gradient_oracle(batch, np.array([nb[0]]), np.array([0]))[:, 0] > 0
    for j in nb[1:]:
        b = f.second_gradient_oracle(batch, np.array([j]), np.array([0]))[:, 0] > 0
        assert probs @ (a & b) == pytest.approx((probs @ a) * (probs @ b), abs=1e-12)


# -- subgraphs ----------------------------------------------------------------------------


def test_pattern_parsing_and_automorphisms():
    pat = SubgraphPattern.parse("0-1,1-2")
    assert pat.v == 3 and pat.e == 2 and pat.automorphisms == 2
    assert SubgraphPattern.named("triangle").automorphisms == 6
    assert SubgraphPattern.named("cycle4").automorphisms == 8
    assert SubgraphPattern.named("star3").automorphisms == 6
    assert SubgraphPattern.named("cycle4").has_disjoint_edges()
    assert not SubgraphPattern.named("path3").has_disjoint_edges()
    with pytest.raises(ValueError):
        SubgraphPattern.parse("0-0")
    with pytest.raises(ValueError):
        SubgraphPattern.parse("")


def test_subgraph_examples():
    model = ErdosRenyiModel.with_p(3, 0.5)
    assert subgraph_statistic(model, SubgraphPattern.named("path3")).evaluate(full(3))[0] == 3
    model = ErdosRenyiModel.with_p(5, 0.4)
    batch = all_configs(model.m)
    edges = subgraph_statistic(model, SubgraphPattern.named("edge"))
    assert np.array_equal(edges.evaluate(batch), batch.sum(axis=1))
    assert np.allclose(edges.gradient_oracle(batch, np.arange(model.m)), np.sqrt(0.24))
    for n in (4, 5):
        model = ErdosRenyiModel.with_p(n, 0.4)
        batch = all_configs(model.m)
        tri = subgraph_statistic(model, SubgraphPattern.named("triangle")).evaluate(batch)
        assert np.array_equal(tri, triangle_statistic(model).evaluate(batch))


@pytest.mark.parametrize("name", ["path3", "cycle4", "star3", "0-1,1-2,2-3"])
@pytest.mark.parametrize("method", ["auto", "generic"])
def test_subgraph_oracles_and_moments(name, method):
    pat = SubgraphPattern.named(name) if "-" not in name else SubgraphPattern.parse(name)
    model = ErdosRenyiModel.with_p(5, 0.35)
    f = subgraph_statistic(model, pat, method)
    rows = all_configs(model.m)[::7]
    check_oracles(model.space, f, rows)
    assert moments_exact(model.space, f) == pytest.approx(f.exact_moments(), rel=1e-10)


def test_specialised_and_generic_agree():
    model = ErdosRenyiModel.with_p(6, 0.3)
    rng = np.random.default_rng(0)
    batch = rng.random((200, model.m)) < 0.5
    for name in ("path3", "cycle4", "star3"):
        a = subgraph_statistic(model, SubgraphPattern.named(name))
        b = subgraph_statistic(model, SubgraphPattern.named(name), "generic")
        assert np.allclose(a.evaluate(batch), b.evaluate(batch))


# -- degrees ------------------------------------------------------------------------------


def test_degree_examples():
    n = 5
    model = ErdosRenyiModel.with_p(n, 0.2)
    assert degree_statistic(model, 0).evaluate(empty(model.m))[0] == n
    assert degree_statistic(model, n - 1).evaluate(full(model.m))[0] == n
    with pytest.raises(ValueError):
        degree_statistic(model, n)


@pytest.mark.parametrize("d", [0, 1, 2])
def test_degree_oracles(d):
    model = ErdosRenyiModel.with_p(5, 0.2)
    f = degree_statistic(model, d)
    check_oracles(model.space, f, all_configs(model.m))
    assert moments_exact(model.space, f) == pytest.approx(f.exact_moments(), abs=1e-12)


# -- trees --------------------------------------------------------------------------------


def test_union_find():
    uf = UnionFind(5)
    assert uf.union(0, 1) and uf.union(3, 4) and not uf.union(1, 0)
    assert uf.find(1) == uf.find(0) != uf.find(3)
    assert uf.union(1, 4) and uf.find(0) == uf.find(3)


def test_tree_structure():
    tree = TreeModel.regular(2, 3)
    assert tree.m == 14 and tree.depth == 3
    assert [tree.edge_depth(k) for k in range(tree.m)] == [0] * 2 + [1] * 4 + [2] * 8
    assert tree.edge(0) == (0, 1) and tree.edge(2) == (1, 3)
    pos = tree.layout()
    assert tuple(pos[0]) == (1, 2 - 1) and tuple(pos[2]) == (2, 2)
    with pytest.raises(ValueError):
        TreeModel([0, 0])
    with pytest.raises(ValueError):
        TreeModel.from_children({1: [2, 3], 2: [3]}, 1)


def test_tree_from_file(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text("# parent child\n1 2\n1 3\n2 4\n")
    tree = TreeModel.from_file(path)
    assert tree.m == 3 and tree.edge(2) == (1, 3)


def test_percolation_examples():
    tree = TreeModel.regular(2, 3)
    f = percolation_statistic(tree)
    assert f.evaluate(full(tree.m))[0] == 1
    assert f.evaluate(empty(tree.m))[0] == 0
    path = TreeModel.path(6)
    alt = np.array([[True, False, True, False, True, False]])
    assert percolation_statistic(path).evaluate(alt)[0] == 3


@pytest.mark.parametrize("tree", [TreeModel.regular(2, 2), TreeModel.regular(3, 2), TreeModel.from_pairs([(1, 2), (1, 3), (2, 4), (2, 5), (2, 6), (4, 7)])])
def test_percolation_oracles(tree):
    space = RademacherSpace.uniform(tree.m, 0.4)
    f = percolation_statistic(tree, 0.4)
    batch = all_configs(tree.m)
    check_oracles(space, f, batch)
    ref = percolation_statistic(tree, 0.4, "union_find")
    assert np.array_equal(f.evaluate(batch), ref.evaluate(batch))
    assert moments_exact(space, f) == pytest.approx(f.exact_moments(), abs=1e-12)
    assert components_union_find(tree, batch[-1]) == 1


# -- symmetry pooling ---------------------------------------------------------------------------


def test_vertex_symmetry_plan_counts():
    model = ErdosRenyiModel.with_p(9, 0.3)
    f = triangle_statistic(model)
    plan = f.symmetry.plan(f.interaction_oracle, reps=4)
    nb = 2 * (9 - 2)
    assert plan.singles.counts.sum() == pytest.approx(model.m)
    assert plan.pairs.counts.sum() == pytest.approx(model.m * nb)
    assert plan.triples.counts.sum() == pytest.approx(model.m * nb * nb)


def test_tree_symmetry_plan_counts():
    tree = TreeModel.regular(2, 4)
    f = percolation_statistic(tree)
    plan = f.symmetry.plan(f.interaction_oracle)
    sizes = [len(tree.neighbours(k)) for k in range(tree.m)]
    assert plan.singles.counts.sum() == tree.m
    assert plan.pairs.counts.sum() == sum(sizes)
    assert plan.triples.counts.sum() == sum(s * s for s in sizes)
    assert plan.singles.n_classes == tree.depth


# -- rates --------------------------------------------------------------------------------


@pytest.mark.parametrize(
    "kind, alpha, d, expected",
    [("triangles", 0.0, None, -1.0), ("degrees", 1.0, 0, -0.5), ("triangles", 0.5, None, -0.5),
     ("triangles", 0.6, None, -0.45), ("subgraphs", 0.0, None, -1.0), ("trees", 0.0, None, -0.5)],
)
def test_theoretical_rate(kind, alpha, d, expected):
    assert theoretical_rate(kind, alpha, d) == pytest.approx(expected)


def test_theoretical_rate_boundary_agrees():
    a = 0.5
    assert -1 + a == pytest.approx(-0.75 + a / 2)
    assert theoretical_rate("triangles", 2 / 3) == pytest.approx(-1.25 * (1 - 2 / 3))


@pytest.mark.parametrize("kind, alpha, d", [("degrees", 2.0, 0), ("degrees", 1.3, 2), ("triangles", 1.0, None), ("bogus", 0, None)])
def test_theoretical_rate_rejects(kind, alpha, d):
    with pytest.raises(ValueError):
        theoretical_rate(kind, alpha, d)


def test_copy_count():
    from rademacher_stein.stats.graphs import copy_count

    assert copy_count(SubgraphPattern.named("triangle"), 6) == comb(6, 3)
    assert copy_count(SubgraphPattern.named("cycle4"), 5) == comb(5, 4) * 3
