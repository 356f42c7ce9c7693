"""Acceptance gate: one line per criterion, printed at the end of the run.

Run directly (``python tests/test_acceptance.py``) or through pytest; in the
latter case the lines appear in the terminal summary.
"""

import json
import time
from math import sqrt, pi

import numpy as np
import pytest
from scipy.stats import binom

from rademacher_stein import set_threads
from rademacher_stein.bounds import (
    DEFAULT_TRIPLE,
    exact_kolmogorov,
    holder_select,
    malliavin_stein_bound,
    second_order_bound,
)
from rademacher_stein.core import RademacherSpace, masks_to_batch, normalized_coordinate, standardize
from rademacher_stein.harness.experiments import RateStudyConfig, StatisticSpec, run_bound, run_rate
from rademacher_stein.harness.verify import run_verify
from rademacher_stein.montecarlo import SampleSpec
from rademacher_stein.stats import (
    ErdosRenyiModel,
    SubgraphPattern,
    TreeModel,
    degree_statistic,
    percolation_statistic,
    subgraph_statistic,
    triangle_statistic,
)
from rademacher_stein.stats.graphs import scaled_gradient_law

RESULTS: dict[int, str] = {}
MC_THREADS = 8
RATE_SAMPLES = 20_000


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def rate(statistic, sizes, samples=RATE_SAMPLES, **params):
    set_threads(MC_THREADS)
    try:
        return run_rate(RateStudyConfig(statistic, sizes, [samples], **params))
    finally:
        set_threads(1)


def test_criterion_01_identity_suite():
    t = time.perf_counter()
    report = run_verify()
    secs = time.perf_counter() - t
    worst = max(r.residual for r in report.results)
    ok = report.passed and worst < 1e-9 and secs <= 60
    record(1, ok, f"{len(report.results)} identities, max residual {worst:.2e}, {secs:.1f}s")


def _instances():
    for n in (4, 5, 6):
        model = ErdosRenyiModel.with_p(n, 0.3)
        yield f"triangles n={n}", model.space, triangle_statistic(model)
        for name in ("path3", "cycle4", "star3"):
            yield f"{name} n={n}", model.space, subgraph_statistic(model, SubgraphPattern.named(name))
        for d in (0, 1, 2):
            yield f"degree{d} n={n}", model.space, degree_statistic(model, d)
    for label, tree in [("binary depth 3", TreeModel.regular(2, 3)), ("4-ary depth 2", TreeModel.regular(4, 2)),
                        ("path 20", TreeModel.path(20)), ("ternary depth 2", TreeModel.regular(3, 2))]:
        yield f"tree {label}", RademacherSpace.uniform(tree.m, 0.5), percolation_statistic(tree, 0.5)


def test_criterion_02_exact_validity():
    t = time.perf_counter()
    bad, tight = [], np.inf
    count = 0
    for label, space, raw in _instances():
        f = standardize(space, raw)
        dk = exact_kolmogorov(space, f)
        a = malliavin_stein_bound(space, f).total
        b = second_order_bound(space, f, DEFAULT_TRIPLE).total
        count += 1
        tight = min(tight, a - dk, b - dk)
        if a < dk - 1e-9 or b < dk - 1e-9:
            bad.append(label)
    secs = time.perf_counter() - t
    record(2, not bad and secs <= 300, f"{count} statistics, min margin {tight:.3f}, violations {bad}, {secs:.0f}s")


def test_criterion_03_single_coin():
    space = RademacherSpace((0.5,))
    b = second_order_bound(space, normalized_coordinate(space, 0), DEFAULT_TRIPLE)
    want = (0, 0, sqrt(2 * pi) / 4, 1, 2, 0, 0)
    ok = max(abs(x - y) for x, y in zip(b.terms, want)) < 1e-9 and abs(b.total - 3.626657) < 1e-6
    record(3, ok, "terms " + ", ".join(f"{x:.6f}" for x in b.terms) + f", total {b.total:.6f}")


def test_criterion_04_gradient_law():
    n, p = 6, 0.3
    model = ErdosRenyiModel.with_p(n, p)
    f = triangle_statistic(model)
    batch, probs = masks_to_batch(np.arange(1 << model.m), model.m), model.space.probability_table()
    pq = p * (1 - p)
    worst_tv, worst_bern = 0.0, 0.0
    target = {float(j): binom.pmf(j, n - 2, p * p) for j in range(n - 1)}
    for k in range(model.m):
        law = scaled_gradient_law(f.gradient_oracle(batch, np.array([k]))[:, 0] / sqrt(pq), probs)
        tv = 0.5 * sum(abs(law.get(v, 0.0) - target.get(v, 0.0)) for v in set(law) | set(target))
        worst_tv = max(worst_tv, tv)
        for l in f.interaction_oracle(k):
            h = f.second_gradient_oracle(batch, np.array([k]), np.array([l]))[:, 0] / pq
            law = scaled_gradient_law(h, probs)
            worst_bern = max(worst_bern, abs(law.get(1.0, 0.0) - p), 1.0 - law.get(0.0, 0.0) - law.get(1.0, 0.0))
    record(4, worst_tv < 1e-12 and worst_bern < 1e-12,
           f"max TV to Bin(4, 0.09) {worst_tv:.1e}, max Bernoulli(0.3) error {worst_bern:.1e}")


@pytest.mark.slow
def test_criterion_05_triangle_rate_constant_p():
    t = time.perf_counter()
    rep = rate("triangles", [16, 24, 32, 48, 64], samples=100_000, p=0.3)
    secs = time.perf_counter() - t
    ok = abs(rep.slope + 1.0) <= 0.2 and rep.dK_slope <= rep.slope + 0.3 and secs <= 900
    record(5, ok, f"bound slope {rep.slope:.3f} (target -1.0 +- 0.2, R2 {rep.r_squared:.4f}), "
                  f"dK slope {rep.dK_slope:.3f} (must be <= {rep.slope + 0.3:.3f}), {secs:.0f}s")


@pytest.mark.slow
def test_criterion_06_triangle_rate_alpha():
    alpha = 0.6
    rep = rate("triangles", [16, 24, 32, 48, 64], alpha=alpha, theta=1.0)
    trip = rep.records[0].triple
    want = -0.75 + alpha / 2
    ok = abs(rep.slope - want) <= 0.2 and trip == holder_select(alpha).as_tuple()
    record(6, ok, f"bound slope {rep.slope:.3f} (target {want:.2f} +- 0.2, R2 {rep.r_squared:.4f}), triple {trip}")


@pytest.mark.slow
def test_criterion_07_degree_rate():
    rep = rate("degrees", [32, 48, 64, 96], alpha=1.0, theta=1.0, d=0)
    ok = abs(rep.slope + 0.5) <= 0.15
    record(7, ok, f"bound slope {rep.slope:.3f} (target -0.5 +- 0.15, R2 {rep.r_squared:.4f})")


@pytest.mark.slow
def test_criterion_08_tree_ratios():
    rep = rate("trees", [6, 7, 8, 9, 10], D=2, p=0.5)
    target = 2 ** -0.5
    ok = all(abs(r - target) <= 0.1 for r in rep.ratios)
    record(8, ok, "ratios " + ", ".join(f"{r:.4f}" for r in rep.ratios) + f" (target {target:.4f} +- 0.1)")


@pytest.mark.slow
def test_criterion_09_subgraph_generality():
    slopes = {}
    for name in ("path3", "cycle4"):
        slopes[name] = rate("subgraph", [16, 24, 32, 48], pattern=name, p=0.3).slope
    ok = all(abs(s + 1.0) <= 0.25 for s in slopes.values())
    record(9, ok, ", ".join(f"{k} slope {v:.3f}" for k, v in slopes.items()) + " (target -1.0 +- 0.25)")


def _reports() -> list[str]:
    out = [json.dumps(run_verify(seed=3).rows())]
    for stat, n in [(StatisticSpec("triangles", p=0.3), 24), (StatisticSpec("trees"), 6),
                    (StatisticSpec("subgraph", p=0.3, pattern="cycle4"), 12)]:
        out.append(json.dumps(run_bound(stat, n, "mc", SampleSpec(5000, 17)).to_dict()))
    rep = run_rate(RateStudyConfig("degrees", [12, 16, 20], [3000], alpha=1.0, theta=1.0, seed=17))
    out.append(json.dumps(rep.to_dict()))
    return out


def test_criterion_10_determinism():
    runs = {}
    for threads in (1, 2, 8):
        set_threads(threads)
        try:
            runs[threads] = _reports()
        finally:
            set_threads(1)
    ok = runs[1] == runs[2] == runs[8]
    record(10, ok, f"{len(runs[1])} reports bitwise identical under 1, 2 and 8 threads: {ok}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
