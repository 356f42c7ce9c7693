import numpy as np
import pytest

from rademacher_stein import set_threads
from rademacher_stein.core import Functional, RademacherSpace, moments_exact, normalized_coordinate, standardize
from rademacher_stein.montecarlo import (
    SampleSpec,
    batched_sums,
    estimate_functional_stats,
    jackknife,
    sample_configuration,
    sample_range,
)
from rademacher_stein.stats import ErdosRenyiModel, triangle_statistic


def test_sample_spec_validation():
    with pytest.raises(ValueError):
        SampleSpec(0)
    with pytest.raises(ValueError):
        SampleSpec(10, batches=11)
    b = SampleSpec(1000, batches=7).batch_bounds()
    assert b[0] == 0 and b[-1] == 1000 and len(b) == 8


def test_near_certain_bits():
    space = RademacherSpace.uniform(8, 1 - 1e-4)
    batch = sample_range(space, 0, 10_000, 1)
    frac = batch.mean()
    assert frac > 1 - 1e-4 - 3 * np.sqrt(1e-4 / batch.size) - 1e-6


def test_configuration_determinism():
    space = RademacherSpace.uniform(13, 0.3)
    a = sample_configuration(space, 12345, 9)
    assert a == sample_configuration(space, 12345, 9)
    row = sample_range(space, 12340, 10, 9)[5]
    assert np.array_equal(row, a.as_array())
    assert sample_configuration(space, 12345, 10) != a or sample_configuration(space, 12346, 9) != a


def test_ranges_are_consistent():
    space = RademacherSpace.uniform(5, 0.4)
    whole = sample_range(space, 0, 1000, 3)
    assert np.array_equal(whole[300:777], sample_range(space, 300, 477, 3))


def test_binomial_mean():
    space = RademacherSpace.uniform(20, 0.3)
    counts = sample_range(space, 0, 100_000, 0).sum(axis=1)
    sd = np.sqrt(20 * 0.3 * 0.7 / 100_000)
    assert abs(counts.mean() - 6.0) < 3 * sd


def test_stats_of_coordinate_and_constant():
    space = RademacherSpace((0.3, 0.5))
    est = estimate_functional_stats(space, normalized_coordinate(space, 0), SampleSpec(50_000, 1), [2])
    assert abs(est["moments"][2.0] - 1.0) < 3 * est["stderrs"]["moments"][2.0]
    assert abs(est["mean"]) < 3 * est["stderrs"]["mean"]
    est = estimate_functional_stats(space, Functional.constant(2, 4.2), SampleSpec(1000), [1])
    assert est["variance"] == 0.0 and est["stderrs"]["variance"] == 0.0
    assert est["mean"] == pytest.approx(4.2, abs=1e-12)
    with pytest.raises(ValueError):
        estimate_functional_stats(space, Functional.constant(2, 1.0), SampleSpec(10), [0.5])


def test_exact_and_monte_carlo_agree():
    rng = np.random.default_rng(4)
    space = RademacherSpace(tuple(rng.uniform(0.1, 0.9, 10)))
    f = Functional.from_table(rng.exponential(size=1 << 10))
    mean, var = moments_exact(space, f)
    est = estimate_functional_stats(space, f, SampleSpec(40_000, 5))
    assert abs(est["mean"] - mean) < 4 * est["stderrs"]["mean"]
    assert abs(est["variance"] - var) < 4 * est["stderrs"]["variance"]


def test_triangle_fourth_moment_near_gaussian():
    model = ErdosRenyiModel.with_p(60, 0.3)
    f = standardize(model.space, triangle_statistic(model))
    est = estimate_functional_stats(model.space, f, SampleSpec(20_000, 1), [4])
    assert abs(est["moments"][4.0] - 3.0) < 4 * est["stderrs"]["moments"][4.0]


def test_jackknife_of_mean():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(50, 20))
    est, err = jackknife(x.sum(axis=1, keepdims=True), np.full(50, 20), lambda m: m)
    assert est[0] == pytest.approx(x.mean())
    assert err[0] == pytest.approx(x.sum(axis=1).std(ddof=1) / 20 / np.sqrt(50), rel=1e-9)


@pytest.mark.parametrize("threads", [2, 8])
def test_thread_count_does_not_change_sums(threads):
    space = RademacherSpace.uniform(12, 0.35)
    spec = SampleSpec(9_999, 2, 37)
    fn = lambda b: np.stack([b.sum(axis=1), np.sin(b @ np.arange(12.0))], axis=1)
    set_threads(1)
    ref = batched_sums(spec, space, fn, 2)
    set_threads(threads)
    assert np.array_equal(ref, batched_sums(spec, space, fn, 2))
