import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rademacher_stein.core import (
    Configuration,
    EnumerationCapError,
    Functional,
    RademacherSpace,
    batch_to_masks,
    expectation_exact,
    gradient,
    masks_to_batch,
    moments_exact,
    normalized_coordinate,
    normalized_value,
    second_gradient,
    standardize,
    value_table,
)


def all_configs(m):
    return masks_to_batch(np.arange(1 << m), m)


def product(space, *ks):
    ys = [normalized_coordinate(space, k) for k in ks]
    out = ys[0]
    for y in ys[1:]:
        out = out * y
    return out


@pytest.mark.parametrize(
    "p, sign, expected",
    [(0.5, 1, 1.0), (0.5, -1, -1.0), (0.2, 1, 2.0)],
)
def test_normalized_value(p, sign, expected):
    space = RademacherSpace((p,))
    assert normalized_value(space, Configuration.from_signs([sign]), 0) == pytest.approx(expected, abs=1e-15)


@given(st.floats(0.01, 0.99))
def test_normalized_coordinate_is_standard(p):
    space = RademacherSpace((p,))
    y = normalized_coordinate(space, 0)
    mean, var = moments_exact(space, y)
    assert abs(mean) < 1e-12
    assert var == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("probs", [(0.0,), (1.0,), (0.5, 1.2), ()])
def test_space_rejects_bad_probabilities(probs):
    with pytest.raises(ValueError):
        RademacherSpace(probs)


def test_configuration_roundtrip():
    c = Configuration.from_signs([1, -1, 1])
    assert c.bits == 0b101
    assert c.signs() == [1, -1, 1]
    assert c.with_value(1, 1).bits == 0b111
    assert c.with_value(0, -1).bits == 0b100
    with pytest.raises(IndexError):
        c.x(3)
    with pytest.raises(ValueError):
        Configuration(8, 3)


def test_mask_batch_roundtrip():
    masks = np.arange(64)
    assert np.array_equal(batch_to_masks(masks_to_batch(masks, 6)), masks)


def test_expectations():
    space = RademacherSpace((0.3, 0.8))
    assert expectation_exact(space, Functional.constant(2, 4.5)) == pytest.approx(4.5, abs=1e-15)
    assert abs(expectation_exact(space, normalized_coordinate(space, 0))) < 1e-15
    assert abs(expectation_exact(space, product(space, 0, 1))) < 1e-15


def test_expectation_is_linear():
    rng = np.random.default_rng(1)
    space = RademacherSpace(tuple(rng.uniform(0.1, 0.9, 6)))
    a = Functional.from_table(rng.normal(size=64))
    b = Functional.from_table(rng.normal(size=64))
    lhs = expectation_exact(space, a * 2.5 + b * -1.5)
    rhs = 2.5 * expectation_exact(space, a) - 1.5 * expectation_exact(space, b)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_gradient_examples():
    space = RademacherSpace((0.3, 0.6, 0.45))
    batch = all_configs(3)
    assert np.allclose(gradient(space, normalized_coordinate(space, 1), 1).evaluate(batch), 1.0)
    assert np.allclose(gradient(space, Functional.constant(3, 7.0), 2).evaluate(batch), 0.0)
    g = gradient(space, product(space, 0, 1), 0).evaluate(batch)
    assert np.allclose(g, normalized_coordinate(space, 1).evaluate(batch))


def test_second_gradient_examples():
    space = RademacherSpace((0.3, 0.6, 0.45))
    batch = all_configs(3)
    f = product(space, 0, 1)
    assert np.allclose(second_gradient(space, f, 0, 1).evaluate(batch), 1.0)
    assert np.allclose(second_gradient(space, f, 1, 1).evaluate(batch), 0.0)
    assert np.allclose(second_gradient(space, normalized_coordinate(space, 0), 0, 1).evaluate(batch), 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gradient_properties(seed):
    rng = np.random.default_rng(seed)
    m = 5
    space = RademacherSpace(tuple(rng.uniform(0.1, 0.9, m)))
    f = Functional.from_table(rng.normal(size=1 << m))
    batch = all_configs(m)
    k, l = rng.choice(m, 2, replace=False)
    gk = gradient(space, f, k)
    plus, minus = batch.copy(), batch.copy()
    plus[:, k], minus[:, k] = True, False
    assert np.array_equal(gk.evaluate(plus), gk.evaluate(minus))
    a = second_gradient(space, f, k, l).evaluate(batch)
    b = second_gradient(space, f, l, k).evaluate(batch)
    assert np.allclose(a, b, atol=1e-12)


def test_enumeration_cap():
    space = RademacherSpace.uniform(25)
    with pytest.raises(EnumerationCapError):
        value_table(space, Functional.constant(25, 1.0))
    with pytest.raises(EnumerationCapError):
        value_table(RademacherSpace.uniform(5), Functional.constant(5, 1.0), cap=4)


def test_functional_shape_check():
    f = Functional.constant(3, 1.0)
    with pytest.raises(ValueError):
        f.evaluate(np.zeros((2, 4), bool))


def test_standardize():
    rng = np.random.default_rng(3)
    space = RademacherSpace(tuple(rng.uniform(0.2, 0.8, 5)))
    g = standardize(space, Functional.from_table(rng.exponential(size=32)))
    mean, var = moments_exact(space, g)
    assert abs(mean) < 1e-12 and var == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        standardize(space, Functional.constant(5, 2.0))


def test_affine_keeps_oracles_and_moments():
    space = RademacherSpace.uniform(3, 0.4)
    f = Functional(
        3,
        lambda b: b.sum(axis=1).astype(float),
        lambda b, ks: np.full((b.shape[0], len(ks)), np.sqrt(0.24)),
        lambda b, ks, ls: np.zeros((b.shape[0], len(ks))),
        lambda k: (),
        None,
        lambda: (1.2, 0.72),
    )
    g = f.affine(2.0, -1.0)
    assert g.has_oracles
    assert g.exact_moments() == pytest.approx((1.4, 2.88))
    assert moments_exact(space, g) == pytest.approx((1.4, 2.88))
    assert np.allclose(g.gradient_oracle(all_configs(3), np.array([0, 2])), 2 * np.sqrt(0.24))
