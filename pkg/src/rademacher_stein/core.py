"""Finite Rademacher spaces, configurations, functionals and discrete gradients.

A configuration of ``m`` independent Rademacher variables is stored as an
``m``-bit mask (bit ``k`` set means ``X_k = +1``).  Functionals are evaluated
on *batches*: boolean arrays of shape ``(N, m)`` whose rows are
configurations.  Indices are 0-based throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Sequence

import numpy as np

from ._parallel import ordered_map

ENUMERATION_CAP = 24
_CHUNK_BITS = 16

BatchFn = Callable[[np.ndarray], np.ndarray]
GradientOracle = Callable[[np.ndarray, np.ndarray], np.ndarray]
SecondGradientOracle = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class EnumerationCapError(ValueError):
    """Raised when exact enumeration is requested beyond the configured cap."""


def check_cap(m: int, cap: int | None = None) -> None:
    cap = ENUMERATION_CAP if cap is None else cap
    if m > cap:
        raise EnumerationCapError(
            f"exact enumeration over 2^{m} configurations exceeds the cap of 2^{cap}; "
            "use Monte Carlo mode instead"
        )


@dataclass(frozen=True)
class RademacherSpace:
    """Product measure of ``m`` independent signs with ``P(X_k = +1) = p_k``."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.probs)
        if len(probs) < 1:
            raise ValueError("a Rademacher space needs at least one index")
        for p in probs:
            if not 0.0 < p < 1.0:
                raise ValueError(f"success probabilities must lie in (0, 1), got {p}")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, m: int, p: float = 0.5) -> "RademacherSpace":
        return cls((p,) * m)

    @property
    def m(self) -> int:
        return len(self.probs)

    @cached_property
    def p(self) -> np.ndarray:
        return np.asarray(self.probs)

    @cached_property
    def q(self) -> np.ndarray:
        return 1.0 - self.p

    @cached_property
    def sqrt_pq(self) -> np.ndarray:
        return np.sqrt(self.p * self.q)

    @cached_property
    def y_plus(self) -> np.ndarray:
        """Value of ``Y_k`` when ``X_k = +1``, i.e. ``sqrt(q_k/p_k)``."""
        return np.sqrt(self.q / self.p)

    @cached_property
    def y_minus(self) -> np.ndarray:
        """Value of ``Y_k`` when ``X_k = -1``, i.e. ``-sqrt(p_k/q_k)``."""
        return -np.sqrt(self.p / self.q)

    def normalized(self, batch: np.ndarray) -> np.ndarray:
        """The matrix of ``Y_k`` values for every row of ``batch``."""
        return np.where(batch, self.y_plus, self.y_minus)

    def check_index(self, k: int) -> int:
        if not 0 <= k < self.m:
            raise IndexError(f"index {k} out of range for m={self.m}")
        return int(k)

    def probability_table(self) -> np.ndarray:
        """``P(omega)`` for every mask ``0 .. 2^m - 1``."""
        check_cap(self.m)
        table = np.ones(1)
        for pk, qk in zip(self.p, self.q):
            table = np.concatenate([table * qk, table * pk])
        return table


@dataclass(frozen=True)
class Configuration:
    """A single point of ``{-1, +1}^m``."""

    bits: int
    m: int

    def __post_init__(self) -> None:
        if self.m < 1 or not 0 <= self.bits < (1 << self.m):
            raise ValueError("bit mask does not fit the configuration length")

    @classmethod
    def from_signs(cls, signs: Sequence[int]) -> "Configuration":
        bits = 0
        for k, s in enumerate(signs):
            if s not in (-1, 1):
                raise ValueError("signs must be -1 or +1")
            if s == 1:
                bits |= 1 << k
        return cls(bits, len(signs))

    def x(self, k: int) -> int:
        if not 0 <= k < self.m:
            raise IndexError(f"index {k} out of range for m={self.m}")
        return 1 if (self.bits >> k) & 1 else -1

    def with_value(self, k: int, sign: int) -> "Configuration":
        bit = 1 << k
        return Configuration(self.bits | bit if sign == 1 else self.bits & ~bit, self.m)

    def as_array(self) -> np.ndarray:
        return masks_to_batch(np.array([self.bits]), self.m)[0]

    def signs(self) -> list[int]:
        return [self.x(k) for k in range(self.m)]


def masks_to_batch(masks: np.ndarray, m: int) -> np.ndarray:
    masks = np.asarray(masks, dtype=np.int64)
    return ((masks[:, None] >> np.arange(m, dtype=np.int64)) & 1).astype(bool)


def batch_to_masks(batch: np.ndarray) -> np.ndarray:
    weights = np.left_shift(1, np.arange(batch.shape[1], dtype=np.int64))
    return batch.astype(np.int64) @ weights


def _as_batch(config: Configuration | np.ndarray) -> np.ndarray:
    if isinstance(config, Configuration):
        return config.as_array()[None, :]
    arr = np.asarray(config, dtype=bool)
    return arr[None, :] if arr.ndim == 1 else arr


@dataclass(frozen=True, eq=False)
class Functional:
    """A real function of the configuration, evaluated row-wise on batches.

    Optional oracles give the discrete gradients analytically.  They take a
    batch and integer index arrays and return arrays of shape ``(N, K)``:
    ``gradient_oracle(batch, ks)[:, i] == D_{ks[i]} F`` and
    ``second_gradient_oracle(batch, ks, ls)[:, i] == D_{ls[i]} D_{ks[i]} F``.
    ``interaction_oracle(k)`` lists the ``l != k`` for which ``D_l D_k F`` is
    not identically zero.
    """

    index_count: int
    fn: BatchFn
    gradient_oracle: GradientOracle | None = None
    second_gradient_oracle: SecondGradientOracle | None = None
    interaction_oracle: Callable[[int], Sequence[int]] | None = None
    symmetry: Any = None
    exact_moments: Callable[[], tuple[float, float]] | None = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def evaluate(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=bool)
        if batch.ndim != 2 or batch.shape[1] != self.index_count:
            raise ValueError(
                f"expected a batch of shape (N, {self.index_count}), got {batch.shape}"
            )
        return np.asarray(self.fn(batch), dtype=float).reshape(batch.shape[0])

    def __call__(self, config: Configuration | np.ndarray) -> float:
        return float(self.evaluate(_as_batch(config))[0])

    @property
    def has_oracles(self) -> bool:
        return (
            self.gradient_oracle is not None
            and self.second_gradient_oracle is not None
            and self.interaction_oracle is not None
        )

    # -- construction -------------------------------------------------------

    @classmethod
    def constant(cls, m: int, c: float) -> "Functional":
        return cls(m, lambda b: np.full(b.shape[0], float(c)), name=f"const({c})")

    @classmethod
    def from_table(cls, table: np.ndarray, name: str = "table") -> "Functional":
        """Lookup functional from values listed in mask order."""
        table = np.asarray(table, dtype=float)
        m = int(round(np.log2(table.size)))
        if table.size != 1 << m:
            raise ValueError("table length must be a power of two")
        return cls(m, lambda b: table[batch_to_masks(b)], name=name)

    def map(self, g: Callable[[np.ndarray], np.ndarray], name: str = "") -> "Functional":
        """``g(F)`` pointwise; oracles are dropped."""
        fn = self.fn
        return Functional(self.index_count, lambda b: g(np.asarray(fn(b), float)), name=name)

    def affine(self, scale: float, shift: float = 0.0) -> "Functional":
        """``scale * F + shift`` keeping (rescaled) oracles and structure."""
        fn, go, so = self.fn, self.gradient_oracle, self.second_gradient_oracle
        mo = self.exact_moments
        return Functional(
            self.index_count,
            lambda b: scale * np.asarray(fn(b), float) + shift,
            None if go is None else (lambda b, ks: scale * go(b, ks)),
            None if so is None else (lambda b, ks, ls: scale * so(b, ks, ls)),
            self.interaction_oracle,
            self.symmetry,
            None if mo is None else (lambda: _affine_moments(mo(), scale, shift)),
            self.name,
            dict(self.meta),
        )

    def _combine(self, other: "Functional | float", op: Callable, sym: str) -> "Functional":
        f = self.fn
        if isinstance(other, Functional):
            if other.index_count != self.index_count:
                raise ValueError("functionals live on different spaces")
            g = other.fn
            return Functional(self.index_count, lambda b: op(np.asarray(f(b), float), g(b)),
                              name=f"({self.name}{sym}{other.name})")
        c = float(other)
        return Functional(self.index_count, lambda b: op(np.asarray(f(b), float), c),
                          name=f"({self.name}{sym}{c})")

    def __add__(self, other):
        return self._combine(other, np.add, "+")

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract, "-")

    def __mul__(self, other):
        return self._combine(other, np.multiply, "*")

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


def _affine_moments(moments: tuple[float, float], scale: float, shift: float) -> tuple[float, float]:
    mean, var = moments
    return scale * mean + shift, scale * scale * var


def normalized_coordinate(space: RademacherSpace, k: int) -> Functional:
    """The functional ``Y_k``."""
    k = space.check_index(k)
    yp, ym = space.y_plus[k], space.y_minus[k]
    return Functional(space.m, lambda b: np.where(b[:, k], yp, ym), name=f"Y{k}")


def normalized_value(space: RademacherSpace, config: Configuration, k: int) -> float:
    """``Y_k = (x_k - p_k + q_k) / (2 sqrt(p_k q_k))`` at ``config``."""
    k = space.check_index(k)
    if config.m != space.m:
        raise ValueError("configuration length differs from the space")
    p, q = space.probs[k], 1.0 - space.probs[k]
    return (config.x(k) - p + q) / (2.0 * np.sqrt(p * q))


# -- exact enumeration ---------------------------------------------------------


def value_table(space: RademacherSpace, f: Functional, cap: int | None = None) -> np.ndarray:
    """``f`` evaluated at every mask ``0 .. 2^m - 1`` (chunked, order fixed)."""
    check_cap(space.m, cap)
    if f.index_count != space.m:
        raise ValueError("functional and space disagree on the index count")
    total = 1 << space.m
    chunk = 1 << min(_CHUNK_BITS, space.m)
    starts = range(0, total, chunk)

    def run(start: int) -> np.ndarray:
        masks = np.arange(start, min(start + chunk, total), dtype=np.int64)
        return f.evaluate(masks_to_batch(masks, space.m))

    return np.concatenate(ordered_map(run, starts))


def expectation_exact(space: RademacherSpace, f: Functional, cap: int | None = None) -> float:
    """``E[f]`` by full enumeration of the product measure."""
    values = value_table(space, f, cap)
    probs = space.probability_table()
    return float(_chunked_dot(probs, values))


def _chunked_dot(a: np.ndarray, b: np.ndarray) -> float:
    # fixed summation order per chunk, chunks combined in index order
    chunk = 1 << _CHUNK_BITS
    return float(sum(np.dot(a[i:i + chunk], b[i:i + chunk]) for i in range(0, a.size, chunk)))


def gradient_table(space: RademacherSpace, table: np.ndarray, k: int) -> np.ndarray:
    """Pathwise ``D_k`` applied to a table of values in mask order."""
    view = table.reshape(-1, 2, 1 << k)
    diff = space.sqrt_pq[k] * (view[:, 1, :] - view[:, 0, :])
    return np.broadcast_to(diff[:, None, :], view.shape).reshape(table.shape)


# -- discrete gradients ----------------------------------------------------------


def gradient(space: RademacherSpace, f: Functional, k: int) -> Functional:
    """``D_k F = sqrt(p_k q_k) (F_k^+ - F_k^-)`` computed pathwise."""
    k = space.check_index(k)
    c = space.sqrt_pq[k]
    fn = f.fn

    def grad(batch: np.ndarray) -> np.ndarray:
        plus = batch.copy()
        plus[:, k] = True
        minus = batch.copy()
        minus[:, k] = False
        return c * (np.asarray(fn(plus), float) - np.asarray(fn(minus), float))

    return Functional(space.m, grad, name=f"D{k}{f.name}")


def second_gradient(space: RademacherSpace, f: Functional, k: int, l: int) -> Functional:
    """``D_l (D_k F)`` computed pathwise."""
    return gradient(space, gradient(space, f, k), l)


def oracle_gradient(f: Functional, batch: np.ndarray, k: int) -> np.ndarray:
    if f.gradient_oracle is None:
        raise ValueError(f"functional {f.name!r} has no gradient oracle")
    return f.gradient_oracle(batch, np.array([k]))[:, 0]


def moments_exact(space: RademacherSpace, f: Functional, cap: int | None = None) -> tuple[float, float]:
    """Mean and variance of ``f`` by enumeration."""
    values = value_table(space, f, cap)
    probs = space.probability_table()
    mean = _chunked_dot(probs, values)
    return mean, _chunked_dot(probs, (values - mean) ** 2)


def standardize(space: RademacherSpace, f: Functional, cap: int | None = None) -> Functional:
    """``(F - E[F]) / sd(F)``, using the functional's exact moments when it has them."""
    mean, var = f.exact_moments() if f.exact_moments is not None else moments_exact(space, f, cap)
    if var <= 0:
        raise ValueError("cannot standardize a functional with zero variance")
    sd = float(np.sqrt(var))
    return f.affine(1.0 / sd, -mean / sd)
