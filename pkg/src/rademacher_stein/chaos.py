"""Chaos expansions on a finite Rademacher space.

A square-integrable functional on ``m`` coordinates has the finite expansion
``F = E[F] + sum_S c_S Y_S`` over non-empty index sets ``S``, where
``Y_S = prod_{k in S} Y_k`` and ``c_S = E[F Y_S]``.  The order-``n`` kernel is
``f_n(S) = c_S / n!`` (symmetric, vanishing on diagonals), so that
``J_n(f_n) = n! sum_{|S| = n} f_n(S) Y_S``.

Coefficients are stored densely, indexed by the bitmask of ``S``; this makes
the transform to and from value tables a sequence of ``m`` two-point
butterflies.  :class:`Kernel` is the sparse per-order view.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import factorial
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import (
    Configuration,
    Functional,
    RademacherSpace,
    batch_to_masks,
    check_cap,
    value_table,
)


def popcounts(m: int) -> np.ndarray:
    """Number of set bits of every mask ``0 .. 2^m - 1``."""
    pc = np.zeros(1, dtype=np.int64)
    for _ in range(m):
        pc = np.concatenate([pc, pc + 1])
    return pc


def walsh_forward(space: RademacherSpace, values: np.ndarray) -> np.ndarray:
    """Value table (mask order) to chaos coefficients ``c_S``."""
    c = np.array(values, dtype=float, copy=True)
    for k in range(space.m):
        p, q, s = space.p[k], space.q[k], space.sqrt_pq[k]
        view = c.reshape(-1, 2, 1 << k)
        lo, hi = view[:, 0, :].copy(), view[:, 1, :].copy()
        view[:, 0, :] = q * lo + p * hi
        view[:, 1, :] = s * (hi - lo)
    return c


def walsh_inverse(space: RademacherSpace, coefficients: np.ndarray) -> np.ndarray:
    """Chaos coefficients back to the value table."""
    v = np.array(coefficients, dtype=float, copy=True)
    for k in range(space.m):
        yp, ym = space.y_plus[k], space.y_minus[k]
        view = v.reshape(-1, 2, 1 << k)
        c0, c1 = view[:, 0, :].copy(), view[:, 1, :].copy()
        view[:, 0, :] = c0 + ym * c1
        view[:, 1, :] = c0 + yp * c1
    return v


def _mask(indices: Iterable[int]) -> int:
    out = 0
    for i in indices:
        out |= 1 << i
    return out


def _indices(mask: int) -> tuple[int, ...]:
    out, k = [], 0
    while mask:
        if mask & 1:
            out.append(k)
        mask >>= 1
        k += 1
    return tuple(out)


@dataclass(frozen=True)
class Kernel:
    """Symmetric order-``n`` kernel, stored on strictly increasing index tuples."""

    order: int
    entries: Mapping[tuple[int, ...], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ValueError("kernel order must be at least 1")
        clean = {}
        for key, val in self.entries.items():
            key = tuple(int(i) for i in key)
            if len(key) != self.order:
                raise ValueError(f"entry {key} does not have {self.order} indices")
            if any(a >= b for a, b in zip(key, key[1:])):
                raise ValueError(f"entry {key} is not strictly increasing")
            if key and key[0] < 0:
                raise ValueError("negative index in kernel")
            clean[key] = float(val)
        object.__setattr__(self, "entries", clean)

    def __call__(self, *indices: int) -> float:
        """Value at any tuple: symmetric extension, zero on diagonals."""
        if len(indices) != self.order or len(set(indices)) != self.order:
            return 0.0
        return self.entries.get(tuple(sorted(indices)), 0.0)

    @property
    def max_index(self) -> int:
        return max((key[-1] for key in self.entries), default=-1)

    def norm_squared(self) -> float:
        """``||f||^2`` over the full tensor product (all orderings)."""
        return factorial(self.order) * sum(v * v for v in self.entries.values())

    def inner(self, other: "Kernel") -> float:
        if other.order != self.order:
            return 0.0
        total = sum(v * other.entries.get(key, 0.0) for key, v in self.entries.items())
        return factorial(self.order) * total

    def fix(self, k: int) -> "Kernel | float":
        """``f(., k)``: the order ``n - 1`` kernel with one slot fixed at ``k``."""
        sub = {
            tuple(i for i in key if i != k): v for key, v in self.entries.items() if k in key
        }
        if self.order == 1:
            return sub.get((), 0.0)
        return Kernel(self.order - 1, sub)


@dataclass(frozen=True, eq=False)
class ChaosDecomposition:
    """Mean plus kernels of every order, backed by dense coefficients ``c_S``."""

    space: RademacherSpace
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (1 << self.space.m,):
            raise ValueError("coefficient array must have length 2^m")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @cached_property
    def orders(self) -> np.ndarray:
        return popcounts(self.space.m)

    @property
    def mean(self) -> float:
        return float(self.coefficients[0])

    def kernel(self, n: int) -> Kernel:
        if not 1 <= n <= self.space.m:
            raise ValueError(f"order {n} out of range 1..{self.space.m}")
        masks = np.nonzero((self.orders == n) & (self.coefficients != 0.0))[0]
        scale = 1.0 / factorial(n)
        return Kernel(n, {_indices(int(s)): self.coefficients[s] * scale for s in masks})

    @property
    def kernels(self) -> list[Kernel]:
        return [self.kernel(n) for n in range(1, self.space.m + 1)]

    def variance(self) -> float:
        return float(np.sum(self.coefficients[1:] ** 2))

    def values(self) -> np.ndarray:
        """The represented functional on every mask (reconstruction)."""
        return walsh_inverse(self.space, self.coefficients)

    def to_functional(self, name: str = "chaos") -> Functional:
        return Functional.from_table(self.values(), name=name)

    def coefficient(self, indices: Sequence[int]) -> float:
        return float(self.coefficients[_mask(indices)])

    @classmethod
    def from_kernels(
        cls, space: RademacherSpace, mean: float, kernels: Iterable[Kernel]
    ) -> "ChaosDecomposition":
        check_cap(space.m)
        c = np.zeros(1 << space.m)
        c[0] = mean
        for kern in kernels:
            if kern.max_index >= space.m:
                raise IndexError("kernel index exceeds the space size")
            scale = factorial(kern.order)
            for key, v in kern.entries.items():
                c[_mask(key)] += scale * v
        return cls(space, c)


def stroock_decompose(space: RademacherSpace, f: Functional, cap: int | None = None) -> ChaosDecomposition:
    """Chaos decomposition with ``n! f_n(S) = E[F Y_S]`` computed exactly."""
    return ChaosDecomposition(space, walsh_forward(space, value_table(space, f, cap)))


def decompose_table(space: RademacherSpace, values: np.ndarray) -> ChaosDecomposition:
    return ChaosDecomposition(space, walsh_forward(space, values))


def multiple_integral(space: RademacherSpace, kernel: Kernel) -> Functional:
    """``J_n(f) = n! sum_{i_1 < ... < i_n} f(i_1..i_n) Y_{i_1} ... Y_{i_n}``."""
    if kernel.max_index >= space.m:
        raise IndexError("kernel index exceeds the space size")
    keys = list(kernel.entries)
    weights = np.array([kernel.entries[key] for key in keys]) * factorial(kernel.order)
    idx = np.array(keys, dtype=np.int64).reshape(len(keys), kernel.order)

    def fn(batch: np.ndarray) -> np.ndarray:
        if not keys:
            return np.zeros(batch.shape[0])
        y = space.normalized(batch)
        return np.prod(y[:, idx], axis=2) @ weights

    return Functional(space.m, fn, name=f"J{kernel.order}")


def ou_transform(
    decomp: ChaosDecomposition, mode: str, t: float | None = None
) -> ChaosDecomposition:
    """Apply ``L``, ``L^{-1}`` or the semigroup ``P_t`` coefficientwise.

    ``mode`` is one of ``"L"``, ``"L_inverse"`` or ``"semigroup"`` (with ``t``).
    """
    n = decomp.orders.astype(float)
    c = decomp.coefficients
    if mode == "L":
        out = -n * c
    elif mode == "L_inverse":
        if abs(c[0]) > 1e-12:
            raise ValueError("L_inverse requires centred functional")
        out = np.zeros_like(c)
        out[1:] = -c[1:] / n[1:]
    elif mode == "semigroup":
        if t is None or t < 0:
            raise ValueError("semigroup mode needs a nonnegative time t")
        out = np.exp(-n * t) * c
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return ChaosDecomposition(decomp.space, out)


def gradient_via_chaos(decomp: ChaosDecomposition, k: int) -> ChaosDecomposition:
    """``D_k F = sum_n n J_{n-1}(f_n(., k))``; coefficients ``c'_T = c_{T + k}``."""
    k = decomp.space.check_index(k)
    out = np.zeros_like(decomp.coefficients)
    view = out.reshape(-1, 2, 1 << k)
    view[:, 0, :] = decomp.coefficients.reshape(-1, 2, 1 << k)[:, 1, :]
    return ChaosDecomposition(decomp.space, out)


def divergence_coefficients(space: RademacherSpace, parts: Sequence[np.ndarray]) -> np.ndarray:
    """Coefficients of ``delta(u)`` from the coefficient arrays of each ``u_k``.

    Symmetrizing ``g(i_1..i_n, k) = f_n^{(k)}(i_1..i_n)`` and zeroing diagonals
    leaves, at a set ``S`` of size ``n + 1``, ``(n+1)! g~(S) = sum_{k in S} c^{(k)}_{S - k}``.
    """
    out = np.zeros(1 << space.m)
    for k, ck in enumerate(parts):
        src = np.asarray(ck).reshape(-1, 2, 1 << k)
        dst = out.reshape(-1, 2, 1 << k)
        dst[:, 1, :] += src[:, 0, :]
    return out


def divergence(space: RademacherSpace, u: Sequence[Functional], cap: int | None = None) -> Functional:
    """Skorohod divergence ``delta(u)`` of a process ``u = (u_1, ..., u_m)``."""
    if len(u) != space.m:
        raise ValueError(f"expected {space.m} components, got {len(u)}")
    parts = [stroock_decompose(space, uk, cap).coefficients for uk in u]
    c = divergence_coefficients(space, parts)
    return Functional.from_table(walsh_inverse(space, c), name="delta")


def mehler_estimate(
    space: RademacherSpace,
    f: Functional,
    t: float,
    base_config: Configuration,
    samples: int,
    seed: int,
) -> tuple[float, float]:
    """Monte Carlo estimate of ``P_t F`` at ``base_config`` and its standard error.

    Each coordinate is independently replaced by a fresh draw from its own law
    with probability ``1 - exp(-t)`` (the event that an exponential clock has
    rung by time ``t``) and kept otherwise.
    """
    from .montecarlo import STREAM_MEHLER_CLOCK, STREAM_MEHLER_COPY, sample_range

    if samples < 1:
        raise ValueError("samples must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    base = base_config.as_array()
    if t == 0:
        return f(base_config), 0.0
    stay = float(np.exp(-t))
    keep = RademacherSpace.uniform(space.m, stay) if stay > 0.0 else None
    values = np.empty(samples)
    for start in range(0, samples, 1 << 14):
        count = min(1 << 14, samples - start)
        fresh = sample_range(space, start, count, seed, STREAM_MEHLER_COPY)
        if keep is None:
            batch = fresh
        else:
            kept = sample_range(keep, start, count, seed, STREAM_MEHLER_CLOCK)
            batch = np.where(kept, base[None, :], fresh)
        values[start:start + count] = f.evaluate(batch)
    est = float(values.mean())
    err = float(values.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
    return est, err


def mask_of(config: Configuration) -> int:
    return int(batch_to_masks(config.as_array()[None, :])[0])
