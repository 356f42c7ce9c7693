"""Berry-Esseen bounds in Kolmogorov distance and their ingredients.

``second_order_bound`` evaluates the seven-term bound built from first and
second discrete gradients, either exactly (full enumeration) or by Monte Carlo
with analytic gradient oracles.  ``malliavin_stein_bound`` evaluates the
four-term bound that involves ``-D L^{-1} F`` and is therefore exact-only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import sqrt, pi
from typing import Any, Sequence

import numpy as np
from scipy.special import ndtr

from ._parallel import ordered_map
from .chaos import decompose_table, ou_transform, walsh_inverse
from .core import (
    Functional,
    RademacherSpace,
    check_cap,
    gradient_table,
    value_table,
)
from .montecarlo import (
    STREAM_MAIN,
    STREAM_PILOT,
    SampleSpec,
    batched_sums,
    estimate_functional_stats,
    jackknife,
)
from .plan import IndexPlan, enumerated_plan

TERM_NAMES = ("A1", "A2", "A3", "A4", "A5", "A6", "A7")
SQRT_2PI_8 = sqrt(2 * pi) / 8
NORMALIZATION_TOL = 1e-6


@dataclass(frozen=True)
class HolderTriple:
    r: float
    s: float
    t: float

    def __post_init__(self) -> None:
        for v in (self.r, self.s, self.t):
            if not 1.0 < v < np.inf:
                raise ValueError("Hoelder exponents must lie in (1, inf)")
        if abs(1 / self.r + 1 / self.s + 1 / self.t - 1) > 1e-12:
            raise ValueError("Hoelder exponents must satisfy 1/r + 1/s + 1/t = 1")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.r, self.s, self.t)


DEFAULT_TRIPLE = HolderTriple(2.0, 4.0, 4.0)


def holder_select(alpha: float) -> HolderTriple:
    """Exponents for an edge probability decaying like ``n^-alpha``.

    ``r`` is the smallest even integer at least ``max(2, 4(2 alpha - 1)/(1 - alpha))``
    and ``s = t = 2r/(r - 1)``.
    """
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    a = Fraction(str(alpha))
    lower = max(Fraction(2), 4 * (2 * a - 1) / (1 - a))
    r = 2 * -(-lower // 2)
    s = Fraction(2 * r, r - 1)
    assert Fraction(1, r) + 2 / s == 1
    return HolderTriple(float(r), float(s), float(s))


@dataclass
class BoundBreakdown:
    terms: tuple[float, ...]
    total: float
    triple: HolderTriple
    mode: str
    stderrs: tuple[float, ...] | None = None
    normalization: dict = field(default_factory=dict)
    samples: np.ndarray | None = field(default=None, repr=False)

    def __getitem__(self, name: str) -> float:
        return self.terms[TERM_NAMES.index(name)]

    def to_dict(self) -> dict[str, Any]:
        return {
            "terms": dict(zip(TERM_NAMES, map(float, self.terms))),
            "total": float(self.total),
            "triple": list(self.triple.as_tuple()),
            "mode": self.mode,
            "stderrs": None if self.stderrs is None else dict(zip(TERM_NAMES, map(float, self.stderrs))),
            "normalization": dict(self.normalization),
        }


@dataclass(frozen=True)
class SteinBound:
    """The four summands of the bound involving ``-D L^{-1} F``."""

    terms: tuple[float, float, float, float]
    sup_at: float

    @property
    def total(self) -> float:
        return float(sum(self.terms))

    def to_dict(self) -> dict[str, Any]:
        return {"terms": list(self.terms), "total": self.total, "sup_at": self.sup_at}


# -- exact evaluation ---------------------------------------------------------------


def _check_normalized(mean: float, second: float) -> None:
    if abs(mean) > NORMALIZATION_TOL or abs(second - 1.0) > NORMALIZATION_TOL:
        raise ValueError(
            f"functional must satisfy E[F]=0 and E[F^2]=1 (got {mean:.3g}, {second:.3g}); "
            "normalize it first"
        )


def _neighbours(f: Functional, m: int) -> list[np.ndarray]:
    if f.interaction_oracle is None:
        return [np.array([l for l in range(m) if l != k], dtype=np.int64) for k in range(m)]
    return [np.array(sorted(f.interaction_oracle(k)), dtype=np.int64) for k in range(m)]


def _assemble(
    pq: np.ndarray,
    f_abs_r: float,
    triple: HolderTriple,
    g3: np.ndarray,
    g4: np.ndarray,
    g2s: np.ndarray,
    gt: np.ndarray,
    pair_terms: tuple[float, float],
    triple_terms: tuple[float, float],
) -> np.ndarray:
    r, s, t = triple.as_tuple()
    rt = 1.0 / np.sqrt(pq)
    a3 = SQRT_2PI_8 * np.sum(rt * g3)
    a4 = 0.5 * f_abs_r ** (1 / r) * np.sum(rt * g2s ** (1 / s) * gt ** (1 / t))
    a5 = np.sqrt(np.sum(g4 / pq))
    a1 = np.sqrt(15 / 4 * triple_terms[0])
    a2 = np.sqrt(3 / 4 * triple_terms[1])
    a6 = np.sqrt(6 * pair_terms[0])
    a7 = np.sqrt(3 * pair_terms[1])
    return np.array([a1, a2, a3, a4, a5, a6, a7])


def _exact_second_order(space: RademacherSpace, f: Functional, triple: HolderTriple, cap) -> BoundBreakdown:
    values = value_table(space, f, cap)
    probs = space.probability_table()
    mean = float(probs @ values)
    _check_normalized(mean, float(probs @ values**2))
    m = space.m
    r, s, t = triple.as_tuple()
    nbrs = _neighbours(f, m)
    masks = np.arange(values.size, dtype=np.int64)
    bits = np.left_shift(1, np.arange(m, dtype=np.int64))

    def grad(k: int) -> np.ndarray:
        return space.sqrt_pq[k] * (values[masks | bits[k]] - values[masks & ~bits[k]])

    def grad2(l: int, ks: np.ndarray) -> np.ndarray:
        bl, bk = bits[l], bits[ks][:, None]
        up, down = masks | bl, masks & ~bl
        h = (
            values[(up | bk)] - values[(up & ~bk)] - values[(down | bk)] + values[(down & ~bk)]
        )
        return (space.sqrt_pq[l] * space.sqrt_pq[ks])[:, None] * h

    g = np.stack([grad(k) for k in range(m)])
    ag = np.abs(g)
    g3, g4 = ag**3 @ probs, ag**4 @ probs
    g2s, gt = ag ** (2 * s) @ probs, ag**t @ probs
    g2 = g * g
    mix = (g2 * probs) @ g2.T

    a1_sum = a2_sum = a6_sum = a7_sum = 0.0
    pq = space.p * space.q
    for l in range(m):
        ks = nbrs[l]
        if ks.size == 0:
            continue
        h2 = grad2(l, ks) ** 2
        w = (h2 * probs) @ h2.T
        a1_sum += float(np.sum(np.sqrt(mix[np.ix_(ks, ks)]) * np.sqrt(w)))
        a2_sum += float(np.sum(w)) / pq[l]
        h4 = np.diag(w)
        a6_sum += float(np.sum(np.sqrt(g4[ks]) * np.sqrt(h4) / pq[ks]))
        a7_sum += float(np.sum(h4 / (pq[ks] * pq[l])))
    f_abs_r = float(probs @ np.abs(values) ** r)
    terms = _assemble(pq, f_abs_r, triple, g3, g4, g2s, gt, (a6_sum, a7_sum), (a1_sum, a2_sum))
    return BoundBreakdown(
        tuple(float(x) for x in terms),
        float(terms.sum()),
        triple,
        "exact",
        normalization={"mean": 0.0, "variance": 1.0, "source": "input"},
        samples=None,
    )


# -- Monte Carlo evaluation -----------------------------------------------------------


def default_plan(f: Functional, reps: int = 16, seed: int = 0) -> IndexPlan:
    if f.symmetry is not None:
        return f.symmetry.plan(f.interaction_oracle, reps=reps, seed=seed)
    return enumerated_plan(f.index_count, f.interaction_oracle, None, reps, seed)


def normalization_of(space: RademacherSpace, f: Functional, spec: SampleSpec, pilot_factor: int = 10) -> dict:
    """Mean and variance used to standardize ``f``: exact if known, else a pilot run."""
    if f.exact_moments is not None:
        mu, var = f.exact_moments()
        return {"mean": float(mu), "variance": float(var), "source": "exact"}
    pilot = SampleSpec(spec.count * pilot_factor, spec.seed, spec.batches)
    est = estimate_functional_stats(space, f, pilot, stream=STREAM_PILOT)
    return {
        "mean": est["mean"],
        "variance": est["variance"],
        "source": "pilot",
        "pilot_count": pilot.count,
    }


def _mc_second_order(
    space: RademacherSpace,
    f: Functional,
    triple: HolderTriple,
    spec: SampleSpec,
    plan: IndexPlan | None,
    reps: int,
    pilot_factor: int,
    keep_samples: bool,
) -> BoundBreakdown:
    if not f.has_oracles:
        raise ValueError(
            "Monte Carlo mode requires gradient_oracle, second_gradient_oracle and interaction_oracle"
        )
    norm = normalization_of(space, f, spec, pilot_factor)
    if norm["variance"] <= 0:
        raise ValueError("functional has zero variance; cannot normalize")
    sigma = sqrt(norm["variance"])
    g_fn = f.affine(1.0 / sigma, -norm["mean"] / sigma)
    plan = plan or default_plan(f, reps, spec.seed)
    r, s, t = triple.as_tuple()

    gk = plan.gradient_indices()
    hp = plan.second_gradient_pairs()
    g_pos = {int(k): i for i, k in enumerate(gk)}
    h_pos = {(int(a), int(b)): i for i, (a, b) in enumerate(hp)}
    gp = lambda idx: np.array([g_pos[int(k)] for k in idx], dtype=np.int64)
    hpos = lambda ls, ks: np.array([h_pos[(int(a), int(b))] for a, b in zip(ls, ks)], np.int64)

    S, P, T = plan.singles, plan.pairs, plan.triples
    s_idx = gp(S.reps[:, 0])
    p_g, p_h = gp(P.reps[:, 0]), hpos(P.reps[:, 1], P.reps[:, 0])
    t_j, t_k = gp(T.reps[:, 1]), gp(T.reps[:, 2])
    t_hj, t_hk = hpos(T.reps[:, 0], T.reps[:, 1]), hpos(T.reps[:, 0], T.reps[:, 2])
    n1, n2, n3 = S.n_classes, P.n_classes, T.n_classes
    width = 1 + 4 * n1 + 2 * n2 + 2 * n3
    samples = np.empty(spec.count) if keep_samples else None
    hk, hl = (hp[:, 1], hp[:, 0]) if hp.size else (np.zeros(0, np.int64),) * 2

    def per_sample(batch: np.ndarray, lo: int = 0) -> np.ndarray:
        fv = g_fn.evaluate(batch)
        g = g_fn.gradient_oracle(batch, gk) if gk.size else np.zeros((batch.shape[0], 0))
        h = g_fn.second_gradient_oracle(batch, hk, hl) if hp.size else np.zeros((batch.shape[0], 0))
        ag = np.abs(g[:, s_idx])
        cols = [np.abs(fv)[:, None] ** r]
        cols += [S.class_mean(ag**3), S.class_mean(ag**4), S.class_mean(ag ** (2 * s)), S.class_mean(ag**t)]
        cols += [P.class_mean(g[:, p_g] ** 4), P.class_mean(h[:, p_h] ** 4)]
        gj2, gk2 = g[:, t_j] ** 2, g[:, t_k] ** 2
        cols += [T.class_mean(gj2 * gk2), T.class_mean(h[:, t_hj] ** 2 * h[:, t_hk] ** 2)]
        return np.concatenate(cols, axis=1), fv

    def sums_fn(batch: np.ndarray) -> np.ndarray:
        return per_sample(batch)[0]

    if keep_samples:
        # evaluate F alongside; writes go to disjoint slices so order is irrelevant
        from .montecarlo import block_units, sample_range

        bounds = spec.batch_bounds()
        batch_id = np.searchsorted(bounds, np.arange(spec.count), side="right") - 1

        def run(unit: tuple[int, int]) -> np.ndarray:
            lo, hi = unit
            vals, fv = per_sample(sample_range(space, lo, hi - lo, spec.seed, STREAM_MAIN))
            samples[lo:hi] = fv
            ids = batch_id[lo:hi]
            starts = np.flatnonzero(np.r_[True, ids[1:] != ids[:-1]])
            out = np.zeros((spec.batches, width))
            out[ids[starts]] = np.add.reduceat(vals, starts, axis=0)
            return out

        sums = np.zeros((spec.batches, width))
        for part in ordered_map(run, block_units(spec.count)):
            sums += part
    else:
        sums = batched_sums(spec, space, sums_fn, width)

    pq_s = space.p[S.reps[S.starts, 0]] * space.q[S.reps[S.starts, 0]] if n1 else np.zeros(0)
    pk = P.reps[P.starts] if n2 else np.zeros((0, 2), np.int64)
    pq_pk = space.p[pk[:, 0]] * space.q[pk[:, 0]]
    pq_pl = space.p[pk[:, 1]] * space.q[pk[:, 1]]
    tl = T.reps[T.starts, 0] if n3 else np.zeros(0, np.int64)
    pq_tl = space.p[tl] * space.q[tl]

    def terms_of(means: np.ndarray) -> np.ndarray:
        o = 1
        f_abs_r = means[0]
        g3, g4, g2s, gt = (means[o + i * n1:o + (i + 1) * n1] for i in range(4))
        o += 4 * n1
        pg4, ph4 = means[o:o + n2], means[o + n2:o + 2 * n2]
        o += 2 * n2
        tg, th = means[o:o + n3], means[o + n3:o + 2 * n3]
        c1, c2, c3 = S.counts, P.counts, T.counts
        rt = c1 / np.sqrt(pq_s)
        a3 = SQRT_2PI_8 * np.sum(rt * g3)
        a4 = 0.5 * f_abs_r ** (1 / r) * np.sum(rt * g2s ** (1 / s) * gt ** (1 / t))
        a5 = np.sqrt(np.sum(c1 * g4 / pq_s))
        a6 = np.sqrt(6 * np.sum(c2 * np.sqrt(pg4) * np.sqrt(ph4) / pq_pk))
        a7 = np.sqrt(3 * np.sum(c2 * ph4 / (pq_pk * pq_pl)))
        a1 = np.sqrt(15 / 4 * np.sum(c3 * np.sqrt(tg) * np.sqrt(th)))
        a2 = np.sqrt(3 / 4 * np.sum(c3 * th / pq_tl))
        return np.array([a1, a2, a3, a4, a5, a6, a7])

    est, err = jackknife(sums, np.diff(spec.batch_bounds()), terms_of)
    norm = dict(norm, samples=spec.count, seed=spec.seed, batches=spec.batches)
    norm["classes"] = [n1, n2, n3]
    return BoundBreakdown(
        tuple(float(x) for x in est),
        float(est.sum()),
        triple,
        "monte_carlo",
        tuple(float(x) for x in err),
        norm,
        samples,
    )


def second_order_bound(
    space: RademacherSpace,
    f: Functional,
    triple: HolderTriple = DEFAULT_TRIPLE,
    mode: str = "exact",
    spec: SampleSpec | None = None,
    *,
    plan: IndexPlan | None = None,
    reps: int = 16,
    pilot_factor: int = 10,
    keep_samples: bool = False,
    cap: int | None = None,
) -> BoundBreakdown:
    """Seven-term Kolmogorov bound from first and second discrete gradients.

    In exact mode ``f`` must already be centred with unit variance.  In Monte
    Carlo mode ``f`` is the raw statistic; it is standardized with its exact
    moments when available and with a pilot estimate otherwise.
    """
    if f.index_count != space.m:
        raise ValueError("functional and space disagree on the index count")
    if mode == "exact":
        return _exact_second_order(space, f, triple, cap)
    if mode in ("monte_carlo", "mc"):
        if spec is None:
            raise ValueError("Monte Carlo mode needs a SampleSpec")
        return _mc_second_order(space, f, triple, spec, plan, reps, pilot_factor, keep_samples)
    raise ValueError(f"unknown mode {mode!r}")


def malliavin_stein_bound(space: RademacherSpace, f: Functional, cap: int | None = None) -> SteinBound:
    """Four-term bound using ``-D L^{-1} F``, computed exactly through the chaos."""
    values = value_table(space, f, cap)
    probs = space.probability_table()
    _check_normalized(float(probs @ values), float(probs @ values**2))
    decomp = decompose_table(space, values)
    c = decomp.coefficients.copy()
    c[0] = 0.0
    centred = type(decomp)(space, c)
    lt = walsh_inverse(space, ou_transform(centred, "L_inverse").coefficients)
    rt = 1.0 / space.sqrt_pq
    inner = np.zeros_like(values)
    t2 = np.zeros_like(values)
    t3 = np.zeros_like(values)
    weights = []
    for k in range(space.m):
        df = gradient_table(space, values, k)
        dl = gradient_table(space, lt, k)
        inner -= df * dl
        t2 += rt[k] * df**2 * np.abs(dl)
        t3 += rt[k] * df**2 * np.abs(values * dl)
        weights.append(rt[k] * df * np.abs(dl))
    term1 = float(probs @ np.abs(1.0 - inner))
    term2 = SQRT_2PI_8 * float(probs @ t2)
    term3 = 0.5 * float(probs @ t3)
    best, best_x = 0.0, float(values.max())
    for x in np.unique(values):
        ind = (values > x).astype(float)
        acc = np.zeros_like(values)
        for k in range(space.m):
            acc += weights[k] * gradient_table(space, ind, k)
        val = float(probs @ acc)
        if val > best:
            best, best_x = val, float(x)
    return SteinBound((term1, term2, term3, best), best_x)


def poincare_upper(
    space: RademacherSpace, f: Functional, spec: SampleSpec | None = None, cap: int | None = None
) -> float:
    """``E[||DF||^2] = sum_k E[(D_k F)^2]``, an upper bound for ``Var[F]``."""
    try:
        check_cap(space.m, cap)
    except ValueError:
        if f.gradient_oracle is None or spec is None:
            raise
        ks = np.arange(space.m)
        sums = batched_sums(spec, space, lambda b: np.sum(f.gradient_oracle(b, ks) ** 2, axis=1), 1)
        return float(sums.sum() / spec.count)
    values = value_table(space, f, cap)
    probs = space.probability_table()
    return float(sum(probs @ gradient_table(space, values, k) ** 2 for k in range(space.m)))


# -- Kolmogorov distances -----------------------------------------------------------------


def normal_cdf(x):
    return ndtr(x)


def empirical_kolmogorov(samples: Sequence[float]) -> float:
    """Kolmogorov distance between the empirical law of ``samples`` and N(0, 1)."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("need at least one sample")
    phi = ndtr(x)
    i = np.arange(1, n + 1)
    return float(np.max(np.maximum(np.abs(i / n - phi), np.abs((i - 1) / n - phi))))


def empirical_kolmogorov_stderr(samples: Sequence[float]) -> float:
    """Binomial standard error of the empirical CDF at the maximizing point."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    phi = ndtr(x)
    i = np.arange(1, n + 1)
    gap = np.maximum(np.abs(i / n - phi), np.abs((i - 1) / n - phi))
    fn = i[np.argmax(gap)] / n
    return float(np.sqrt(fn * (1 - fn) / n))


def kolmogorov_distance(values: Sequence[float], weights: Sequence[float] | None = None) -> float:
    """Exact distance to N(0, 1) of a finitely supported law.

    The supremum is attained at a jump point, either at the jump or just below it.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("need at least one atom")
    w = np.full(values.size, 1.0 / values.size) if weights is None else np.asarray(weights, float)
    atoms, inv = np.unique(values, return_inverse=True)
    mass = np.bincount(inv, weights=w, minlength=atoms.size)
    cdf = np.cumsum(mass)
    cdf /= cdf[-1]
    below = np.r_[0.0, cdf[:-1]]
    phi = ndtr(atoms)
    return float(np.max(np.maximum(np.abs(cdf - phi), np.abs(below - phi))))


def exact_kolmogorov(space: RademacherSpace, f: Functional, cap: int | None = None) -> float:
    """``d_K(F, N)`` from the fully enumerated law of ``f``."""
    return kolmogorov_distance(value_table(space, f, cap), space.probability_table())
