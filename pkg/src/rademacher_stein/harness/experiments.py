"""Single bound evaluations and rate studies over increasing sizes."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.stats import linregress

from ..bounds import (
    DEFAULT_TRIPLE,
    TERM_NAMES,
    HolderTriple,
    empirical_kolmogorov,
    empirical_kolmogorov_stderr,
    exact_kolmogorov,
    holder_select,
    malliavin_stein_bound,
    second_order_bound,
)
from ..core import Functional, RademacherSpace, normalized_coordinate, standardize
from ..montecarlo import SampleSpec, sample_range
from ..stats import (
    ErdosRenyiModel,
    SubgraphPattern,
    TreeModel,
    degree_statistic,
    percolation_statistic,
    subgraph_statistic,
    theoretical_rate,
    triangle_statistic,
)

STATISTICS = ("triangles", "subgraph", "degrees", "trees", "coin", "linear")
CSV_COLUMNS = (
    ["statistic", "n", "p"] + [f"term_{t}" for t in TERM_NAMES]
    + ["total", "dK_emp", "dK_stderr", "mode", "seed"]
)


@dataclass
class StatisticSpec:
    """What to measure: a statistic kind and its model parameters."""

    statistic: str = "triangles"
    alpha: float = 0.0
    theta: float = 0.3
    p: float | None = None
    d: int = 0
    pattern: str = "path3"
    D: int = 2
    tree_file: str | None = None

    def __post_init__(self) -> None:
        if self.statistic not in STATISTICS:
            raise ValueError(f"unknown statistic {self.statistic!r}; choose from {STATISTICS}")

    def build(self, n: int) -> tuple[RademacherSpace, Functional, dict]:
        """Space, raw functional and descriptive metadata at size ``n``."""
        kind = self.statistic
        if kind in ("triangles", "subgraph", "degrees"):
            model = ErdosRenyiModel.with_p(n, self.p) if self.p is not None else ErdosRenyiModel(n, self.alpha, self.theta)
            if kind == "triangles":
                f = triangle_statistic(model)
            elif kind == "subgraph":
                pat = SubgraphPattern.named(self.pattern) if "-" not in self.pattern else SubgraphPattern.parse(self.pattern)
                f = subgraph_statistic(model, pat)
            else:
                f = degree_statistic(model, self.d)
            return model.space, f, {"n": n, "p": model.p, "m": model.m}
        if kind == "trees":
            p = 0.5 if self.p is None else self.p
            tree = TreeModel.from_file(self.tree_file) if self.tree_file else TreeModel.regular(self.D, n)
            f = percolation_statistic(tree, p)
            return RademacherSpace.uniform(tree.m, p), f, {"n": n, "p": p, "m": tree.m}
        p = 0.5 if self.p is None else self.p
        if kind == "coin":
            sp = RademacherSpace.uniform(1, p)
            return sp, normalized_coordinate(sp, 0), {"n": 1, "p": p, "m": 1}
        sp = RademacherSpace.uniform(n, p)
        scale = 1.0 / np.sqrt(n)
        yp, ym = sp.y_plus, sp.y_minus
        f = Functional(
            n,
            lambda b: np.where(b, yp, ym).sum(axis=1) * scale,
            lambda b, idx: np.full((b.shape[0], len(idx)), scale),
            lambda b, a, c: np.zeros((b.shape[0], len(a))),
            lambda k: (),
            None,
            lambda: (0.0, 1.0),
            "linear",
        )
        return sp, f, {"n": n, "p": p, "m": n}

    def rate_kind(self) -> str:
        return "subgraphs" if self.statistic == "subgraph" else self.statistic

    def triple_for(self, policy: str | Sequence[float]) -> HolderTriple:
        if isinstance(policy, str):
            if policy == "auto":
                return holder_select(self.alpha) if self.statistic == "triangles" and self.alpha < 1 else DEFAULT_TRIPLE
            policy = [float(x) for x in policy.split(",")]
        return HolderTriple(*policy)


@dataclass
class BoundRecord:
    statistic: str
    n: int
    p: float
    terms: tuple[float, ...]
    total: float
    dK_emp: float
    dK_stderr: float
    mode: str
    seed: int
    stderrs: tuple[float, ...] | None = None
    triple: tuple[float, float, float] = (2.0, 4.0, 4.0)
    normalization: dict = field(default_factory=dict)
    dK_exact: float | None = None
    stein_terms: tuple[float, ...] | None = None
    stein_total: float | None = None
    m: int = 0

    def csv_row(self) -> list:
        return [self.statistic, self.n, self.p, *self.terms, self.total, self.dK_emp, self.dK_stderr, self.mode, self.seed]

    def to_dict(self) -> dict[str, Any]:
        out = dict(zip(CSV_COLUMNS, self.csv_row()))
        out.update(
            stderrs=None if self.stderrs is None else dict(zip(TERM_NAMES, self.stderrs)),
            triple=list(self.triple),
            normalization=self.normalization,
            dK_exact=self.dK_exact,
            stein_terms=None if self.stein_terms is None else list(self.stein_terms),
            stein_total=self.stein_total,
            m=self.m,
        )
        return out


def run_bound(
    statistic: StatisticSpec | str,
    size: int,
    mode: str = "monte_carlo",
    spec: SampleSpec | None = None,
    triple: str | Sequence[float] | HolderTriple = "auto",
    reps: int = 16,
) -> BoundRecord:
    """Evaluate the seven-term bound for one statistic at one size.

    Monte Carlo mode reports the empirical Kolmogorov distance of the same
    standardized samples.  Exact mode adds the exact distance and the
    four-term bound; its empirical distance comes from ``spec`` samples.
    """
    stat = StatisticSpec(statistic) if isinstance(statistic, str) else statistic
    spec = spec or SampleSpec(10_000, 0)
    space, f, meta = stat.build(size)
    tri = triple if isinstance(triple, HolderTriple) else stat.triple_for(triple)
    if mode == "exact":
        g = standardize(space, f)
        bound = second_order_bound(space, g, tri, "exact")
        stein = malliavin_stein_bound(space, g)
        samples = np.concatenate(
            [g.evaluate(sample_range(space, lo, min(4096, spec.count - lo), spec.seed)) for lo in range(0, spec.count, 4096)]
        )
        extra = dict(dK_exact=exact_kolmogorov(space, g), stein_terms=stein.terms, stein_total=stein.total)
    elif mode in ("monte_carlo", "mc"):
        bound = second_order_bound(space, f, tri, "monte_carlo", spec, reps=reps, keep_samples=True)
        samples = bound.samples  # already standardized
        extra = {}
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return BoundRecord(
        stat.statistic,
        int(meta["n"]),
        float(meta["p"]),
        bound.terms,
        bound.total,
        empirical_kolmogorov(samples),
        empirical_kolmogorov_stderr(samples),
        bound.mode,
        spec.seed,
        bound.stderrs,
        tri.as_tuple(),
        bound.normalization,
        m=int(meta["m"]),
        **extra,
    )


# -- rate studies ---------------------------------------------------------------------------


@dataclass
class RateStudyConfig:
    statistic: str = "triangles"
    sizes: list[int] = field(default_factory=lambda: [16, 24, 32, 48, 64])
    samples: list[int] = field(default_factory=lambda: [100_000])
    alpha: float = 0.0
    theta: float = 0.3
    p: float | None = None
    d: int = 0
    pattern: str = "path3"
    D: int = 2
    tree_file: str | None = None
    triple: str = "auto"
    seed: int = 0
    reps: int = 16
    batches: int = 100
    output: str | None = None

    def __post_init__(self) -> None:
        if len(self.sizes) < 3:
            raise ValueError("a rate study needs at least 3 sizes")
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ValueError("sizes must be strictly increasing")
        if len(self.samples) not in (1, len(self.sizes)):
            raise ValueError("give one sample count or one per size")

    def statistic_spec(self) -> StatisticSpec:
        return StatisticSpec(self.statistic, self.alpha, self.theta, self.p, self.d, self.pattern, self.D, self.tree_file)

    def samples_for(self, i: int) -> int:
        return self.samples[0] if len(self.samples) == 1 else self.samples[i]


def _coerce(kind: type | str, text: str):
    kind = str(kind)
    if "list" in kind:
        return [int(float(x)) for x in text.replace(";", ",").split(",") if x.strip()]
    if text.lower() in ("none", ""):
        return None
    if "int" in kind and "float" not in kind:
        return int(float(text))
    if "float" in kind:
        return float(text)
    return text


def parse_config(text: str, base: dict | None = None) -> dict:
    """Parse ``key = value`` lines (``#`` starts a comment) into typed fields."""
    types = {f.name: f.type for f in fields(RateStudyConfig)}
    out = dict(base or {})
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in types:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        out[key] = _coerce(types[key], value)
    return out


def load_config(path: str | Path, **overrides) -> RateStudyConfig:
    values = parse_config(Path(path).read_text())
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RateStudyConfig(**values)


@dataclass
class RateReport:
    config: dict
    records: list[BoundRecord]
    x: list[float]
    slope: float
    intercept: float
    r_squared: float
    residuals: list[float]
    theoretical: float | None
    dK_slope: float
    ratios: list[float]
    monotone_violations: int

    def to_dict(self) -> dict[str, Any]:
        d = {k: v for k, v in asdict(self).items() if k != "records"}
        d["records"] = [r.to_dict() for r in self.records]
        return d


def fit_loglog(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float, np.ndarray]:
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    fit = linregress(lx, ly)
    resid = ly - (fit.intercept + fit.slope * lx)
    return float(fit.slope), float(fit.intercept), float(fit.rvalue**2), resid


def run_rate(config: RateStudyConfig) -> RateReport:
    """Bound totals over the configured sizes and their fitted log-log slope.

    For trees the abscissa is the number of edges; otherwise it is ``n``.
    """
    stat = config.statistic_spec()
    records = []
    for i, n in enumerate(config.sizes):
        spec = SampleSpec(config.samples_for(i), config.seed, config.batches)
        records.append(run_bound(stat, n, "monte_carlo", spec, config.triple, config.reps))
    x = [float(r.m if config.statistic == "trees" else r.n) for r in records]
    totals = [r.total for r in records]
    slope, intercept, r2, resid = fit_loglog(x, totals)
    dk_slope = fit_loglog(x, [max(r.dK_emp, 1e-300) for r in records])[0]
    try:
        kind = stat.rate_kind()
        theo = theoretical_rate(kind, config.alpha if kind != "trees" else 0.0, config.d)
    except ValueError:
        theo = None
    ratios = [b / a for a, b in zip(totals, totals[1:])]
    report = RateReport(
        asdict(config),
        records,
        x,
        slope,
        intercept,
        r2,
        resid.tolist(),
        theo,
        dk_slope,
        ratios,
        sum(1 for r in ratios if r >= 1.0),
    )
    if config.output:
        Path(config.output).write_text(json.dumps(report.to_dict(), indent=2))
    return report
