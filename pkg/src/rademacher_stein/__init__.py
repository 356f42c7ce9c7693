"""Discrete Malliavin calculus on finite Rademacher spaces and Kolmogorov bounds."""

from ._parallel import get_threads, set_threads
from .bounds import (
    BoundBreakdown,
    HolderTriple,
    SteinBound,
    empirical_kolmogorov,
    exact_kolmogorov,
    holder_select,
    kolmogorov_distance,
    malliavin_stein_bound,
    poincare_upper,
    second_order_bound,
)
from .chaos import (
    ChaosDecomposition,
    Kernel,
    divergence,
    gradient_via_chaos,
    mehler_estimate,
    multiple_integral,
    ou_transform,
    stroock_decompose,
)
from .core import (
    ENUMERATION_CAP,
    Configuration,
    EnumerationCapError,
    Functional,
    RademacherSpace,
    expectation_exact,
    gradient,
    normalized_coordinate,
    normalized_value,
    second_gradient,
    standardize,
)
from .montecarlo import SampleSpec, estimate_functional_stats, sample_configuration

__version__ = "0.1.0"

__all__ = [
    "BoundBreakdown",
    "ChaosDecomposition",
    "Configuration",
    "ENUMERATION_CAP",
    "EnumerationCapError",
    "Functional",
    "HolderTriple",
    "Kernel",
    "RademacherSpace",
    "SteinBound",
    "divergence",
    "empirical_kolmogorov",
    "exact_kolmogorov",
    "expectation_exact",
    "get_threads",
    "gradient",
    "gradient_via_chaos",
    "holder_select",
    "kolmogorov_distance",
    "malliavin_stein_bound",
    "mehler_estimate",
    "multiple_integral",
    "normalized_coordinate",
    "normalized_value",
    "ou_transform",
    "poincare_upper",
    "second_gradient",
    "second_order_bound",
    "set_threads",
    "SampleSpec",
    "estimate_functional_stats",
    "sample_configuration",
    "standardize",
    "stroock_decompose",
]
