"""Rate exponents of the Kolmogorov bounds for the built-in statistics."""

from __future__ import annotations


def theoretical_rate(kind: str, alpha: float = 0.0, d: int | None = None) -> float:
    """Exponent ``e`` such that the bound decays like ``n^e``.

    For ``kind="trees"`` the exponent refers to the number of edges ``|T_n|``.
    """
    if kind == "triangles":
        if not 0 <= alpha < 1:
            raise ValueError("triangle rates need alpha in [0, 1)")
        if alpha <= 0.5:
            return -1.0 + alpha
        if alpha <= 2 / 3:
            return -0.75 + alpha / 2
        return -1.25 * (1 - alpha)
    if kind == "subgraphs":
        if alpha != 0:
            raise ValueError("subgraph rates are stated for fixed p (alpha = 0)")
        return -1.0
    if kind == "degrees":
        if d is None or d < 0:
            raise ValueError("degree rates need d >= 0")
        if d == 0:
            if not 1 <= alpha < 2:
                raise ValueError("d = 0 needs alpha in [1, 2)")
            return -1.0 + alpha / 2
        upper = (3 * d - 1) / (3 * d - 2)
        if not 1 <= alpha < upper:
            raise ValueError(f"d = {d} needs alpha in [1, {upper:.4g})")
        return 0.5 - 1.5 * d - alpha + 1.5 * alpha * d
    if kind == "trees":
        return -0.5
    raise ValueError(f"unknown statistic kind {kind!r}")
