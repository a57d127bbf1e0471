"""Shared test utilities and closed-form oracles."""

import numpy as np
from scipy import special

from pbeid.grid import DensityField, InternalGrid, TemporalGrid


def make_field(x, t, fn, provenance="clean"):
    """Field with values ``fn(X, T)`` on the given node arrays."""
    X, T = np.meshgrid(x, t, indexing="ij")
    return DensityField(InternalGrid(np.asarray(x, float)), TemporalGrid(np.asarray(t, float)), fn(X, T), provenance)


def exp_moment(p, lo, hi):
    """``int_lo^hi y**p exp(-y) dy`` for integer ``p`` (negative allowed)."""
    if p >= 0:
        return special.gamma(p + 1) * (special.gammainc(p + 1, hi) - special.gammainc(p + 1, lo))
    m = -p
    # int_x^inf y^-m e^-y dy = x^(1-m) E_m(x)
    tail = lambda z: z ** (1 - m) * special.expn(m, z)  # noqa: E731
    return tail(lo) - tail(hi)


def exp_column_oracle(process, a, b, x, x1, xJ):
    """Operators applied to ``n = exp(-x)`` with integrals over the sampled range."""
    x = np.asarray(x, float)
    e = np.exp(-x)
    if process == "agg_birth":
        # 1/2 x^a int_{x1}^{x-x1} y^b e^{-(x-y)} e^{-y} dy
        upper = x - x1
        val = (upper ** (b + 1) - x1 ** (b + 1)) / (b + 1)
        return 0.5 * x**a * e * np.where(upper > x1, val, 0.0)
    if process == "agg_death":
        return x**a * e * exp_moment(b, x1, xJ)
    if process == "bkg_birth":
        return np.array([exp_moment(b, xi, xJ) for xi in x])
    if process == "bkg_death":
        return x**a * e
    if process == "growth":
        return (a * x ** (a - 1) - x**a) * e
    raise ValueError(process)
