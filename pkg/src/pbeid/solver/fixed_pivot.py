"""Fixed Pivot discretisation of aggregation and breakage on a uniform pivot grid.

Pivots are the sampling nodes ``x_1 < ... < x_J``; ``N_i = n_i * w_i`` is the
number of particles represented by pivot ``i``, with ``w_i`` the integral of
its hat function: ``dx`` inside and ``(x_1 + dx) / 2`` for the first pivot,
whose hat rises linearly from zero size.  A newborn particle of size
``v`` between pivots ``x_i`` and ``x_{i+1}`` is split between them with the
linear weights that preserve both number and mass.  Aggregates larger than
``x_J`` are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp

from ..grid import InternalGrid
from ..kernels import KernelExpression


class SolverError(RuntimeError):
    """Raised when time integration fails or produces an unphysical field."""


def _hat_moments(lo, hi, power: int, rising: bool, order: int = 12):
    """``int_lo^hi w(v) v**power dv`` with ``w`` the linear hat on ``[lo, hi]``.

    ``rising`` selects ``w = (v - lo)/(hi - lo)``, otherwise ``(hi - v)/(hi - lo)``.
    """
    nodes, weights = leggauss(order)
    lo = np.asarray(lo, float)[:, None]
    hi = np.asarray(hi, float)[:, None]
    v = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
    w = (v - lo) / (hi - lo) if rising else (hi - v) / (hi - lo)
    return 0.5 * (hi[:, 0] - lo[:, 0]) * (weights * w * v**power).sum(axis=1)


def pivot_widths(x: np.ndarray) -> np.ndarray:
    """Integral of each pivot's hat function (first hat starts at zero size)."""
    x = np.asarray(x, float)
    dx = (x[-1] - x[0]) / (x.size - 1)
    w = np.full(x.size, dx)
    w[0] = 0.5 * (x[0] + dx)
    return w


def breakage_matrix(x: np.ndarray, stoichiometry: KernelExpression) -> np.ndarray:
    """Redistribution matrix ``n_{i,k}``: daughters at pivot ``i`` from parent ``k``.

    ``stoichiometry`` is ``beta(v, y)`` as a polynomial in the daughter size
    ``v`` (nonnegative powers) and parent size ``y``.  Daughters below the
    first pivot are assigned to it with weight ``v / x_1``, which keeps mass.
    """
    x = np.asarray(x, float)
    J = x.size
    if any(a < 0 for a, _ in stoichiometry.terms):
        raise ValueError("daughter-size powers must be nonnegative")
    lo, hi = x[:-1], x[1:]
    out = np.zeros((J, J))
    for (a, b), c in stoichiometry.terms.items():
        falling = _hat_moments(lo, hi, a, rising=False)  # interval l -> pivot l
        rising = _hat_moments(lo, hi, a, rising=True)  # interval l -> pivot l + 1
        floor = x[0] ** (a + 1) / (a + 2)  # int_0^x1 (v/x1) v^a dv
        # interval l (between pivots l and l+1) contributes to parent k when l < k
        below = np.triu(np.ones((J - 1, J)), 1)
        contrib = np.zeros((J, J))
        contrib[0] = floor
        contrib[:-1] += falling[:, None] * below
        contrib[1:] += rising[:, None] * below
        out += contrib * (c * x**b)[None, :]
    return out


@dataclass
class FixedPivotSystem:
    """Right-hand side of the discretised aggregation/breakage balance.

    Parameters
    ----------
    grid : InternalGrid
        Pivot locations.
    aggregation : KernelExpression, optional
        Symmetric aggregation frequency ``Q(x, y)``.
    breakage_rate : KernelExpression, optional
        Selection rate ``Gamma(x)``.
    stoichiometry : KernelExpression, optional
        Daughter distribution ``beta(v, y)``; required with ``breakage_rate``.
    """

    grid: InternalGrid
    aggregation: KernelExpression | None = None
    breakage_rate: KernelExpression | None = None
    stoichiometry: KernelExpression | None = None

    def __post_init__(self):
        x = self.grid.points
        self.x = x
        self.dx = self.grid.spacing
        self.widths = pivot_widths(x)
        if self.aggregation is not None and self.aggregation.is_zero:
            self.aggregation = None
        if self.breakage_rate is not None and self.breakage_rate.is_zero:
            self.breakage_rate = None
        if self.aggregation is not None and not self.aggregation.is_symmetric():
            raise ValueError("aggregation kernel must be symmetric in x and y")
        offset = x[0] / self.dx
        self._shift = int(np.floor(offset + 1e-9))
        frac = offset - self._shift
        self._frac = 0.0 if abs(frac) < 1e-9 else frac
        if self.breakage_rate is not None:
            if self.stoichiometry is None:
                raise ValueError("breakage needs a stoichiometric function")
            self._rate = self.breakage_rate(x)
            if np.any(self._rate < 0):
                raise ValueError("breakage rate must be nonnegative on the grid")
            self._bmat = breakage_matrix(x, self.stoichiometry)

    def aggregation_rhs(self, N: np.ndarray) -> np.ndarray:
        J = N.size
        x = self.x
        pair = np.zeros(2 * J - 1)
        death = np.zeros(J)
        for (a, b), c in self.aggregation.terms.items():
            pa = x**a * N
            pb = x**b * N
            pair += c * np.convolve(pa, pb)
            death += c * pa * pb.sum()
        pair *= 0.5
        # pair index S = j + k (0-based) sits at fractional pivot S + shift + frac
        birth = np.zeros(J + 1)
        lo = np.arange(pair.size) + self._shift
        keep = lo < J
        np.add.at(birth, lo[keep], (1.0 - self._frac) * pair[keep])
        if self._frac:
            up = lo + 1
            keep = up < J
            np.add.at(birth, up[keep], self._frac * pair[keep])
        return birth[:J] - death

    def breakage_rhs(self, N: np.ndarray) -> np.ndarray:
        flux = self._rate * N
        return self._bmat @ flux - flux

    def __call__(self, t, N):
        out = np.zeros_like(N)
        if self.aggregation is not None:
            out += self.aggregation_rhs(N)
        if self.breakage_rate is not None:
            out += self.breakage_rhs(N)
        return out


def sectional_moments(N: np.ndarray, x: np.ndarray) -> tuple:
    """Number and mass carried by pivot populations (last axis is time)."""
    return N.sum(axis=0), (x[:, None] * N).sum(axis=0) if N.ndim == 2 else (x * N).sum()


def integrate(system: FixedPivotSystem, n0: np.ndarray, times, t0: float = 0.0, rtol=1e-8, atol=1e-10,
              method="RK45", negative_tol=1e-8) -> np.ndarray:
    """Integrate from density ``n0`` at ``t0`` and return densities at ``times``.

    Returns an array of shape ``(J, len(times))``.
    """
    times = np.asarray(times, float)
    if np.any(times < t0 - 1e-12):
        raise ValueError("output times must not precede the initial time")
    w = system.widths
    N0 = np.asarray(n0, float) * w
    if times.size and times.max() <= t0:
        return np.repeat(N0[:, None], times.size, axis=1) / w[:, None]
    if not np.any(N0):
        return np.zeros((N0.size, times.size))
    sol = solve_ivp(system, (t0, float(times.max())), N0, method=method, t_eval=times, rtol=rtol, atol=atol)
    if sol.status != 0:
        raise SolverError(f"time integration failed: {sol.message}")
    N = sol.y
    scale = np.abs(N).max()
    if N.min() < -negative_tol * max(scale, 1.0):
        raise SolverError(f"negative number density {N.min():.3g} beyond tolerance")
    return np.clip(N, 0.0, None) / w[:, None]
