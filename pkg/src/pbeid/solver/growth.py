"""Pure growth ``dn/dt + d(R n)/dx = 0`` and growth combined with aggregation/breakage."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.interpolate import CubicSpline

from ..grid import InternalGrid
from ..kernels import KernelExpression
from .fixed_pivot import FixedPivotSystem, integrate


class FloorCrossingWarning(UserWarning):
    """Characteristics reaching the grid come from sizes below the first node."""


def characteristic_solution(rate: KernelExpression, n0, x, t):
    """Exact solution for ``R = c`` or ``R = g x``; ``None`` for other rates.

    ``n0`` is a callable initial density.  For constant ``c > 0`` the values
    for ``x < c t`` use ``n0`` outside its physical support.
    """
    terms = rate.terms
    X, T = np.meshgrid(np.asarray(x, float), np.asarray(t, float), indexing="ij")
    if not terms:
        return n0(X)
    if set(terms) == {(0, 0)}:
        c = terms[(0, 0)]
        foot = X - c * T
        if np.any(foot < 0):
            warnings.warn("constant growth traces sizes below zero back to the initial data", FloorCrossingWarning)
        return n0(foot)
    if set(terms) == {(1, 0)}:
        g = terms[(1, 0)]
        e = np.exp(-g * T)
        return e * n0(X * e)
    return None


def upwind(rate: KernelExpression, n0, grid: InternalGrid, times, cfl: float = 0.9, inflow=None):
    """Conservative first-order upwind scheme for ``R >= 0``.

    ``inflow(t)`` gives the density entering through the lower face (default
    zero).  Returns an array ``(J, len(times))`` with ``times[0]`` the
    initial time.
    """
    x = grid.points
    dx = grid.spacing
    faces = np.append(x - 0.5 * dx, x[-1] + 0.5 * dx)
    faces[0] = max(faces[0], 0.0)  # no sizes below zero
    R = rate(faces)
    if np.any(R < 0):
        raise ValueError("upwind scheme assumes a nonnegative growth rate")
    times = np.asarray(times, float)
    n = np.asarray(n0(x), float).copy()
    out = np.empty((x.size, times.size))
    out[:, 0] = n
    rmax = R.max()
    now = times[0]
    for m, target in enumerate(times[1:], start=1):
        while now < target - 1e-14:
            h = target - now if rmax == 0 else min(target - now, cfl * dx / rmax)
            flux = np.empty(x.size + 1)
            flux[1:] = R[1:] * n
            flux[0] = R[0] * (inflow(now) if inflow is not None else 0.0)
            n = n - h / dx * np.diff(flux)
            now += h
        out[:, m] = n
    return out


def simulate_growth(rate: KernelExpression, n0, grid: InternalGrid, times, cfl: float = 0.9):
    """Exact characteristics when available, otherwise upwind."""
    exact = characteristic_solution(rate, n0, grid.points, times)
    if exact is not None:
        return exact
    return upwind(rate, n0, grid, times, cfl)


def simulate_shift_splitting(
    system: FixedPivotSystem,
    speed: float,
    n0,
    times,
    t0: float = 0.0,
    rtol=1e-8,
    atol=1e-10,
):
    """Constant growth ``R = speed`` combined with aggregation/breakage.

    Strang splitting ``G(h/2) A(h) G(h/2)`` with ``h = dx / speed`` makes each
    growth half-step a half-cell translation.  Carrying the half-shifted state
    ``V = G(-h/2) n`` turns consecutive steps into ``V <- A(h) G(h) V``, where
    ``G(h)`` is an exact one-cell shift.  Output densities are recovered by a
    half-cell cubic interpolation.

    The density entering through the first node is the initial data traced
    back along the characteristic, damped by the death rate felt at the first
    node; births below the grid are neglected.  Output ``times`` must be
    multiples of ``h`` from ``t0``.
    """
    if speed <= 0:
        raise ValueError("shift splitting needs a positive growth speed")
    grid = system.grid
    x = grid.points
    dx = grid.spacing
    h = dx / speed
    times = np.asarray(times, float)
    steps = np.rint((times - t0) / h).astype(int)
    if np.any(np.abs(steps * h - (times - t0)) > 1e-9 * max(1.0, h)) or np.any(steps < 0):
        raise ValueError("output times must be nonnegative multiples of dx / speed from t0")

    def death_rate(N):
        if system.aggregation is None:
            return 0.0
        rate = 0.0
        for (a, b), c in system.aggregation.terms.items():
            rate += c * x[0] ** a * np.sum(x**b * N)
        return rate

    def ghost(tm, damp):
        # density that will enter the first node on the next shift
        return float(n0(x[0] + 0.5 * dx - speed * (tm + h - t0))) * np.exp(-damp)

    wanted = set(steps.tolist())
    V = np.asarray(n0(x + 0.5 * dx), float)
    log_damp = 0.0
    prev_rate = death_rate(V * system.widths)
    states = {0: (V.copy(), ghost(t0, 0.0))}
    last = int(steps.max()) if steps.size else 0
    for m in range(1, last + 1):
        tm = t0 + m * h
        shifted = np.empty_like(V)
        shifted[1:] = V[:-1]
        shifted[0] = ghost(tm - h, log_damp)
        V = integrate(system, shifted, [tm], t0=tm - h, rtol=rtol, atol=atol)[:, 0]
        rate = death_rate(V * system.widths)
        log_damp += 0.5 * h * (prev_rate + rate)
        prev_rate = rate
        if m in wanted:
            states[m] = (V.copy(), ghost(tm, log_damp))

    out = np.empty((x.size, times.size))
    nodes = np.append(x[0] - dx, x)
    for col, m in enumerate(steps):
        Vm, g = states[m]
        spline = CubicSpline(nodes, np.append(g, Vm))
        out[:, col] = spline(x - 0.5 * dx)
    return np.clip(out, 0.0, None)
