"""Input checks shared by the estimators, the pipeline and the command line."""

from __future__ import annotations

import numbers

import numpy as np

from .grid import DensityField, InternalGrid, TemporalGrid
from .selector import RESIDUAL_MODES

DERIVATIVE_SCHEMES = ("fd2", "fd4", "polyfit")


class ConfigError(ValueError):
    """A run parameter is outside the range the pipeline accepts."""


def check_fraction(value, name="fraction") -> float:
    """Float in ``(0, 1]``."""
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None
    if not 0 < v <= 1:
        raise ConfigError(f"{name} must lie in (0, 1], got {v}")
    return v


def check_noise_level(value) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"noise level must be a number, got {value!r}") from None
    if not np.isfinite(v) or v < 0:
        raise ConfigError(f"noise level must be finite and >= 0, got {v}")
    return v


def check_seed(value, name="seed") -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if value < 0:
        raise ConfigError(f"{name} must be non-negative, got {value}")
    return int(value)


def check_weights(values) -> tuple:
    """Three finite, non-negative selection weights."""
    try:
        vals = tuple(float(v) for v in values)
    except (TypeError, ValueError):
        raise ConfigError(f"weights must be three numbers, got {values!r}") from None
    if len(vals) != 3:
        raise ConfigError(f"weights must have three entries, got {len(vals)}")
    if not all(np.isfinite(v) and v >= 0 for v in vals):
        raise ConfigError(f"weights must be finite and >= 0, got {vals}")
    return vals


def check_residual_mode(mode) -> str:
    if mode not in RESIDUAL_MODES:
        raise ConfigError(f"residual mode must be one of {RESIDUAL_MODES}, got {mode!r}")
    return mode


def check_derivative(scheme) -> str:
    if scheme not in DERIVATIVE_SCHEMES:
        raise ConfigError(f"derivative scheme must be one of {DERIVATIVE_SCHEMES}, got {scheme!r}")
    return scheme


def check_savgol(window, polyorder) -> tuple:
    if not isinstance(window, numbers.Integral) or not isinstance(polyorder, numbers.Integral):
        raise ConfigError("Savitzky-Golay window and order must be integers")
    if window % 2 == 0:
        raise ConfigError(f"Savitzky-Golay window must be odd, got {window}")
    if polyorder < 0 or window <= polyorder:
        raise ConfigError(f"need 0 <= polyorder < window, got window={window}, polyorder={polyorder}")
    return int(window), int(polyorder)


def check_thresholds(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ConfigError("threshold grid is empty")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ConfigError("thresholds must be finite and >= 0")
    return arr


def check_case_ids(ids, known) -> tuple:
    ids = tuple(ids)
    unknown = [c for c in ids if c not in known]
    if unknown:
        raise ConfigError(f"unknown case ids {unknown}; expected a subset of {sorted(known)}")
    if len(set(ids)) != len(ids):
        raise ConfigError("case ids must not repeat")
    return ids


def as_density_field(X, x=None, t=None) -> DensityField:
    """Accept a :class:`DensityField` or a ``(j, k)`` array with its grids."""
    if isinstance(X, DensityField):
        return X
    if x is None or t is None:
        raise ConfigError("a bare array needs both the size grid x and the time grid t")
    values = np.asarray(X, dtype=float)
    if values.ndim != 2:
        raise ConfigError(f"density values must be two-dimensional, got shape {values.shape}")
    xg = x if isinstance(x, InternalGrid) else InternalGrid(np.asarray(x, float))
    tg = t if isinstance(t, TemporalGrid) else TemporalGrid(np.asarray(t, float))
    return DensityField(xg, tg, values)


__all__ = [
    "ConfigError",
    "DERIVATIVE_SCHEMES",
    "as_density_field",
    "check_case_ids",
    "check_derivative",
    "check_fraction",
    "check_noise_level",
    "check_residual_mode",
    "check_savgol",
    "check_seed",
    "check_thresholds",
    "check_weights",
]
