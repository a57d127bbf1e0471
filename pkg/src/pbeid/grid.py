"""Number-density data model and preprocessing.

A :class:`DensityField` stores n(x_i, t_m) as a ``j x k`` matrix over a uniform
internal-coordinate grid and a uniform time grid.  Everything that turns raw
density snapshots into a regression target lives here: temporal
differentiation, flattening, noise injection, smoothing and row subsampling.

Flattened vectors are time-major with the internal coordinate varying fastest,
i.e. entry ``m * j + i`` holds the value at ``(x_i, t_m)``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import savgol_filter

GRID_RTOL = 1e-9

__all__ = [
    "GridError",
    "DensityFileError",
    "InternalGrid",
    "TemporalGrid",
    "DensityField",
    "RowMask",
    "flatten",
    "unflatten",
    "load_density",
    "save_density",
    "time_derivative",
    "add_white_noise",
    "smooth_savgol",
    "polyfit_derivative",
    "differentiate",
    "subsample_rows",
]


class GridError(ValueError):
    """Raised when a grid violates the uniform, strictly increasing contract."""


class DensityFileError(ValueError):
    """Raised when a density CSV file cannot be parsed."""


def _uniform_spacing(points: np.ndarray, name: str) -> float:
    if points.ndim != 1 or points.size < 2:
        raise GridError(f"{name} grid needs at least two points")
    if not np.all(np.isfinite(points)):
        raise GridError(f"{name} grid contains non-finite values")
    steps = np.diff(points)
    if np.any(steps <= 0):
        raise GridError(f"{name} grid must be strictly increasing")
    spacing = (points[-1] - points[0]) / (points.size - 1)
    if np.max(np.abs(steps - spacing)) > GRID_RTOL * spacing:
        raise GridError(f"{name} grid is not uniform within relative tolerance {GRID_RTOL:g}")
    return float(spacing)


@dataclass(frozen=True)
class InternalGrid:
    """Uniform grid over the internal coordinate (particle size)."""

    points: np.ndarray
    spacing: float = field(init=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        spacing = _uniform_spacing(pts, "internal")
        if pts[0] <= 0:
            raise GridError("internal grid must start above zero")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "spacing", spacing)

    @classmethod
    def from_range(cls, start: float, stop: float, step: float) -> "InternalGrid":
        """Points ``start, start + step, ...`` up to ``stop`` (inclusive within round-off)."""
        return cls(_range(start, stop, step))

    def __len__(self):
        return self.points.size

    @property
    def offset(self) -> float:
        """Position of the first node in units of the spacing."""
        return float(self.points[0] / self.spacing)


@dataclass(frozen=True)
class TemporalGrid:
    """Uniform grid over time."""

    points: np.ndarray
    spacing: float = field(init=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        spacing = _uniform_spacing(pts, "temporal")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "spacing", spacing)

    @classmethod
    def from_range(cls, start: float, stop: float, step: float) -> "TemporalGrid":
        return cls(_range(start, stop, step))

    def __len__(self):
        return self.points.size


def _range(start: float, stop: float, step: float) -> np.ndarray:
    if step <= 0:
        raise GridError("step must be positive")
    count = int(np.floor((stop - start) / step + 1e-6)) + 1
    return start + step * np.arange(count)


@dataclass(frozen=True)
class DensityField:
    """Transient number density ``n(x_i, t_m)`` on uniform grids.

    Parameters
    ----------
    x, t : InternalGrid, TemporalGrid
    values : ndarray of shape (j, k)
    provenance : str
        One of ``clean``, ``noisy``, ``smoothed`` or ``subsampled``.
    meta : dict
        Free-form generation metadata (seeds, case id, solver settings).
    """

    x: InternalGrid
    t: TemporalGrid
    values: np.ndarray
    provenance: str = "clean"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (len(self.x), len(self.t)):
            raise GridError(
                f"values have shape {vals.shape}, grids imply {(len(self.x), len(self.t))}"
            )
        if not np.all(np.isfinite(vals)):
            raise GridError("density values must be finite")
        if self.provenance == "clean" and np.any(vals < 0):
            raise GridError("clean density fields must be non-negative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_rows(self) -> int:
        """Length ``p = j * k`` of the flattened regression system."""
        return self.values.size

    def with_values(self, values, provenance=None, **meta) -> "DensityField":
        merged = dict(self.meta)
        merged.update(meta)
        return replace(
            self, values=values, provenance=provenance or self.provenance, meta=merged
        )

    def flat(self) -> np.ndarray:
        return flatten(self.values)

    def __eq__(self, other):
        if not isinstance(other, DensityField):
            return NotImplemented
        return (
            np.array_equal(self.x.points, other.x.points)
            and np.array_equal(self.t.points, other.t.points)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


@dataclass(frozen=True)
class RowMask:
    """Sorted, unique row indices (0-based) into a flattened system of length ``p``."""

    indices: np.ndarray
    p: int
    seed: int | None = None
    fraction: float = 1.0

    @classmethod
    def full(cls, p: int) -> "RowMask":
        return cls(np.arange(p), p, None, 1.0)

    def __len__(self):
        return self.indices.size


def flatten(matrix: np.ndarray) -> np.ndarray:
    """Reshape a ``j x k`` matrix to the time-major, x-fastest column vector."""
    return np.asarray(matrix).ravel(order="F")


def unflatten(vector: np.ndarray, j: int, k: int) -> np.ndarray:
    return np.asarray(vector).reshape((j, k), order="F")


# -- file io ---------------------------------------------------------------


def save_density(field_: DensityField, path, sidecar: bool = True) -> Path:
    """Write the density CSV (and an optional JSON sidecar with provenance)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + [repr(float(v)) for v in field_.t.points])
        for xi, row in zip(field_.x.points, field_.values):
            writer.writerow([repr(float(xi))] + [repr(float(v)) for v in row])
    if sidecar:
        meta = {"provenance": field_.provenance, "meta": _jsonable(field_.meta)}
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def load_density(path) -> DensityField:
    """Read a density CSV written by :func:`save_density` (or by hand)."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise DensityFileError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 2 or header[0].strip() != "":
        raise DensityFileError(f"{path}: malformed header, first cell must be empty")
    try:
        t = np.array([float(v) for v in header[1:]])
    except ValueError as exc:
        raise DensityFileError(f"{path}: non-numeric time value in header ({exc})") from None
    xs, vals = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DensityFileError(
                f"{path}:{lineno}: dimension mismatch, expected {len(header)} cells, got {len(row)}"
            )
        try:
            xs.append(float(row[0]))
            vals.append([float(v) for v in row[1:]])
        except ValueError as exc:
            raise DensityFileError(f"{path}:{lineno}: non-numeric cell ({exc})") from None
    if not xs:
        raise DensityFileError(f"{path}: no data rows")
    provenance, meta = "clean", {}
    side = path.with_suffix(".json")
    if side.exists():
        info = json.loads(side.read_text())
        provenance = info.get("provenance", provenance)
        meta = info.get("meta", {})
    values = np.array(vals)
    if provenance == "clean" and np.any(values < 0):
        provenance = "noisy"
    return DensityField(InternalGrid(np.array(xs)), TemporalGrid(t), values, provenance, meta)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# -- preprocessing -----------------------------------------------------------


def time_derivative(field_: DensityField, order: int = 2) -> np.ndarray:
    """Finite-difference estimate of dn/dt, flattened.

    Interior points use central differences and the end points one-sided
    stencils of the same order.  ``order`` may be 2 or 4.
    """
    k = len(field_.t)
    dt = field_.t.spacing
    if order == 2:
        if k < 3:
            raise GridError("second-order differencing needs at least 3 time points")
        deriv = _fd2(field_.values, dt)
    elif order == 4:
        if k < 5:
            raise GridError("fourth-order differencing needs at least 5 time points")
        deriv = _fd4(field_.values, dt)
    else:
        raise ValueError(f"unsupported finite-difference order {order}")
    return flatten(deriv)


def _fd2(values: np.ndarray, dt: float) -> np.ndarray:
    v = values
    out = np.empty_like(v)
    out[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2 * dt)
    out[:, 0] = (-3 * v[:, 0] + 4 * v[:, 1] - v[:, 2]) / (2 * dt)
    out[:, -1] = (3 * v[:, -1] - 4 * v[:, -2] + v[:, -3]) / (2 * dt)
    return out


def _fd4(values: np.ndarray, dt: float) -> np.ndarray:
    v = values
    out = np.empty_like(v)
    out[:, 2:-2] = (v[:, :-4] - 8 * v[:, 1:-3] + 8 * v[:, 3:-1] - v[:, 4:]) / (12 * dt)
    # one-sided fourth-order stencils on the first/last two columns
    fwd0 = np.array([-25, 48, -36, 16, -3]) / 12
    fwd1 = np.array([-3, -10, 18, -6, 1]) / 12
    out[:, 0] = v[:, :5] @ fwd0 / dt
    out[:, 1] = v[:, :5] @ fwd1 / dt
    out[:, -1] = -(v[:, -1:-6:-1] @ fwd0) / dt
    out[:, -2] = -(v[:, -1:-6:-1] @ fwd1) / dt
    return out


def add_white_noise(
    field_: DensityField, level: float, seed: int, mode: str = "global"
) -> DensityField:
    """Add Gaussian white noise.

    In the default ``global`` mode the noise standard deviation is
    ``level * std(field)``, one scalar for the whole field.  ``multiplicative``
    mode returns ``n * (1 + level * eps)`` instead.  Draws come from numpy's
    PCG64 generator seeded with ``seed`` (ziggurat normal transform), so a given
    ``(field, level, seed)`` always produces the same result.
    """
    if level < 0:
        raise ValueError("noise level must be non-negative")
    if level == 0:
        return field_
    rng = np.random.Generator(np.random.PCG64(seed))
    eps = rng.standard_normal(field_.values.shape)
    if mode == "global":
        noisy = field_.values + level * np.std(field_.values) * eps
    elif mode == "multiplicative":
        noisy = field_.values * (1.0 + level * eps)
    else:
        raise ValueError(f"unknown noise mode {mode!r}")
    return field_.with_values(noisy, "noisy", noise_level=level, noise_seed=seed, noise_mode=mode)


def smooth_savgol(field_: DensityField, window: int = 11, polyorder: int = 3) -> DensityField:
    """Savitzky-Golay smoothing along the internal coordinate, per time slice."""
    if window % 2 == 0:
        raise ValueError("window must be odd")
    if window <= polyorder:
        raise ValueError("window must exceed polyorder")
    if window > len(field_.x):
        raise ValueError("window longer than the internal grid")
    smoothed = savgol_filter(field_.values, window, polyorder, axis=0, mode="interp")
    return field_.with_values(smoothed, "smoothed", savgol=[window, polyorder])


def polyfit_derivative(field_: DensityField, degree: int = 3, halfwidth: int = 5) -> np.ndarray:
    """dn/dt from local least-squares polynomials in time.

    Each point gets the analytic derivative of a degree-``degree`` polynomial
    fitted to the ``2*halfwidth+1`` nearest samples; windows are shifted inward
    at the ends of the record.
    """
    width = 2 * halfwidth + 1
    if width <= degree:
        raise ValueError("window 2*halfwidth+1 must exceed the polynomial degree")
    if len(field_.t) < width:
        raise GridError(f"need at least {width} time points, got {len(field_.t)}")
    deriv = savgol_filter(
        field_.values, width, degree, deriv=1, delta=field_.t.spacing, axis=1, mode="interp"
    )
    return flatten(deriv)


def subsample_rows(p: int, fraction: float, seed: int) -> RowMask:
    """Uniform random subset (without replacement) of ``round(fraction * p)`` rows."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    if fraction == 1:
        return RowMask(np.arange(p), p, seed, 1.0)
    size = int(round(fraction * p))
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = np.sort(rng.choice(p, size=size, replace=False))
    return RowMask(idx, p, seed, fraction)


def differentiate(field_: DensityField, scheme: str = "fd2", degree: int = 3, halfwidth: int = 5) -> np.ndarray:
    """Dispatch to :func:`time_derivative` (``fd2``/``fd4``) or :func:`polyfit_derivative`."""
    if scheme == "fd2":
        return time_derivative(field_, 2)
    if scheme == "fd4":
        return time_derivative(field_, 4)
    if scheme == "polyfit":
        return polyfit_derivative(field_, degree, halfwidth)
    raise ValueError(f"unknown derivative scheme {scheme!r}")
