"""Candidate-term operators for one-dimensional population balances.

Five operator families turn a density field and a monomial candidate function
``x**a * y**b`` into one library column:

========== =====================================================
agg_birth  1/2 * int_0^x f(x, y) n(x - y, t) n(y, t) dy
agg_death  n(x, t) * int_0^inf f(x, y) n(y, t) dy
bkg_birth  int_x^inf f(y) n(y, t) dy
bkg_death  f(x) n(x, t)
growth     d/dx [f(x) n(x, t)]
========== =====================================================

Integrals use the composite trapezoid rule on the data grid, truncated to the
sampled range ``[x_1, x_j]``.  Derivatives use second-order finite
differences (one-sided at the grid ends).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grid import DensityField, GridError, flatten

PROCESSES = ("agg_birth", "agg_death", "bkg_birth", "bkg_death", "growth")

PROCESS_SYMBOL = {
    "agg_birth": "B_agg",
    "agg_death": "D_agg",
    "bkg_birth": "B_bkg",
    "bkg_death": "D_bkg",
    "growth": "G",
}

_SUPERSCRIPT = str.maketrans("0123456789-", "⁰¹²³⁴⁵⁶⁷⁸⁹⁻")


class DegenerateIntegralWarning(UserWarning):
    """A trapezoid integral was requested over fewer than two samples."""


class BasisError(ValueError):
    """Raised when a candidate function does not fit the operator it is used with."""


def _monomial(var: str, power: int, pretty: bool) -> str:
    if power == 1:
        return var
    if pretty:
        return var + str(power).translate(_SUPERSCRIPT)
    return f"{var}^{power}"


def monomial_name(a: int, b: int, pretty: bool = False) -> str:
    """Readable name of ``x**a * y**b`` (``1``, ``x^2*y``, ``1/x`` ...)."""
    num = [_monomial(v, p, pretty) for v, p in (("x", a), ("y", b)) if p > 0]
    den = [_monomial(v, -p, pretty) for v, p in (("x", a), ("y", b)) if p < 0]
    sep = "" if pretty else "*"
    top = sep.join(num) if num else "1"
    if den:
        return f"{top}/{sep.join(den)}"
    return top


@dataclass(frozen=True, order=True)
class BasisFunction:
    """Candidate function ``multiplier * x**a * y**b``."""

    a: int = 0
    b: int = 0
    multiplier: float = 1.0

    @property
    def name(self) -> str:
        base = monomial_name(self.a, self.b)
        if self.multiplier == 1:
            return base
        m = f"{self.multiplier:g}"
        return m if base == "1" else f"{m}*{base}"

    @property
    def pretty(self) -> str:
        base = monomial_name(self.a, self.b, pretty=True)
        if self.multiplier == 1:
            return base
        m = f"{self.multiplier:g}"
        return m if base == "1" else m + base

    def __call__(self, x, y=None):
        x = np.asarray(x, dtype=float)
        out = self.multiplier * x**self.a if self.a else np.full_like(x, self.multiplier)
        if self.b:
            if y is None:
                raise BasisError(f"basis {self.name} depends on y")
            out = out * np.asarray(y, dtype=float) ** self.b
        return out

    def x_factor(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.multiplier * x**self.a

    def y_factor(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) ** self.b


@dataclass(frozen=True)
class CandidateColumn:
    """One evaluated library column, aligned with the flattened data."""

    process: str
    basis: BasisFunction
    values: np.ndarray

    def __post_init__(self):
        if self.process not in PROCESSES:
            raise ValueError(f"unknown process {self.process!r}")
        vals = np.asarray(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def key(self) -> tuple:
        return (self.process, self.basis.a, self.basis.b)

    @property
    def name(self) -> str:
        return f"{PROCESS_SYMBOL[self.process]}({self.basis.name})"

    @property
    def pretty(self) -> str:
        return f"{PROCESS_SYMBOL[self.process]}({self.basis.pretty})"


def trapz(values, spacing: float) -> float:
    """Composite trapezoid rule on a uniform grid.

    Fewer than two samples describe an empty integration range; the result is
    0 and a :class:`DegenerateIntegralWarning` is issued.
    """
    v = np.asarray(values, dtype=float)
    if v.shape[0] < 2:
        warnings.warn("trapezoid over fewer than two samples", DegenerateIntegralWarning)
        return 0.0
    return float(spacing * (v.sum(axis=0) - 0.5 * (v[0] + v[-1])))


def _trapz_cols(v: np.ndarray, spacing: float) -> np.ndarray:
    """Trapezoid along axis 0 for every column of ``v``."""
    if v.shape[0] < 2:
        return np.zeros(v.shape[1:])
    return spacing * (v.sum(axis=0) - 0.5 * (v[0] + v[-1]))


def pair_shift(field: DensityField) -> int:
    """Index shift used to pair ``y`` with the node nearest to ``x - y``.

    For a grid ``x_l = x_1 + (l-1)*dx`` the size ``x_i - x_l`` lies closest to
    node ``i - l + 1 - s`` with ``s = round(x_1 / dx)``.  On grids where
    ``x_1`` is a multiple of ``dx`` the pairing is exact.
    """
    return int(round(field.x.offset))


def birth_convolution(field: DensityField, b: int) -> np.ndarray:
    """``1/2 * trapz_y[y**b n(x - y) n(y)]`` for every node, shape (j, k).

    For row ``i`` (1-based) the quadrature runs over ``y = x_1 .. x_L`` with
    ``L = i - s`` and partner index ``L + 1 - l``, so the paired sizes sum to
    the same value for every ``l``.  Rows with ``L < 2`` get zero.
    """
    n = field.values
    j, k = n.shape
    y = field.x.points
    f = (y**b)[:, None] * n if b else n
    s = pair_shift(field)
    out = np.zeros((j, k))
    L = np.arange(1, j + 1) - s
    rows = np.nonzero(L >= 2)[0]
    if rows.size == 0:
        return out
    Lr = L[rows]
    for m in range(k):
        conv = np.convolve(f[:, m], n[:, m])
        ends = f[0, m] * n[Lr - 1, m] + f[Lr - 1, m] * n[0, m]
        out[rows, m] = conv[Lr - 1] - 0.5 * ends
    return 0.5 * field.x.spacing * out


def _check_field(field: DensityField):
    if not isinstance(field, DensityField):
        raise TypeError("expected a DensityField")


def agg_birth_matrix(field: DensityField, basis: BasisFunction, conv=None) -> np.ndarray:
    _check_field(field)
    if conv is None:
        conv = birth_convolution(field, basis.b)
    return basis.x_factor(field.x.points)[:, None] * conv


def agg_death_matrix(field: DensityField, basis: BasisFunction) -> np.ndarray:
    _check_field(field)
    n = field.values
    moment = _trapz_cols(basis.y_factor(field.x.points)[:, None] * n, field.x.spacing)
    return basis.x_factor(field.x.points)[:, None] * n * moment[None, :]


def bkg_birth_matrix(field: DensityField, basis: BasisFunction) -> np.ndarray:
    _check_field(field)
    if basis.a != 0:
        raise BasisError(f"breakage birth candidates depend on y only, got {basis.name}")
    y = field.x.points
    f = basis.multiplier * basis.y_factor(y)[:, None] * field.values
    panels = 0.5 * field.x.spacing * (f[:-1] + f[1:])
    out = np.zeros_like(f)
    # tail sums: out[i] = sum of panels i .. j-2, so out[j-1] = 0
    out[:-1] = np.cumsum(panels[::-1], axis=0)[::-1]
    return out


def bkg_death_matrix(field: DensityField, basis: BasisFunction) -> np.ndarray:
    _check_field(field)
    if basis.b != 0:
        raise BasisError(f"breakage death candidates depend on x only, got {basis.name}")
    return basis.x_factor(field.x.points)[:, None] * field.values


def growth_matrix(field: DensityField, basis: BasisFunction) -> np.ndarray:
    _check_field(field)
    if basis.b != 0:
        raise BasisError(f"growth candidates depend on x only, got {basis.name}")
    if len(field.x) < 3:
        raise GridError("growth columns need at least 3 internal grid points")
    flux = basis.x_factor(field.x.points)[:, None] * field.values
    return np.gradient(flux, field.x.spacing, axis=0, edge_order=2)


_MATRIX = {
    "agg_birth": agg_birth_matrix,
    "agg_death": agg_death_matrix,
    "bkg_birth": bkg_birth_matrix,
    "bkg_death": bkg_death_matrix,
    "growth": growth_matrix,
}


def operator_matrix(process: str, field: DensityField, basis: BasisFunction) -> np.ndarray:
    """Evaluate ``process`` with candidate ``basis`` as a ``j x k`` matrix."""
    try:
        fn = _MATRIX[process]
    except KeyError:
        raise ValueError(f"unknown process {process!r}") from None
    return fn(field, basis)


def agg_birth_column(field: DensityField, basis: BasisFunction) -> CandidateColumn:
    return CandidateColumn("agg_birth", basis, flatten(agg_birth_matrix(field, basis)))


def agg_death_column(field: DensityField, basis: BasisFunction) -> CandidateColumn:
    return CandidateColumn("agg_death", basis, flatten(agg_death_matrix(field, basis)))


def bkg_birth_column(field: DensityField, basis: BasisFunction) -> CandidateColumn:
    return CandidateColumn("bkg_birth", basis, flatten(bkg_birth_matrix(field, basis)))


def bkg_death_column(field: DensityField, basis: BasisFunction) -> CandidateColumn:
    return CandidateColumn("bkg_death", basis, flatten(bkg_death_matrix(field, basis)))


def growth_column(field: DensityField, basis: BasisFunction) -> CandidateColumn:
    return CandidateColumn("growth", basis, flatten(growth_matrix(field, basis)))


def column(process: str, field: DensityField, basis: BasisFunction) -> CandidateColumn:
    return CandidateColumn(process, basis, flatten(operator_matrix(process, field, basis)))
