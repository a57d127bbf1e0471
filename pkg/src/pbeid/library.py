"""Candidate libraries, column curation and the symbolic term ledger."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import qr

from .grid import DensityField, flatten
from .operators import (
    PROCESS_SYMBOL,
    BasisFunction,
    CandidateColumn,
    agg_birth_matrix,
    birth_convolution,
    operator_matrix,
)

FAMILIES = ("agg", "bkg", "growth")
FAMILY_PROCESSES = {
    "agg": ("agg_birth", "agg_death"),
    "bkg": ("bkg_birth", "bkg_death"),
    "growth": ("growth",),
}
PROCESS_FAMILY = {p: f for f, ps in FAMILY_PROCESSES.items() for p in ps}

WEAK_FRACTION = 0.1
DEFAULT_RANK_TOL = 1e-8

_POWERS = (0, 1, 2, 3, -1, -2, -3)


@dataclass(frozen=True)
class BasisCatalog:
    """Candidate functions for each operator."""

    agg: tuple = ()
    bkg_birth: tuple = ()
    bkg_death: tuple = ()
    growth: tuple = ()

    @classmethod
    def default(cls) -> "BasisCatalog":
        """Benchmark catalog: 20 aggregation, 14 breakage and 7 growth columns."""
        agg = [(0, 0), (1, 0), (2, 0), (3, 0), (0, 1), (0, 2), (0, 3), (1, 1), (2, 1), (1, 2)]
        return cls(
            agg=tuple(BasisFunction(a, b) for a, b in agg),
            bkg_birth=tuple(BasisFunction(0, p) for p in _POWERS),
            bkg_death=tuple(BasisFunction(p, 0) for p in _POWERS),
            growth=tuple(BasisFunction(p, 0) for p in _POWERS),
        )

    def bases(self, process: str) -> tuple:
        if process in ("agg_birth", "agg_death"):
            return self.agg
        return getattr(self, process)

    def size(self, family: str | None = None) -> int:
        fams = FAMILIES if family is None else (family,)
        return sum(len(self.bases(p)) for f in fams for p in FAMILY_PROCESSES[f])

    def to_dict(self) -> dict:
        return {
            name: [[b.a, b.b, b.multiplier] for b in getattr(self, name)]
            for name in ("agg", "bkg_birth", "bkg_death", "growth")
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BasisCatalog":
        return cls(
            **{
                name: tuple(BasisFunction(int(e[0]), int(e[1]), *(e[2:3] or [1.0])) for e in data.get(name, ()))
                for name in ("agg", "bkg_birth", "bkg_death", "growth")
            }
        )


@dataclass(frozen=True)
class TermKey:
    """Identity of a library column: operator plus monomial exponents."""

    process: str
    a: int
    b: int

    @property
    def family(self) -> str:
        return PROCESS_FAMILY[self.process]

    @property
    def basis(self) -> BasisFunction:
        return BasisFunction(self.a, self.b)

    @property
    def name(self) -> str:
        return f"{PROCESS_SYMBOL[self.process]}({self.basis.name})"

    @property
    def pretty(self) -> str:
        return f"{PROCESS_SYMBOL[self.process]}({self.basis.pretty})"

    def __str__(self):
        return self.name


def key_of(col: CandidateColumn) -> TermKey:
    return TermKey(col.process, col.basis.a, col.basis.b)


class Library:
    """Column-stacked candidate terms ``Omega`` (p x q) with descriptors."""

    def __init__(self, matrix, keys, combination=(), curated=False):
        matrix = np.asfortranarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[1] != len(keys):
            raise ValueError("matrix columns and keys disagree")
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (process, basis) pairs in library")
        self.matrix = matrix
        self.keys = list(keys)
        self.combination = tuple(combination)
        self.curated = curated

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def names(self) -> list[str]:
        return [k.name for k in self.keys]

    @property
    def columns(self) -> list[CandidateColumn]:
        return [
            CandidateColumn(k.process, k.basis, self.matrix[:, c]) for c, k in enumerate(self.keys)
        ]

    def index(self, key: TermKey) -> int:
        return self.keys.index(key)

    def subset(self, indices, combination=None, curated=None) -> "Library":
        idx = list(indices)
        return Library(
            self.matrix[:, idx],
            [self.keys[i] for i in idx],
            self.combination if combination is None else combination,
            self.curated if curated is None else curated,
        )

    def restrict_rows(self, rows) -> "Library":
        return Library(self.matrix[rows], self.keys, self.combination, self.curated)

    def family_indices(self, families) -> list[int]:
        fams = set(families)
        return [i for i, k in enumerate(self.keys) if k.family in fams]

    def save(self, prefix) -> tuple[Path, Path]:
        """Write ``<prefix>.csv`` (matrix) and ``<prefix>.json`` (descriptors)."""
        prefix = Path(prefix)
        mat = prefix.with_suffix(".csv")
        with mat.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.names)
            for row in self.matrix:
                writer.writerow([repr(float(v)) for v in row])
        desc = prefix.with_suffix(".json")
        desc.write_text(
            json.dumps(
                {
                    "combination": list(self.combination),
                    "curated": self.curated,
                    "columns": [
                        {"process": k.process, "a": k.a, "b": k.b, "name": k.name} for k in self.keys
                    ],
                },
                indent=2,
            )
        )
        return mat, desc

    def __repr__(self):
        return f"Library(shape={self.shape}, combination={self.combination}, curated={self.curated})"


# -- construction --------------------------------------------------------------


def build_sublibrary(field: DensityField, family: str, catalog: BasisCatalog | None = None) -> list[CandidateColumn]:
    """Evaluate every candidate of one process family on ``field``.

    Columns come birth block first, then death block, each in catalog order.
    """
    catalog = catalog or BasisCatalog.default()
    if family not in FAMILY_PROCESSES:
        raise ValueError(f"unknown family {family!r}")
    if catalog.size(family) == 0:
        raise ValueError(f"catalog has no candidates for family {family!r}")
    cols = []
    conv_cache: dict[int, np.ndarray] = {}
    for process in FAMILY_PROCESSES[family]:
        for basis in catalog.bases(process):
            if process == "agg_birth":
                if basis.b not in conv_cache:
                    conv_cache[basis.b] = birth_convolution(field, basis.b)
                mat = agg_birth_matrix(field, basis, conv_cache[basis.b])
            else:
                mat = operator_matrix(process, field, basis)
            cols.append(CandidateColumn(process, basis, flatten(mat)))
    return cols


def assemble_master(sublibs, combination=None) -> Library:
    """Concatenate sub-libraries column-wise."""
    sublibs = [list(s) for s in sublibs]
    cols = [c for s in sublibs for c in s]
    if not cols:
        raise ValueError("nothing to assemble")
    lengths = {c.values.size for c in cols}
    if len(lengths) != 1:
        raise ValueError(f"sub-libraries disagree on the number of rows: {sorted(lengths)}")
    if combination is None:
        combination = tuple(f for f in FAMILIES if any(PROCESS_FAMILY[c.process] == f for c in cols))
    matrix = np.empty((lengths.pop(), len(cols)), order="F")
    for i, c in enumerate(cols):
        matrix[:, i] = c.values
    return Library(matrix, [key_of(c) for c in cols], combination)


def build_library(field: DensityField, families=FAMILIES, catalog: BasisCatalog | None = None) -> Library:
    """Build and assemble the sub-libraries of ``families`` in master order."""
    fams = [f for f in FAMILIES if f in set(families)]
    return assemble_master([build_sublibrary(field, f, catalog) for f in fams], tuple(fams))


# -- curation ------------------------------------------------------------------


@dataclass
class Equivalence:
    """Removed column ``key`` reads as ``scale`` times ... see :class:`SymbolEntry`.

    The retained column carrying this record equals approximately
    ``scale * key``; ``exact`` is False when the underlying relation has other
    (weak or strong) members that were ignored in the two-term reading.
    """

    key: TermKey
    scale: float
    exact: bool = True


@dataclass
class SymbolEntry:
    key: TermKey
    alternates: list = field(default_factory=list)

    @property
    def description(self) -> str:
        text = self.key.name
        for eq in self.alternates:
            text += f" OR {eq.scale:.4g}{eq.key.name}"
        return text


@dataclass
class DependencyGroup:
    """A set of linearly dependent columns and their null-space relation.

    ``relation`` holds raw-column coefficients ``w`` with ``sum_k w_k col_k = 0``;
    ``null_vector`` is the same relation on unit-normalised columns.
    """

    members: list
    null_vector: np.ndarray
    relation: np.ndarray
    weak: list
    strong: list
    removed: TermKey | None = None

    def reconstruct(self, library: Library, key: TermKey | None = None) -> np.ndarray:
        """Rebuild the removed column from the other members of the relation."""
        key = key or self.removed
        pos = self.members.index(key)
        out = np.zeros(library.shape[0])
        for w, k in zip(self.relation, self.members):
            if k != key:
                out -= w * library.matrix[:, library.index(k)]
        return out / self.relation[pos]

    def to_dict(self) -> dict:
        return {
            "members": [k.name for k in self.members],
            "relation": [float(v) for v in self.relation],
            "weak": [k.name for k in self.weak],
            "strong": [k.name for k in self.strong],
            "removed": self.removed.name if self.removed else None,
        }


@dataclass
class SymbolicVector:
    """Ledger mapping curated columns to their meaning and recorded OR forms."""

    entries: list
    null_terms: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i) -> SymbolEntry:
        return self.entries[i]

    @property
    def keys(self) -> list:
        return [e.key for e in self.entries]

    def entry(self, key: TermKey) -> SymbolEntry:
        for e in self.entries:
            if e.key == key:
                return e
        raise KeyError(key)

    def descriptions(self) -> list[str]:
        return [e.description for e in self.entries]

    def to_dict(self) -> dict:
        return {
            "entries": [
                {
                    "term": e.key.name,
                    "alternates": [
                        {"term": a.key.name, "scale": a.scale, "exact": a.exact} for a in e.alternates
                    ],
                }
                for e in self.entries
            ],
            "null_terms": [k.name for k in self.null_terms],
        }


def normalized_r_factor(matrix: np.ndarray, rhs: np.ndarray | None = None):
    """Triangular factor of the column-normalised matrix (plus rhs projection).

    Returns ``(R, norms, z, rho2)`` where ``A / norms = Q R``; with ``rhs``,
    ``z = Q^T rhs`` and ``rho2 = ||rhs - Q Q^T rhs||^2`` so that
    ``||A_S c - rhs||^2 = ||R_S diag(norms_S) c - z||^2 + rho2`` for any
    column subset ``S``.  Zero columns keep norm 1 to stay finite.
    """
    norms = np.linalg.norm(matrix, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    scaled = matrix / safe
    if rhs is None:
        (R,) = qr(scaled, mode="r", check_finite=False)
        return R, norms, None, None
    aug = np.column_stack([scaled, rhs])
    (Ra,) = qr(aug, mode="r", check_finite=False)
    q = matrix.shape[1]
    R = Ra[:q, :q]
    z = Ra[:q, q]
    rho2 = float(Ra[q, q] ** 2) if Ra.shape[0] > q else 0.0
    return R, norms, z, rho2


def _distance_to_span(R: np.ndarray, basis: list, col: int):
    target = R[:, col]
    if not basis:
        return float(np.linalg.norm(target)), np.zeros(0)
    B = R[:, basis]
    coef, *_ = np.linalg.lstsq(B, target, rcond=None)
    return float(np.linalg.norm(B @ coef - target)), coef


def _in_span(R, others, col, tol) -> bool:
    return _distance_to_span(R, list(others), col)[0] <= tol


def eliminate_dependent_columns(lib: Library, rank_tol: float = DEFAULT_RANK_TOL, r_factor=None):
    """Remove linearly dependent columns while keeping their meaning.

    Columns are unit-normalised and scanned in library order; a column lying
    within ``rank_tol`` of the span of the independent columns before it closes
    a dependency group whose relation is the null vector of its members.
    Members whose normalised null coefficient is below ``0.1`` times the
    largest are weak.  From every group the lowest-indexed strong member is
    removed (skipping members whose removal would lose rank) and recorded as an
    OR alternate of the highest-indexed strong member that survives.

    Returns the curated library, its :class:`SymbolicVector` and the list of
    :class:`DependencyGroup`.
    """
    if rank_tol <= 0:
        raise ValueError("rank tolerance must be positive")
    q = lib.shape[1]
    if r_factor is None:
        R, norms, _, _ = normalized_r_factor(lib.matrix)
    else:
        R, norms = r_factor
    top = norms.max() if q else 0.0
    zero = [c for c in range(q) if norms[c] <= 1e-14 * max(top, 1e-300) or top == 0]
    live = [c for c in range(q) if c not in zero]

    independent: list[int] = []
    groups: list[DependencyGroup] = []
    for c in live:
        dist, coef = _distance_to_span(R, independent, c)
        if dist > rank_tol:
            independent.append(c)
            continue
        scale = max(1.0, float(np.abs(coef).max()) if coef.size else 1.0)
        members = [k for k, w in zip(independent, coef) if abs(w) > 1e-10 * scale]
        vec = np.array([w for w in coef if abs(w) > 1e-10 * scale] + [-1.0])
        members.append(c)
        order = np.argsort(members)
        members = [members[i] for i in order]
        vec = vec[order]
        vec = vec / np.linalg.norm(vec)
        big = np.abs(vec).max()
        weak = [m for m, v in zip(members, vec) if abs(v) < WEAK_FRACTION * big]
        strong = [m for m in members if m not in weak]
        groups.append(
            DependencyGroup(
                members=members,
                null_vector=vec,
                relation=vec / norms[members],
                weak=weak,
                strong=strong,
            )
        )

    removed: list[int] = []
    alternates: dict[int, list] = {}
    for g in groups:
        kept_now = [c for c in live if c not in removed]
        choice = None
        for cand in g.strong + sorted(g.weak):
            if cand in removed:
                continue
            if _in_span(R, [c for c in kept_now if c != cand], cand, rank_tol):
                choice = cand
                break
        if choice is None:
            continue
        removed.append(choice)
        g.removed = choice
        survivors = [m for m in g.strong if m not in removed]
        if survivors:
            partner = max(survivors)
        else:
            rest = [(abs(v), m) for m, v in zip(g.members, g.null_vector) if m not in removed]
            partner = max(rest)[1] if rest else None
        if partner is None:
            continue
        w = dict(zip(g.members, g.relation))
        exact = len(g.members) == 2
        alternates.setdefault(partner, []).append(
            Equivalence(lib.keys[choice], float(-w[choice] / w[partner]), exact)
        )

    keep = [c for c in live if c not in removed]
    curated = lib.subset(keep, curated=True)
    symbols = SymbolicVector(
        [SymbolEntry(lib.keys[c], alternates.get(c, [])) for c in keep],
        [lib.keys[c] for c in zero],
    )
    for g in groups:
        g.members = [lib.keys[m] for m in g.members]
        g.weak = [lib.keys[m] for m in g.weak]
        g.strong = [lib.keys[m] for m in g.strong]
        g.removed = lib.keys[g.removed] if g.removed is not None else None
    return curated, symbols, groups


def smallest_singular_value(lib: Library) -> float:
    """Smallest singular value of the column-normalised matrix."""
    if lib.shape[1] == 0:
        return np.inf
    R, _, _, _ = normalized_r_factor(lib.matrix)
    return float(np.linalg.svd(R, compute_uv=False).min())
