"""Sweep library combinations and sparsity levels, then pick the cheapest model.

The cost of a candidate solution is

    w_res * residual + w_terms * (number of terms) + w_pen * penalty

where ``penalty`` counts birth terms without their matching death term (and
the reverse) for aggregation and breakage separately.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import DensityField, RowMask
from .library import (
    FAMILIES,
    DEFAULT_RANK_TOL,
    BasisCatalog,
    Library,
    SymbolicVector,
    build_library,
    eliminate_dependent_columns,
    normalized_r_factor,
)
from .stls import SparseSolution, StlsConfig, stls

log = logging.getLogger(__name__)

RESIDUAL_MODES = ("relative", "raw", "mse")

PAIRED_PROCESSES = (("agg_birth", "agg_death"), ("bkg_birth", "bkg_death"))


@dataclass(frozen=True)
class SelectWeights:
    """Weights of the selection cost.

    Parameters
    ----------
    residual, terms, penalty : float
        Weights of the residual, the term count and the realizability penalty.
    unit_score : float
        Penalty contributed by one unpaired birth or death process.
    residual_mode : {'raw', 'relative', 'mse'}
        ``raw`` uses the squared residual as is, ``relative`` divides it by
        ``||ndot||^2`` and ``mse`` divides it by the number of rows.
    """

    residual: float = 1.0
    terms: float = 1.0
    penalty: float = 1.0
    unit_score: float = 1.0
    residual_mode: str = "raw"

    def __post_init__(self):
        for name in ("residual", "terms", "penalty", "unit_score"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"weight {name} must be finite and >= 0, got {v}")
        if self.residual_mode not in RESIDUAL_MODES:
            raise ValueError(f"residual_mode must be one of {RESIDUAL_MODES}")

    @classmethod
    def from_sequence(cls, values, **kw) -> "SelectWeights":
        r, t, p = values
        return cls(float(r), float(t), float(p), **kw)


def all_combinations(families=FAMILIES) -> tuple:
    """Nonempty subsets of the families, singletons first."""
    order = ("growth", "bkg", "agg")
    fams = [f for f in order if f in set(families)]
    out = []
    for size in range(1, len(fams) + 1):
        out.extend(itertools.combinations(fams, size))
    return tuple(out)


def default_thresholds() -> np.ndarray:
    return np.logspace(-3, 1, 60)


@dataclass(frozen=True)
class CombinationPlan:
    """Library combinations to try and the sparsity grid for each."""

    combinations: tuple = field(default_factory=all_combinations)
    thresholds: tuple = field(default_factory=lambda: tuple(default_thresholds()))

    def __post_init__(self):
        if not self.combinations:
            raise ValueError("plan needs at least one combination")
        if len(self.thresholds) == 0:
            raise ValueError("plan needs at least one threshold")
        for combo in self.combinations:
            bad = set(combo) - set(FAMILIES)
            if bad or not combo:
                raise ValueError(f"invalid combination {combo!r}")
        if any(t < 0 for t in self.thresholds):
            raise ValueError("thresholds must be >= 0")

    @property
    def families(self) -> tuple:
        used = {f for c in self.combinations for f in c}
        return tuple(f for f in FAMILIES if f in used)

    @classmethod
    def logspace(cls, low=1e-3, high=10.0, num=60, combinations=None) -> "CombinationPlan":
        th = tuple(np.logspace(np.log10(low), np.log10(high), num))
        return cls(combinations or all_combinations(), th)


def combination_tag(combo) -> str:
    return "+".join(combo)


def _dedup_key(sol: SparseSolution) -> tuple:
    supp = sol.support
    if not supp:
        # the null model is the same whichever library produced it
        return ((), (), ())
    keys = sol.meta["keys"]
    coefs = tuple(float(f"{sol.coef[i]:.6g}") for i in supp)
    return (tuple(sol.combination), tuple(keys[i] for i in supp), coefs)


class SolutionPool:
    """Deduplicated collection of sparse solutions with their symbol ledgers."""

    def __init__(self):
        self.solutions: list[SparseSolution] = []
        self.symbols: dict[tuple, SymbolicVector] = {}
        self.groups: dict[tuple, list] = {}
        self._index: dict[tuple, int] = {}

    def __len__(self):
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions)

    def add(self, sol: SparseSolution) -> bool:
        """Insert ``sol``; on a key collision keep the lower-residual entry."""
        key = _dedup_key(sol)
        pos = self._index.get(key)
        if pos is None:
            self._index[key] = len(self.solutions)
            self.solutions.append(sol)
            return True
        if sol.residual < self.solutions[pos].residual:
            self.solutions[pos] = sol
        return False

    def terms(self, sol: SparseSolution) -> list:
        return [sol.meta["keys"][i] for i in sol.support]

    def to_dict(self) -> dict:
        return {
            "solutions": [
                {
                    "combination": list(s.combination),
                    "threshold": s.threshold,
                    "support": [k.name for k in self.terms(s)],
                    "coefficients": [float(s.coef[i]) for i in s.support],
                    "residual": s.residual,
                    "relative_residual": s.relative_residual,
                    "n_terms": s.n_terms,
                    "penalty": s.penalty,
                    "cost": s.cost,
                }
                for s in self.solutions
            ],
            "symbols": {combination_tag(c): v.to_dict() for c, v in self.symbols.items()},
        }

    def dump(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path


def realizability_penalty(solution: SparseSolution, symbols: SymbolicVector | None = None) -> int:
    """Number of unpaired birth/death processes in the solution's support.

    Aggregation and breakage are checked separately; each contributes one
    when its birth appears without its death or the reverse.
    """
    keys = symbols.keys if symbols is not None else solution.meta.get("keys")
    if keys is None:
        raise ValueError("solution columns cannot be resolved to processes")
    processes = set()
    for i in solution.support:
        if i >= len(keys):
            raise ValueError(f"support column {i} has no symbol")
        processes.add(keys[i].process)
    return sum((birth in processes) != (death in processes) for birth, death in PAIRED_PROCESSES)


def residual_term(solution: SparseSolution, mode: str, target_norm2=None, n_rows=None) -> float:
    if mode == "raw":
        return solution.residual
    if mode == "mse":
        n_rows = n_rows if n_rows is not None else solution.meta.get("n_rows")
        if not n_rows:
            raise ValueError("mse residual needs the number of rows")
        return solution.residual / n_rows
    tn2 = solution.target_norm2 if target_norm2 is None else target_norm2
    if tn2 <= 0:
        raise ValueError("target derivative is identically zero")
    return solution.residual / tn2


def score(solution: SparseSolution, ndot=None, weights: SelectWeights | None = None, symbols=None) -> float:
    """Selection cost of ``solution``; also stored on it with the penalty."""
    weights = weights or SelectWeights()
    tn2 = None
    if ndot is not None:
        tn2 = float(np.dot(ndot, ndot))
    pen = realizability_penalty(solution, symbols)
    res = residual_term(solution, weights.residual_mode, tn2, None if ndot is None else len(ndot))
    cost = weights.residual * res + weights.terms * solution.n_terms + weights.penalty * weights.unit_score * pen
    solution.penalty = pen
    solution.cost = float(cost)
    return solution.cost


@dataclass
class CompressedSystem:
    """Triangular reduction of a library and target over a fixed row set."""

    library: Library
    R: np.ndarray
    norms: np.ndarray
    z: np.ndarray
    rho2: float
    target_norm2: float

    @classmethod
    def build(cls, library: Library, ndot) -> "CompressedSystem":
        ndot = np.asarray(ndot, dtype=float)
        if library.shape[0] != ndot.shape[0]:
            raise ValueError("library rows and derivative length differ")
        R, norms, z, rho2 = normalized_r_factor(library.matrix, ndot)
        return cls(library, R, norms, z, rho2, float(ndot @ ndot))

    def design(self, indices) -> np.ndarray:
        """Compressed raw-scale design matrix for the given master columns."""
        idx = list(indices)
        return self.R[:, idx] * self.norms[idx]


def sweep_solutions(
    field: DensityField,
    ndot,
    plan: CombinationPlan | None = None,
    catalog: BasisCatalog | None = None,
    mask: RowMask | None = None,
    rank_tol: float = DEFAULT_RANK_TOL,
    max_iter: int = 20,
    normalize: bool = False,
    library: Library | None = None,
) -> SolutionPool:
    """Run STLS over every combination and threshold of ``plan``.

    Each combination's library is curated on all rows, then restricted to the
    rows in ``mask`` before regression.  Passing a prebuilt master ``library``
    skips column evaluation.
    """
    plan = plan or CombinationPlan()
    ndot = np.asarray(ndot, dtype=float)
    master = library if library is not None else build_library(field, plan.families, catalog)
    if master.shape[0] != ndot.shape[0]:
        raise ValueError("derivative length does not match the library rows")
    full = CompressedSystem.build(master, ndot)
    if mask is None or len(mask.indices) == master.shape[0]:
        fitted = full
    else:
        rows = np.asarray(mask.indices)
        fitted = CompressedSystem.build(master.restrict_rows(rows), ndot[rows])
    index = {k: i for i, k in enumerate(master.keys)}

    pool = SolutionPool()
    for combo in plan.combinations:
        idx = master.family_indices(combo)
        if not idx:
            continue
        sub = master.subset(idx, combination=combo)
        curated, symbols, groups = eliminate_dependent_columns(
            sub, rank_tol, r_factor=(full.R[:, idx], full.norms[idx])
        )
        pool.symbols[combo] = symbols
        pool.groups[combo] = groups
        cols = [index[k] for k in curated.keys]
        A = fitted.design(cols)
        for th in plan.thresholds:
            sol = stls(
                A,
                fitted.z,
                StlsConfig(float(th), max_iter, normalize),
                residual_offset=fitted.rho2,
                target_norm2=fitted.target_norm2,
            )
            sol.combination = combo
            sol.meta["keys"] = curated.keys
            sol.meta["n_rows"] = fitted.library.shape[0]
            pool.add(sol)
        log.debug("combination %s: %d columns curated to %d", combination_tag(combo), len(idx), len(cols))
    return pool


def _tie_key(sol: SparseSolution) -> tuple:
    return (
        float(f"{sol.cost:.12g}"),
        sol.penalty,
        sol.n_terms,
        sol.residual,
        combination_tag(sol.combination),
    )


def select_optimal(pool: SolutionPool, ndot=None, weights: SelectWeights | None = None) -> SparseSolution:
    """Score every pool entry and return the cheapest one.

    Ties go to lower penalty, then fewer terms, then lower residual, then the
    lexicographically first combination tag.
    """
    if len(pool) == 0:
        raise ValueError("empty solution pool")
    weights = weights or SelectWeights()
    for sol in pool:
        score(sol, ndot, weights)
    return min(pool, key=_tie_key)


@dataclass
class Identification:
    """Selected solution together with the pool and the symbol ledger it came from."""

    solution: SparseSolution
    pool: SolutionPool
    weights: SelectWeights

    @property
    def symbols(self) -> SymbolicVector:
        return self.pool.symbols[self.solution.combination]

    @property
    def terms(self) -> list:
        return self.pool.terms(self.solution)


def identify(
    field: DensityField,
    ndot,
    weights: SelectWeights | None = None,
    plan: CombinationPlan | None = None,
    catalog: BasisCatalog | None = None,
    mask: RowMask | None = None,
    **kw,
) -> Identification:
    """Sweep and select in one call."""
    weights = weights or SelectWeights()
    pool = sweep_solutions(field, ndot, plan, catalog, mask, **kw)
    best = select_optimal(pool, None, weights)
    return Identification(best, pool, weights)
