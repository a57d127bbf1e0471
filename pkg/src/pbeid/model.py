"""Turning selected sparse solutions into readable population balance models."""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import DensityField, flatten
from .kernels import KernelExpression
from .library import Equivalence, SymbolicVector, TermKey
from .operators import PROCESS_SYMBOL, BasisFunction, operator_matrix
from .stls import SparseSolution

CANCEL_FRACTION = 0.1

PROCESS_ORDER = ("growth", "bkg_birth", "bkg_death", "agg_birth", "agg_death")

_KERNEL_ROLE = {
    "growth": "growth",
    "bkg_birth": "breakage_birth",
    "bkg_death": "breakage_rate",
    "agg_birth": "generic",
    "agg_death": "aggregation",
}


class UnresolvedTermError(ValueError):
    """A support column has no entry in the symbol ledger."""


@dataclass(frozen=True)
class ModelTerm:
    """Signed coefficient times one operator column, with recorded OR forms."""

    key: TermKey
    coef: float
    alternates: tuple = ()

    @property
    def sort_key(self) -> tuple:
        return (PROCESS_ORDER.index(self.key.process), self.key.a, self.key.b)


@dataclass(frozen=True)
class PBEModel:
    """Sum of operator terms; an empty term list is the null model."""

    terms: tuple = ()
    provenance: dict = field(default_factory=dict)
    notes: tuple = ()

    def __post_init__(self):
        keys = [t.key for t in self.terms]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate terms in model")

    @property
    def is_null(self) -> bool:
        return not self.terms

    @property
    def term_set(self) -> frozenset:
        return frozenset((t.key.process, t.key.a, t.key.b) for t in self.terms)

    @property
    def processes(self) -> set:
        return {t.key.process for t in self.terms}

    @property
    def realizable(self) -> bool:
        p = self.processes
        return ("agg_birth" in p) == ("agg_death" in p) and ("bkg_birth" in p) == ("bkg_death" in p)

    def coefficient(self, process, a=0, b=0) -> float:
        for t in self.terms:
            if (t.key.process, t.key.a, t.key.b) == (process, a, b):
                return t.coef
        return 0.0

    def canonical(self) -> "PBEModel":
        return replace(self, terms=tuple(sorted(self.terms, key=lambda t: t.sort_key)))

    def kernels(self) -> dict:
        """Signed kernel per process, e.g. ``agg_death -> -x - y``."""
        out = {}
        for t in self.terms:
            k = KernelExpression.monomial(t.key.a, t.key.b, t.coef)
            out[t.key.process] = out[t.key.process] + k if t.key.process in out else k
        return {p: KernelExpression(out[p].terms, _KERNEL_ROLE[p]) for p in PROCESS_ORDER if p in out}

    def predict(self, field: DensityField) -> np.ndarray:
        """Evaluate the right-hand side on ``field`` (flattened, column-major)."""
        total = np.zeros(field.n_rows)
        for t in self.terms:
            total += t.coef * flatten(operator_matrix(t.key.process, field, BasisFunction(t.key.a, t.key.b)))
        return total

    def text(self, mode: str = "coefficient", digits: int = 3, pretty: bool = True) -> str:
        """One-line rendering such as ``ṅ = B_agg(x) − D_agg(x + y)``.

        ``mode='coefficient'`` writes single-monomial factors in front of the
        operator (``2B_bkg(y)``); ``mode='kernel'`` folds them into the
        kernel (``B_bkg(2y)``).
        """
        if mode not in ("coefficient", "kernel"):
            raise ValueError("mode must be 'coefficient' or 'kernel'")
        lhs = "ṅ" if pretty else "dn/dt"
        minus = "−" if pretty else "-"
        if self.is_null:
            return f"{lhs} = 0"
        pieces = []
        for proc, kern in self.kernels().items():
            rounded = KernelExpression({k: float(f"{v:.{digits}g}") for k, v in kern.terms.items()})
            if rounded.is_zero:
                continue
            coefs = list(rounded.terms.values())
            sign = -1.0 if all(c < 0 for c in coefs) else 1.0
            body = rounded.scale(sign)
            factor = ""
            if mode == "coefficient" and len(body.terms) == 1:
                ((a, b), c), = body.terms.items()
                if c > 0 and not np.isclose(c, 1.0):
                    factor = f"{c:.{digits}g}"
                    body = KernelExpression.monomial(a, b)
            inner = body.text(pretty=pretty, digits=digits)
            if pretty:
                inner = inner.replace("-", "−")
            pieces.append((sign, f"{factor}{PROCESS_SYMBOL[proc]}({inner})"))
        if not pieces:
            return f"{lhs} = 0"
        out = (f"{minus}" if pieces[0][0] < 0 else "") + pieces[0][1]
        for sign, piece in pieces[1:]:
            out += f" {minus if sign < 0 else '+'} {piece}"
        return f"{lhs} = {out}"

    def __str__(self):
        return self.text()

    def to_dict(self) -> dict:
        bd = deduce_breakage_stoichiometry(self)
        return {
            "text": self.text(),
            "text_kernel_form": self.text(mode="kernel"),
            "null": self.is_null,
            "realizable": self.realizable,
            "terms": [
                {
                    "term": t.key.name,
                    "process": t.key.process,
                    "a": t.key.a,
                    "b": t.key.b,
                    "coefficient": t.coef,
                    "alternates": [
                        {"term": e.key.name, "scale": e.scale, "exact": e.exact} for e in t.alternates
                    ],
                }
                for t in self.canonical().terms
            ],
            "kernels": {p: k.to_dict() for p, k in self.kernels().items()},
            "breakage": bd.to_dict() if bd is not None else None,
            "notes": list(self.notes),
            "provenance": self.provenance,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_terms(cls, spec, **kw) -> "PBEModel":
        """Build from ``(process, a, b, coefficient)`` tuples."""
        return cls(tuple(ModelTerm(TermKey(p, int(a), int(b)), float(c)) for p, a, b, c in spec), **kw)


def formulate_pbe(solution: SparseSolution, symbols: SymbolicVector | None = None, provenance=None) -> PBEModel:
    """One model term per active column, carrying its OR alternates."""
    keys = symbols.keys if symbols is not None else solution.meta.get("keys")
    if keys is None:
        raise UnresolvedTermError("solution columns have no symbols")
    terms = []
    for i in solution.support:
        if i >= len(keys):
            raise UnresolvedTermError(f"support column {i} has no symbol")
        alts = tuple(symbols[i].alternates) if symbols is not None else ()
        terms.append(ModelTerm(keys[i], float(solution.coef[i]), alts))
    prov = {"combination": list(solution.combination), "threshold": solution.threshold}
    prov.update(provenance or {})
    return PBEModel(tuple(terms), prov).canonical()


def _birth_options(term: ModelTerm):
    yield term.key, term.coef, False
    for eq in term.alternates:
        if eq.key.process == term.key.process:
            yield eq.key, term.coef * eq.scale, True


def resolve_dependent_terms(model: PBEModel) -> PBEModel:
    """Pick aggregation birth forms consistent with the identified death kernel.

    The death term fixes ``Q(x, y)``; the matching birth kernel is
    ``Q(x - y, y)``.  Among the recorded OR forms of each birth term the
    combination whose monomials equal those of ``Q(x - y, y)`` is chosen.
    Without a death kernel, or when no combination fits, the model is returned
    unchanged with a note.
    """
    births = [t for t in model.terms if t.key.process == "agg_birth"]
    if not births or not any(t.alternates for t in births):
        return model
    kern = model.kernels()
    death = kern.get("agg_death")
    if death is None:
        return replace(model, notes=model.notes + ("birth alternates kept: no aggregation death to compare",))
    target = death.scale(-1.0).shift_x()
    if target is None:
        return replace(model, notes=model.notes + ("birth alternates kept: death kernel not shiftable",))
    # identified coefficients are inexact, so cancellations leave small remainders
    top = max(abs(v) for v in target.terms.values()) if target.terms else 0.0
    wanted = {k for k, v in target.terms.items() if abs(v) > CANCEL_FRACTION * top}
    best = None
    for choice in itertools.product(*[list(_birth_options(t)) for t in births]):
        keys = [c[0] for c in choice]
        if len(set(keys)) != len(keys):
            continue
        if {(k.a, k.b) for k in keys} == wanted:
            swaps = sum(c[2] for c in choice)
            if best is None or swaps < best[0]:
                best = (swaps, choice)
    if best is None:
        return replace(model, notes=model.notes + ("birth alternates kept: no form matches Q(x - y, y)",))
    others = [t for t in model.terms if t.key.process != "agg_birth"]
    new_births = []
    for term, (key, coef, swapped) in zip(births, best[1]):
        if swapped:
            back = [Equivalence(term.key, term.coef / coef, False)]
            rest = [e for e in term.alternates if e.key != key]
            new_births.append(ModelTerm(key, coef, tuple(back + rest)))
        else:
            new_births.append(term)
    return replace(model, terms=tuple(others + new_births)).canonical()


@dataclass(frozen=True)
class BreakageDeduction:
    """Daughter distribution implied by identified breakage birth and death."""

    rate: KernelExpression
    birth_kernel: KernelExpression
    beta: KernelExpression | None
    daughters: KernelExpression | None
    note: str = ""

    @property
    def daughter_count(self) -> float | None:
        """Mean number of daughters when it does not depend on parent size."""
        if self.daughters is None or set(self.daughters.terms) - {(0, 0)}:
            return None
        return self.daughters.terms.get((0, 0), 0.0)

    def mass_consistent(self, rtol=1e-6) -> bool | None:
        """Whether ``int_0^y x beta(x, y) dx == y``."""
        if self.beta is None:
            return None
        m = self.beta.multiply_monomial(1, 0).integrate_x()
        return m is not None and m.isclose(KernelExpression.monomial(0, 1), rtol=rtol)

    def to_dict(self) -> dict:
        return {
            "rate": self.rate.text(),
            "birth_kernel": self.birth_kernel.text(),
            "beta": None if self.beta is None else self.beta.text(),
            "daughters": None if self.daughters is None else self.daughters.text(),
            "note": self.note,
        }


def deduce_breakage_stoichiometry(model: PBEModel) -> BreakageDeduction | None:
    """``beta(x, y) = b(y) / Gamma(y)`` and the daughter count ``int_0^y beta dx``.

    Returns ``None`` when the model has no breakage birth term.  A zero or
    missing breakage rate alongside a birth term is reported in ``note``.
    """
    kern = model.kernels()
    birth = kern.get("bkg_birth")
    if birth is None:
        return None
    birth = KernelExpression(birth.terms)
    death = kern.get("bkg_death")
    if death is None or death.is_zero:
        return BreakageDeduction(KernelExpression(), birth, None, None, "breakage birth without a breakage rate")
    rate = death.scale(-1.0).with_role("breakage_rate")
    rate_y = KernelExpression(rate.terms).in_variable("y")
    beta = birth.divide_monomial(rate_y)
    if beta is None:
        return BreakageDeduction(rate, birth, None, None,
                                 f"beta is the rational function ({birth.text()}) / ({rate_y.text()})")
    daughters = beta.integrate_x()
    return BreakageDeduction(rate, birth, beta, daughters)


@dataclass(frozen=True)
class CoefficientComparison:
    matched: bool
    error: float | None
    missing: tuple = ()
    extra: tuple = ()
    per_term: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "matched": self.matched,
            "error_percent": self.error,
            "missing": [TermKey(*k).name for k in self.missing],
            "extra": [TermKey(*k).name for k in self.extra],
            "per_term_percent": {TermKey(*k).name: v for k, v in self.per_term.items()},
        }


def _swap_to_reference(model: PBEModel, reference: PBEModel) -> PBEModel:
    ref = reference.term_set
    terms = []
    for t in model.terms:
        key = (t.key.process, t.key.a, t.key.b)
        if key not in ref:
            for eq in t.alternates:
                alt = (eq.key.process, eq.key.a, eq.key.b)
                if alt in ref and alt not in model.term_set:
                    t = ModelTerm(eq.key, t.coef * eq.scale, ())
                    break
        terms.append(t)
    try:
        return replace(model, terms=tuple(terms))
    except ValueError:
        return model


def coefficient_error(model: PBEModel, reference: PBEModel, use_alternates: bool = True) -> CoefficientComparison:
    """Term-set match and mean relative coefficient error in percent.

    With ``use_alternates`` a term whose recorded OR form is in the reference
    is compared in that form.  Reference terms with a zero coefficient are left
    out of the mean.
    """
    if use_alternates:
        model = _swap_to_reference(model, reference)
    got, want = model.term_set, reference.term_set
    missing = tuple(sorted(want - got))
    extra = tuple(sorted(got - want))
    if missing or extra:
        return CoefficientComparison(False, None, missing, extra)
    per = {}
    for key in sorted(want):
        true = reference.coefficient(*key)
        if true == 0:
            warnings.warn(f"reference coefficient of {TermKey(*key).name} is zero; skipped", RuntimeWarning)
            continue
        per[key] = 100.0 * abs(model.coefficient(*key) - true) / abs(true)
    err = float(np.mean(list(per.values()))) if per else None
    return CoefficientComparison(True, err, (), (), per)
