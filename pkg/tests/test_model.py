import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cached_case
from pbeid.grid import time_derivative
from pbeid.kernels import KernelExpression
from pbeid.library import Equivalence, SymbolEntry, SymbolicVector, TermKey, build_library
from pbeid.model import (
    ModelTerm,
    PBEModel,
    UnresolvedTermError,
    coefficient_error,
    deduce_breakage_stoichiometry,
    formulate_pbe,
    resolve_dependent_terms,
)
from pbeid.selector import SelectWeights, identify
from pbeid.solver import CASES
from pbeid.stls import SparseSolution

B_AGG_X = TermKey("agg_birth", 1, 0)
B_AGG_Y = TermKey("agg_birth", 0, 1)
D_AGG_X = TermKey("agg_death", 1, 0)
D_AGG_Y = TermKey("agg_death", 0, 1)


def _solution(keys, coefs):
    sol = SparseSolution(np.array(coefs, dtype=float), combination=("agg",))
    sol.meta["keys"] = keys
    return sol


# -- kernels ------------------------------------------------------------------------


def test_kernel_evaluation_and_text():
    q = KernelExpression({(1, 0): 1.0, (0, 1): 1.0})
    assert q(2.0, 3.0) == 5.0
    assert q.text() == "x + y"
    assert q.is_symmetric()
    assert KernelExpression({(1, 1): 1.0, (0, 2): -1.0}).text() == "xy - y²"
    assert KernelExpression({(0, -2): 3.0}).text(pretty=False) == "3/y^2"


def test_kernel_role_checks():
    with pytest.raises(ValueError):
        KernelExpression({(0, 1): 1.0}, "breakage_rate")
    with pytest.raises(ValueError):
        KernelExpression({(1, 0): 1.0}, "breakage_birth")
    with pytest.raises(ValueError):
        KernelExpression({(0, 0): np.inf})
    with pytest.raises(ValueError):
        KernelExpression(role="nucleation")


def test_shift_of_sum_and_product_kernels():
    # Q(x - y, y)
    assert KernelExpression({(1, 0): 1.0, (0, 1): 1.0}).shift_x().terms == {(1, 0): 1.0}
    assert KernelExpression({(1, 1): 1.0}).shift_x().terms == {(0, 2): -1.0, (1, 1): 1.0}
    assert KernelExpression({(-1, 0): 1.0}).shift_x() is None


def test_kernel_round_trip():
    k = KernelExpression({(2, 1): -0.5, (0, 0): 3.0}, "aggregation")
    assert KernelExpression.from_dict(k.to_dict()) == k


# -- formulation ----------------------------------------------------------------------


def test_formulate_constant_aggregation():
    keys = [TermKey("agg_birth", 0, 0), TermKey("agg_death", 0, 0)]
    model = formulate_pbe(_solution(keys, [1.0, -1.0]))
    assert model.text() == "ṅ = B_agg(1) − D_agg(1)"
    assert model.realizable


def test_formulate_merges_death_kernel():
    model = formulate_pbe(_solution([B_AGG_X, D_AGG_X, D_AGG_Y], [1.0, -1.0, -1.0]))
    assert model.kernels()["agg_death"].terms == {(0, 1): -1.0, (1, 0): -1.0}
    assert model.text() == "ṅ = B_agg(x) − D_agg(x + y)"


def test_formulate_empty_support_is_null():
    model = formulate_pbe(_solution([B_AGG_X], [0.0]))
    assert model.is_null
    assert model.text() == "ṅ = 0"


def test_formulate_rejects_unresolvable_columns():
    sol = SparseSolution(np.array([0.0, 1.0]))
    with pytest.raises(UnresolvedTermError):
        formulate_pbe(sol)
    with pytest.raises(UnresolvedTermError):
        formulate_pbe(sol, SymbolicVector([SymbolEntry(B_AGG_X)]))


def test_formulation_reproduces_regression_prediction():
    fld = cached_case("e")[0]
    result = identify(fld, time_derivative(fld), SelectWeights())
    model = formulate_pbe(result.solution, result.symbols)
    lib = build_library(fld)
    cols = [lib.index(k) for k in result.terms]
    direct = lib.matrix[:, cols] @ result.solution.coef[list(result.solution.support)]
    assert np.allclose(model.predict(fld), direct, rtol=1e-12, atol=1e-12 * np.abs(direct).max())


def test_rendering_modes():
    m = PBEModel.from_terms([("bkg_birth", 0, 1, 2), ("bkg_death", 2, 0, -1), ("agg_birth", 0, 0, 1),
                             ("agg_death", 0, 0, -1)])
    assert m.text() == "ṅ = 2B_bkg(y) − D_bkg(x²) + B_agg(1) − D_agg(1)"
    assert m.text(mode="kernel") == "ṅ = B_bkg(2y) − D_bkg(x²) + B_agg(1) − D_agg(1)"
    assert m.text(pretty=False).startswith("dn/dt = 2B_bkg(y) - ")
    data = json.loads(m.to_json())
    assert data["breakage"]["beta"] == "2/y"
    with pytest.raises(ValueError):
        m.text(mode="latex")


def test_duplicate_terms_rejected():
    with pytest.raises(ValueError):
        PBEModel((ModelTerm(B_AGG_X, 1.0), ModelTerm(B_AGG_X, 2.0)))


# -- dependent-term resolution --------------------------------------------------------


def _sum_agg_identified(coef_y=2.0):
    alt = (Equivalence(B_AGG_X, 0.5, False),)
    return PBEModel((ModelTerm(B_AGG_Y, coef_y, alt), ModelTerm(D_AGG_X, -1.0), ModelTerm(D_AGG_Y, -1.0)))


def test_resolves_birth_to_death_consistent_form():
    resolved = resolve_dependent_terms(_sum_agg_identified())
    assert resolved.coefficient("agg_birth", 1, 0) == pytest.approx(1.0)
    assert resolved.coefficient("agg_birth", 0, 1) == 0.0
    (term,) = [t for t in resolved.terms if t.key.process == "agg_birth"]
    assert term.alternates[0].key == B_AGG_Y
    assert term.alternates[0].scale == pytest.approx(2.0)


def test_resolution_keeps_predictions():
    fld = cached_case("b")[0]
    model = _sum_agg_identified(2.0)
    resolved = resolve_dependent_terms(model)
    a, b = model.predict(fld), resolved.predict(fld)
    assert np.linalg.norm(a - b) <= 0.01 * np.linalg.norm(a)


def test_no_alternates_leaves_model_unchanged():
    model = PBEModel.from_terms([("agg_birth", 0, 0, 1), ("agg_death", 0, 0, -1)])
    assert resolve_dependent_terms(model) is model


def test_no_death_term_keeps_alternates_with_note():
    model = PBEModel((ModelTerm(B_AGG_Y, 2.0, (Equivalence(B_AGG_X, 0.5),)),))
    resolved = resolve_dependent_terms(model)
    assert resolved.terms == model.terms
    assert resolved.notes


def test_sum_aggregation_pipeline_resolves_to_x():
    fld = cached_case("b")[0]
    result = identify(fld, time_derivative(fld), SelectWeights.from_sequence(CASES["b"].weights))
    resolved = resolve_dependent_terms(formulate_pbe(result.solution, result.symbols))
    assert resolved.term_set == {("agg_birth", 1, 0), ("agg_death", 1, 0), ("agg_death", 0, 1)}


# -- breakage stoichiometry ------------------------------------------------------------


@pytest.mark.parametrize(
    "birth,death",
    [((0, 0, 2.0), (1, 0, -1.0)), ((0, 1, 2.0), (2, 0, -1.0))],
)
def test_binary_breakage_deduction(birth, death):
    model = PBEModel.from_terms([("bkg_birth", *birth), ("bkg_death", *death)])
    bd = deduce_breakage_stoichiometry(model)
    assert bd.beta.terms == {(0, -1): 2.0}
    assert bd.daughter_count == 2.0
    assert bd.mass_consistent()


def test_no_breakage_is_noop():
    assert deduce_breakage_stoichiometry(PBEModel.from_terms([("growth", 0, 0, -1)])) is None


def test_zero_rate_is_flagged():
    bd = deduce_breakage_stoichiometry(PBEModel.from_terms([("bkg_birth", 0, 0, 2.0)]))
    assert bd.beta is None
    assert "rate" in bd.note


def test_polynomial_rate_gives_rational_note():
    model = PBEModel.from_terms([("bkg_birth", 0, 0, 2.0), ("bkg_death", 1, 0, -1.0), ("bkg_death", 2, 0, -1.0)])
    bd = deduce_breakage_stoichiometry(model)
    assert bd.beta is None
    assert "rational" in bd.note


# -- coefficient error ------------------------------------------------------------------


REF = PBEModel.from_terms([("agg_birth", 0, 1, 2.0), ("agg_death", 1, 0, -1.0), ("agg_death", 0, 1, -1.0)])


def test_identical_models_have_zero_error():
    comp = coefficient_error(REF, REF)
    assert comp.matched and comp.error == 0.0


def test_five_percent_error():
    got = PBEModel.from_terms([("agg_birth", 0, 1, 2.1), ("agg_death", 1, 0, -0.95), ("agg_death", 0, 1, -1.05)])
    assert coefficient_error(got, REF).error == pytest.approx(5.0)


def test_mismatch_reports_diff():
    got = PBEModel.from_terms([("agg_death", 0, 1, -1.3)])
    comp = coefficient_error(got, REF)
    assert not comp.matched
    assert comp.error is None
    assert ("agg_birth", 0, 1) in comp.missing
    assert comp.to_dict()["missing"] == ["B_agg(y)", "D_agg(x)"]


def test_alternate_form_counts_as_match():
    ref = PBEModel.from_terms([("agg_birth", 1, 0, 1.0), ("agg_death", 1, 0, -1.0), ("agg_death", 0, 1, -1.0)])
    comp = coefficient_error(_sum_agg_identified(2.02), ref)
    assert comp.matched
    assert comp.error == pytest.approx(100 * 0.01 / 3)
    assert not coefficient_error(_sum_agg_identified(), ref, use_alternates=False).matched


def test_zero_reference_coefficient_warns():
    ref = PBEModel.from_terms([("growth", 0, 0, 0.0), ("growth", 1, 0, -1.0)])
    with pytest.warns(RuntimeWarning):
        comp = coefficient_error(ref, ref)
    assert comp.error == 0.0


def test_constant_aggregation_clean_error():
    fld = cached_case("a")[0]
    result = identify(fld, time_derivative(fld), SelectWeights())
    model = formulate_pbe(result.solution, result.symbols)
    ref = PBEModel.from_terms([("agg_birth", 0, 0, 1.0), ("agg_death", 0, 0, -1.0)])
    comp = coefficient_error(model, ref)
    assert comp.matched
    assert comp.error < 0.36


# -- canonical form -----------------------------------------------------------------------


terms_st = st.lists(
    st.tuples(
        st.sampled_from(["growth", "bkg_birth", "bkg_death", "agg_birth", "agg_death"]),
        st.integers(-3, 3),
        st.integers(0, 3),
        st.floats(-5, 5).filter(lambda v: v != 0),
    ),
    max_size=8,
    unique_by=lambda t: t[:3],
)


@settings(max_examples=100)
@given(terms_st)
def test_canonical_is_idempotent(spec):
    spec = [(p, a, 0 if p in ("growth", "bkg_death") else b, c) for p, a, b, c in spec]
    spec = [(p, 0 if p == "bkg_birth" else a, b, c) for p, a, b, c in spec]
    if len({s[:3] for s in spec}) != len(spec):
        return
    m = PBEModel.from_terms(spec).canonical()
    assert m.canonical() == m
    assert m.text() == PBEModel.from_terms(list(reversed(spec))).canonical().text()
