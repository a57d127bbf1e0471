import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.linear_model import LinearRegression

from conftest import cached_case
from pbeid import LibraryTransformer, PBEDiscovery, PBEModel
from pbeid.grid import differentiate
from pbeid.validation import (
    ConfigError,
    as_density_field,
    check_case_ids,
    check_derivative,
    check_fraction,
    check_noise_level,
    check_residual_mode,
    check_savgol,
    check_seed,
    check_thresholds,
    check_weights,
)

# -- validation helpers ---------------------------------------------------------------


def test_valid_inputs_pass_through():
    assert check_fraction("0.5") == 0.5
    assert check_noise_level(0) == 0.0
    assert check_seed(np.int64(3)) == 3
    assert check_weights([1, 2, 0]) == (1.0, 2.0, 0.0)
    assert check_residual_mode("mse") == "mse"
    assert check_derivative("fd4") == "fd4"
    assert check_savgol(11, 3) == (11, 3)
    assert check_thresholds([0.1, 1]).tolist() == [0.1, 1.0]
    assert check_case_ids(["a", "b"], "abc") == ("a", "b")


@pytest.mark.parametrize(
    "fn,arg",
    [
        (check_fraction, 0),
        (check_fraction, 1.01),
        (check_fraction, "half"),
        (check_noise_level, -0.01),
        (check_noise_level, np.inf),
        (check_seed, 1.5),
        (check_seed, True),
        (check_seed, -2),
        (check_weights, (1, 1)),
        (check_weights, (1, -1, 1)),
        (check_weights, (1, np.nan, 1)),
        (check_residual_mode, "l1"),
        (check_derivative, "spline"),
        (check_thresholds, []),
        (check_thresholds, [-1.0]),
    ],
)
def test_invalid_inputs_raise(fn, arg):
    with pytest.raises(ConfigError):
        fn(arg)


@pytest.mark.parametrize("window,order", [(10, 3), (5, 5), (11, -1), (11.0, 3)])
def test_savgol_checks(window, order):
    with pytest.raises(ConfigError):
        check_savgol(window, order)


def test_case_id_checks():
    with pytest.raises(ConfigError):
        check_case_ids(["a", "q"], "abc")
    with pytest.raises(ConfigError):
        check_case_ids(["a", "a"], "abc")


def test_density_field_coercion():
    fld = cached_case("e")[0]
    assert as_density_field(fld) is fld
    again = as_density_field(fld.values, fld.x.points, fld.t.points)
    assert np.array_equal(again.values, fld.values)
    with pytest.raises(ConfigError):
        as_density_field(fld.values)
    with pytest.raises(ConfigError):
        as_density_field(fld.values.ravel(), fld.x.points, fld.t.points)


# -- library transformer ---------------------------------------------------------------


def test_transformer_columns_and_names():
    fld = cached_case("e")[0]
    tr = LibraryTransformer(families=("bkg",)).fit(fld)
    A = tr.transform(fld)
    assert A.shape == (fld.n_rows, tr.n_features_out_)
    assert "B_bkg(1)" in tr.get_feature_names_out()
    assert np.array_equal(tr.fit_transform(fld), A)


def test_transformer_without_curation_keeps_catalog():
    fld = cached_case("e")[0]
    assert LibraryTransformer(curate=False).fit(fld).n_features_out_ == 41


def test_transformer_feeds_linear_regression():
    fld = cached_case("e")[0]
    tr = LibraryTransformer(families=("bkg",)).fit(fld)
    reg = LinearRegression(fit_intercept=False).fit(tr.transform(fld), differentiate(fld))
    assert reg.score(tr.transform(fld), differentiate(fld)) > 0.999


def test_transformer_not_fitted():
    with pytest.raises(NotFittedError):
        LibraryTransformer().transform(cached_case("e")[0])


# -- discovery estimator ----------------------------------------------------------------


def test_params_and_clone():
    est = PBEDiscovery(weights=(1.5, 1, 1), fraction=0.5, seed=3)
    params = est.get_params()
    assert params["weights"] == (1.5, 1, 1)
    assert params["fraction"] == 0.5
    twin = clone(est)
    assert twin.get_params() == params
    assert not hasattr(twin, "model_")
    assert est.set_params(seed=4).seed == 4


def test_fit_predict_score():
    fld = cached_case("e")[0]
    est = PBEDiscovery().fit(fld)
    assert est.model_.text() == "ṅ = 2B_bkg(1) − D_bkg(x)"
    assert est.breakage_.beta.text() == "2/y"
    assert est.predict(fld).shape == (fld.n_rows,)
    assert est.score(fld) > 0.999
    ref = PBEModel.from_terms([("bkg_birth", 0, 0, 2.0), ("bkg_death", 1, 0, -1.0)])
    assert est.coefficient_error(ref).matched


def test_bare_array_input():
    fld = cached_case("e")[0]
    est = PBEDiscovery(x=fld.x.points, t=fld.t.points).fit(fld.values)
    assert est.model_ == PBEDiscovery().fit(fld).model_


def test_explicit_derivative_overrides_estimate():
    fld = cached_case("e")[0]
    y = differentiate(fld)
    assert PBEDiscovery().fit(fld, y).model_ == PBEDiscovery().fit(fld).model_
    with pytest.raises(ConfigError):
        PBEDiscovery().fit(fld, y[:-1])


def test_subsampled_fit_is_seeded():
    fld = cached_case("e")[0]
    a = PBEDiscovery(fraction=0.5, seed=1).fit(fld)
    b = PBEDiscovery(fraction=0.5, seed=1).fit(fld)
    assert np.array_equal(a.solution_.coef, b.solution_.coef)


def test_restricted_search():
    fld = cached_case("e")[0]
    est = PBEDiscovery(combinations=[("agg",)], thresholds=[0.01, 0.1]).fit(fld)
    assert all(k.process.startswith("agg") for k in est.solution_.meta["keys"])


@pytest.mark.parametrize(
    "kw", [{"weights": (1, 1)}, {"residual_mode": "l2"}, {"derivative": "fd3"}, {"fraction": 2.0},
           {"smooth": True, "window": 4}, {"thresholds": []}]
)
def test_bad_parameters_fail_at_fit(kw):
    est = PBEDiscovery(**kw)  # constructor stores parameters unchecked
    with pytest.raises(ConfigError):
        est.fit(cached_case("e")[0])


def test_predict_before_fit():
    with pytest.raises(NotFittedError):
        PBEDiscovery().predict(cached_case("e")[0])
