import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats
from scipy.signal import savgol_coeffs, savgol_filter

from conftest import cached_case
from helpers import make_field
from pbeid.grid import (
    DensityField,
    DensityFileError,
    GridError,
    InternalGrid,
    TemporalGrid,
    add_white_noise,
    differentiate,
    flatten,
    load_density,
    polyfit_derivative,
    save_density,
    smooth_savgol,
    subsample_rows,
    time_derivative,
    unflatten,
)

# -- grids and fields ---------------------------------------------------------------


def test_grid_rejects_nonuniform_and_decreasing():
    with pytest.raises(GridError):
        InternalGrid(np.array([0.1, 0.2, 0.4]))
    with pytest.raises(GridError):
        TemporalGrid(np.array([0.2, 0.1, 0.0]))
    with pytest.raises(GridError):
        InternalGrid(np.array([0.1]))


def test_grid_from_range_counts_endpoints():
    g = InternalGrid.from_range(0.01, 10.01, 0.01)
    assert len(g) == 1001
    assert g.spacing == pytest.approx(0.01)


def test_field_validation():
    x, t = InternalGrid(np.array([0.1, 0.2])), TemporalGrid(np.array([0.0, 1.0]))
    with pytest.raises(GridError):
        DensityField(x, t, np.ones((3, 2)))
    with pytest.raises(GridError):
        DensityField(x, t, np.full((2, 2), np.nan))
    with pytest.raises(GridError):
        DensityField(x, t, -np.ones((2, 2)))
    DensityField(x, t, -np.ones((2, 2)), "noisy")


def test_field_values_are_read_only():
    f = make_field([0.1, 0.2], [0, 1], lambda X, T: X + T)
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


# -- csv io --------------------------------------------------------------------------


def _write(path, text):
    path.write_text(text)
    return path


def test_load_zero_field(tmp_path):
    p = _write(tmp_path / "z.csv", ",0,0.1\n0.1,0,0\n0.2,0,0\n0.3,0,0\n")
    f = load_density(p)
    assert f.shape == (3, 2)
    assert not np.any(f.values)


@pytest.mark.parametrize(
    "text,match",
    [
        (",0,0.1\n0.1,0,0\n0.2,0,0\n0.4,0,0\n", "spacing|uniform"),
        ("x,0,0.1\n0.1,0,0\n", "header"),
        (",0,a\n0.1,0,0\n", "time value"),
        (",0,0.1\n0.1,0,zz\n", "non-numeric"),
        (",0,0.1\n0.1,0\n", "dimension"),
        ("", "empty"),
    ],
)
def test_load_errors_are_distinct(tmp_path, text, match):
    p = _write(tmp_path / "bad.csv", text)
    with pytest.raises((DensityFileError, GridError), match=match):
        load_density(p)


def test_save_load_round_trip(tmp_path):
    f = cached_case("e")[0]
    path = save_density(f, tmp_path / "e.csv")
    g = load_density(path)
    assert g == f
    assert g.provenance == f.provenance


def test_noisy_round_trip_keeps_provenance(tmp_path):
    f = add_white_noise(cached_case("e")[0], 0.01, 3)
    g = load_density(save_density(f, tmp_path / "n.csv"))
    assert g == f
    assert g.provenance == "noisy"


# -- flattening ----------------------------------------------------------------------


def test_flatten_is_time_major():
    m = np.array([[1, 2], [3, 4], [5, 6]])
    assert flatten(m).tolist() == [1, 3, 5, 2, 4, 6]


@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 8)), elements=st.floats(-1e6, 1e6)))
def test_flatten_round_trip(m):
    assert np.array_equal(unflatten(flatten(m), *m.shape), m)


# -- time derivative --------------------------------------------------------------------


def test_derivative_constant_is_zero():
    f = make_field([0.1, 0.2, 0.3], [0, 0.1, 0.2, 0.3], lambda X, T: 0 * X + 2.0)
    assert not np.any(time_derivative(f))


@pytest.mark.parametrize("order", [2, 4])
def test_derivative_exact_on_linear(order):
    x = np.linspace(0.1, 1.0, 10)
    f = make_field(x, np.linspace(0, 1, 6), lambda X, T: X * T)
    d = unflatten(time_derivative(f, order), 10, 6)
    assert np.allclose(d, x[:, None], rtol=1e-12, atol=1e-12)


def test_derivative_exponential_interior():
    x = np.linspace(0.5, 1.5, 101)
    t = np.round(np.arange(0, 101) * 0.01, 12)
    f = make_field(x, t, lambda X, T: np.exp(-T) * np.exp(-X))
    d = unflatten(time_derivative(f), len(x), len(t))
    i, m = np.argmin(abs(x - 1.0)), np.argmin(abs(t - 0.5))
    assert abs(d[i, m] + np.exp(-1.5)) < 1e-5


def test_derivative_rejects_short_records():
    f = make_field([0.1, 0.2], [0, 1], lambda X, T: X)
    with pytest.raises(GridError):
        time_derivative(f)
    with pytest.raises(ValueError):
        differentiate(f, "spline")


def test_fd4_is_fourth_order():
    x = np.array([1.0, 2.0])
    errs = []
    for dt in (0.1, 0.05):
        t = np.arange(0, int(round(1 / dt)) + 1) * dt
        f = make_field(x, t, lambda X, T: np.sin(3 * T) + X)
        d = unflatten(time_derivative(f, 4), 2, len(t))
        errs.append(np.max(abs(d - 3 * np.cos(3 * t))))
    assert errs[0] / errs[1] > 12


@settings(max_examples=50)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**31))
def test_derivative_is_linear(alpha, beta, seed):
    rng = np.random.default_rng(seed)
    x, t = np.linspace(0.1, 1, 7), np.linspace(0, 1, 9)
    A = make_field(x, t, lambda X, T: rng.standard_normal(X.shape), "noisy")
    B = make_field(x, t, lambda X, T: rng.standard_normal(X.shape), "noisy")
    C = A.with_values(alpha * A.values + beta * B.values)
    lhs = time_derivative(C)
    rhs = alpha * time_derivative(A) + beta * time_derivative(B)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-9)


# -- noise -------------------------------------------------------------------------------


def test_zero_noise_is_identity():
    f = cached_case("a")[0]
    assert add_white_noise(f, 0.0, 1) is f


def test_noise_is_deterministic_and_leaves_input():
    f = cached_case("a")[0]
    before = f.values.copy()
    a = add_white_noise(f, 0.01, 7)
    b = add_white_noise(f, 0.01, 7)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, add_white_noise(f, 0.01, 8).values)
    assert np.array_equal(f.values, before)
    assert a.provenance == "noisy"


def test_noise_statistics():
    f = cached_case("a")[0]
    assert f.values.size >= 10_000
    eps = add_white_noise(f, 0.01, 11).values - f.values
    assert np.std(eps) == pytest.approx(0.01 * np.std(f.values), rel=0.05)


def test_noise_rejects_bad_arguments():
    f = cached_case("a")[0]
    with pytest.raises(ValueError):
        add_white_noise(f, -0.1, 0)
    with pytest.raises(ValueError):
        add_white_noise(f, 0.1, 0, mode="pink")


def test_multiplicative_noise_scales_with_density():
    f = cached_case("e")[0]
    g = add_white_noise(f, 0.01, 0, mode="multiplicative")
    assert np.all(np.abs(g.values - f.values) <= 0.1 * f.values + 1e-300)


# -- smoothing and polynomial derivatives ------------------------------------------------


def test_savgol_reproduces_cubics():
    x = np.linspace(0.1, 2, 40)
    f = make_field(x, [0, 1], lambda X, T: 1 - X + 2 * X**2 - 0.5 * X**3 + T)
    s = smooth_savgol(f, 11, 3)
    assert np.allclose(s.values, f.values, rtol=1e-10, atol=1e-10)
    assert s.provenance == "smoothed"


def test_savgol_improves_noisy_exponential():
    x = 0.01 + 0.01 * np.arange(500)
    clean = make_field(x, [0, 1], lambda X, T: np.exp(-X))
    noisy = add_white_noise(clean, 0.01, 5)
    smooth = smooth_savgol(noisy, 11, 3)
    rms = lambda f: np.sqrt(np.mean((f.values - clean.values) ** 2))  # noqa: E731
    assert rms(smooth) < rms(noisy)


@settings(max_examples=25)
@given(st.sampled_from([(5, 2), (7, 3), (11, 3), (15, 4)]), st.integers(0, 1000))
def test_savgol_reduces_variance(wp, seed):
    x = np.linspace(0.1, 5, 200)
    f = add_white_noise(make_field(x, [0, 1], lambda X, T: 0 * X + 1.0), 0.5, seed, "multiplicative")
    assert np.var(smooth_savgol(f, *wp).values) < np.var(f.values)


def test_savgol_rejects_bad_windows():
    f = make_field(np.linspace(0.1, 1, 10), [0, 1], lambda X, T: X)
    for window, order in [(4, 2), (3, 3), (11, 3)]:
        with pytest.raises(ValueError):
            smooth_savgol(f, window, order)


def test_polyfit_exact_on_linear_and_cubic():
    x = np.array([0.5, 1.0])
    t = np.linspace(0, 2, 21)
    f = make_field(x, t, lambda X, T: X * T**3 - T + 4)
    d = unflatten(polyfit_derivative(f, 3, 5), 2, 21)
    assert np.allclose(d, x[:, None] * 3 * t**2 - 1, rtol=1e-10, atol=1e-10)


def test_polyfit_beats_central_differences_on_noise():
    x = np.linspace(0.1, 3, 60)
    t = np.linspace(0, 2, 81)
    clean = make_field(x, t, lambda X, T: np.exp(-T) * np.exp(-X))
    noisy = add_white_noise(clean, 0.005, 2)
    exact = flatten(-clean.values)
    err_fd = np.sqrt(np.mean((time_derivative(noisy) - exact) ** 2))
    err_pf = np.sqrt(np.mean((polyfit_derivative(noisy, 3, 5) - exact) ** 2))
    assert err_pf < err_fd


def test_polyfit_noise_floor():
    x = np.linspace(0.1, 3, 30)
    t = np.linspace(0, 2, 41)
    f = add_white_noise(make_field(x, t, lambda X, T: 0 * X + 1.0), 0.5, 4, "multiplicative")
    d = polyfit_derivative(f, 3, 5)
    resid = f.values - savgol_filter(f.values, 11, 3, axis=1, mode="interp")
    gain = np.linalg.norm(savgol_coeffs(11, 3, deriv=1, delta=t[1] - t[0]))
    assert np.sqrt(np.mean(d**2)) <= 3 * np.std(resid) * gain


def test_polyfit_rejects_short_records():
    f = make_field([0.1, 0.2], np.linspace(0, 1, 5), lambda X, T: X)
    with pytest.raises(GridError):
        polyfit_derivative(f, 3, 5)
    with pytest.raises(ValueError):
        polyfit_derivative(f, 3, 1)


# -- subsampling -------------------------------------------------------------------------


def test_subsample_full_and_cardinality():
    assert np.array_equal(subsample_rows(50, 1.0, 0).indices, np.arange(50))
    m = subsample_rows(100, 0.2, 3)
    assert len(m) == 20
    assert len(np.unique(m.indices)) == 20
    assert np.all(np.diff(m.indices) > 0)
    for bad in (0.0, 1.5, -0.2):
        with pytest.raises(ValueError):
            subsample_rows(100, bad, 0)


def test_subsample_is_uniform():
    p, draws = 10_000, 100
    masks = [subsample_rows(p, 0.2, s) for s in range(draws)]
    assert not np.array_equal(masks[0].indices, masks[1].indices)
    counts = np.zeros(p)
    for m in masks:
        counts[m.indices] += 1
    # pool rows into 100 bins so expected counts are large
    binned = counts.reshape(100, -1).sum(axis=1)
    _, pvalue = stats.chisquare(binned)
    assert pvalue > 0.01


def test_subsample_is_deterministic():
    assert np.array_equal(subsample_rows(1000, 0.4, 9).indices, subsample_rows(1000, 0.4, 9).indices)
