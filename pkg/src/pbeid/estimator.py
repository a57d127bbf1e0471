"""Scikit-learn style front ends: a library transformer and the discovery estimator."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .grid import differentiate, smooth_savgol, subsample_rows
from .library import DEFAULT_RANK_TOL, FAMILIES, build_library, eliminate_dependent_columns
from .model import coefficient_error, deduce_breakage_stoichiometry, formulate_pbe, resolve_dependent_terms
from .selector import CombinationPlan, SelectWeights, all_combinations, identify
from .validation import (
    ConfigError,
    as_density_field,
    check_derivative,
    check_fraction,
    check_residual_mode,
    check_savgol,
    check_thresholds,
    check_weights,
)


class LibraryTransformer(TransformerMixin, BaseEstimator):
    """Evaluate the candidate operator columns on a density field.

    Parameters
    ----------
    families : tuple of str, default=('agg', 'bkg', 'growth')
    catalog : BasisCatalog, optional
        Defaults to the 41-column catalog.
    curate : bool, default=True
        Drop linearly dependent columns after evaluation.
    rank_tol : float

    Attributes
    ----------
    library_ : Library
        Library evaluated during ``fit``.
    symbols_ : SymbolicVector or None
    feature_names_out_ : ndarray of str
    """

    def __init__(self, families=FAMILIES, catalog=None, curate=True, rank_tol=DEFAULT_RANK_TOL, x=None, t=None):
        self.families = families
        self.catalog = catalog
        self.curate = curate
        self.rank_tol = rank_tol
        self.x = x
        self.t = t

    def _evaluate(self, X):
        field = as_density_field(X, self.x, self.t)
        return build_library(field, tuple(self.families), self.catalog)

    def fit(self, X, y=None):
        lib = self._evaluate(X)
        self.symbols_ = None
        if self.curate:
            lib, self.symbols_, self.groups_ = eliminate_dependent_columns(lib, self.rank_tol)
        self.library_ = lib
        self.keys_ = tuple(lib.keys)
        self.feature_names_out_ = np.array(lib.names, dtype=object)
        self.n_features_out_ = len(self.keys_)
        return self

    def transform(self, X):
        check_is_fitted(self, "keys_")
        lib = self._evaluate(X)
        idx = [lib.index(k) for k in self.keys_]
        return lib.matrix[:, idx]

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "keys_")
        return self.feature_names_out_.copy()


class PBEDiscovery(RegressorMixin, BaseEstimator):
    """Identify a population balance equation from transient density data.

    ``fit`` takes a :class:`~pbeid.grid.DensityField` (or a ``(j, k)`` array
    together with ``x`` and ``t``); ``predict`` returns the identified right
    hand side flattened in the same order as the time derivative.

    Parameters
    ----------
    weights : tuple of float, default=(1, 1, 1)
        Residual, term-count and realizability weights.
    residual_mode : {'raw', 'relative', 'mse'}, default='raw'
    thresholds : array-like, optional
        Sparsity grid; defaults to 60 log-spaced values in ``[1e-3, 10]``.
    combinations : tuple of tuples, optional
        Library family combinations; defaults to all seven.
    derivative : {'fd2', 'fd4', 'polyfit'}, default='fd2'
    smooth : bool, default=False
        Savitzky-Golay smoothing along the size axis before differentiation.
    window, polyorder : int
        Savitzky-Golay parameters.
    fraction : float, default=1.0
        Fraction of rows used for regression.
    seed : int, default=0
        Row-subsampling seed.
    catalog : BasisCatalog, optional
    max_iter : int, default=20
    rank_tol : float
    x, t : array-like, optional
        Grids for bare-array input.

    Attributes
    ----------
    model_ : PBEModel
        Resolved model.
    raw_model_ : PBEModel
        Model before dependent-term resolution.
    solution_ : SparseSolution
    pool_ : SolutionPool
    breakage_ : BreakageDeduction or None
    """

    def __init__(
        self,
        weights=(1.0, 1.0, 1.0),
        residual_mode="raw",
        thresholds=None,
        combinations=None,
        derivative="fd2",
        smooth=False,
        window=11,
        polyorder=3,
        fraction=1.0,
        seed=0,
        catalog=None,
        max_iter=20,
        rank_tol=DEFAULT_RANK_TOL,
        x=None,
        t=None,
    ):
        self.weights = weights
        self.residual_mode = residual_mode
        self.thresholds = thresholds
        self.combinations = combinations
        self.derivative = derivative
        self.smooth = smooth
        self.window = window
        self.polyorder = polyorder
        self.fraction = fraction
        self.seed = seed
        self.catalog = catalog
        self.max_iter = max_iter
        self.rank_tol = rank_tol
        self.x = x
        self.t = t

    def _field(self, X):
        field = as_density_field(X, self.x, self.t)
        if self.smooth:
            field = smooth_savgol(field, *check_savgol(self.window, self.polyorder))
        return field

    def _plan(self) -> CombinationPlan:
        combos = tuple(tuple(c) for c in self.combinations) if self.combinations is not None else all_combinations()
        if self.thresholds is None:
            return CombinationPlan(combos)
        return CombinationPlan(combos, tuple(check_thresholds(self.thresholds)))

    def fit(self, X, y=None):
        """Identify the model; ``y`` optionally overrides the derivative estimate."""
        weights = SelectWeights.from_sequence(
            check_weights(self.weights), residual_mode=check_residual_mode(self.residual_mode)
        )
        field = self._field(X)
        if y is None:
            ndot = differentiate(field, check_derivative(self.derivative))
        else:
            ndot = np.asarray(y, dtype=float).ravel()
            if ndot.size != field.n_rows:
                raise ConfigError(f"derivative has {ndot.size} entries, field has {field.n_rows} rows")
        frac = check_fraction(self.fraction)
        mask = subsample_rows(field.n_rows, frac, self.seed) if frac < 1 else None
        result = identify(
            field, ndot, weights, self._plan(), self.catalog, mask, rank_tol=self.rank_tol, max_iter=self.max_iter
        )
        self.identification_ = result
        self.solution_ = result.solution
        self.pool_ = result.pool
        self.raw_model_ = formulate_pbe(result.solution, result.symbols)
        self.model_ = resolve_dependent_terms(self.raw_model_)
        self.breakage_ = deduce_breakage_stoichiometry(self.model_)
        self.n_terms_ = len(self.model_.terms)
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self.model_.predict(as_density_field(X, self.x, self.t))

    def score(self, X, y=None, sample_weight=None):
        """Coefficient of determination against ``y`` or the estimated derivative."""
        check_is_fitted(self, "model_")
        if y is None:
            y = differentiate(self._field(X), check_derivative(self.derivative))
        return super().score(X, y, sample_weight)

    def coefficient_error(self, reference):
        check_is_fitted(self, "model_")
        return coefficient_error(self.model_, reference)

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.input_tags.two_d_array = False
        tags.input_tags.allow_nan = False
        tags.target_tags.required = False
        return tags


__all__ = ["LibraryTransformer", "PBEDiscovery"]
