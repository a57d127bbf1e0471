"""Sequential thresholded least squares."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data


@dataclass(frozen=True)
class StlsConfig:
    """Settings of one STLS run.

    Parameters
    ----------
    threshold : float
        Sparsity index; coefficients with magnitude strictly below it are
        zeroed after every least-squares pass.
    max_iter : int
        Upper bound on refit passes.
    normalize : bool
        Threshold column-normalised coefficients instead of raw ones.
    """

    threshold: float = 0.1
    max_iter: int = 20
    normalize: bool = False

    def __post_init__(self):
        if not np.isfinite(self.threshold) or self.threshold < 0:
            raise ValueError(f"threshold must be finite and >= 0, got {self.threshold}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass
class SparseSolution:
    """Sparse coefficient vector and its bookkeeping.

    ``penalty`` and ``cost`` stay ``None`` until a selector scores the solution.
    """

    coef: np.ndarray
    threshold: float = 0.0
    residual: float = 0.0
    target_norm2: float = 1.0
    combination: tuple = ()
    iterations: int = 0
    converged: bool = True
    penalty: int | None = None
    cost: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def support(self) -> tuple:
        return tuple(int(i) for i in np.flatnonzero(self.coef))

    @property
    def n_terms(self) -> int:
        return int(np.count_nonzero(self.coef))

    @property
    def relative_residual(self) -> float:
        if self.target_norm2 <= 0:
            return np.inf
        return self.residual / self.target_norm2


def least_squares(A, b) -> np.ndarray:
    """Minimum-norm least-squares solution of ``A c = b``."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or b.ndim != 1 or A.shape[0] != b.shape[0]:
        raise ValueError(f"incompatible shapes {A.shape} and {b.shape}")
    if A.shape[1] == 0:
        return np.zeros(0)
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    return coef


def stls(A, b, config: StlsConfig | None = None, residual_offset: float = 0.0, target_norm2=None) -> SparseSolution:
    """Fit a sparse ``c`` with ``A c ~ b`` by repeated thresholded refits.

    Each pass solves least squares on the current support and zeroes entries
    with ``|c| < threshold``.  Iteration stops once the support repeats or
    after ``config.max_iter`` passes.

    ``residual_offset`` is added to the reported squared residual.  It carries
    the part of ``b`` orthogonal to a compressed system (see
    :func:`pbeid.library.normalized_r_factor`).
    """
    config = config or StlsConfig()
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or b.ndim != 1 or A.shape[0] != b.shape[0]:
        raise ValueError(f"incompatible shapes {A.shape} and {b.shape}")
    q = A.shape[1]
    scale = np.ones(q)
    if config.normalize and q:
        norms = np.linalg.norm(A, axis=0)
        scale = np.where(norms > 0, norms, 1.0)
    work = A / scale

    coef = np.zeros(q)
    support = np.ones(q, dtype=bool)
    iterations = 0
    converged = False
    for iterations in range(1, config.max_iter + 1):
        coef = np.zeros(q)
        if support.any():
            coef[support] = least_squares(work[:, support], b)
        small = np.abs(coef) < config.threshold
        new_support = support & ~small
        coef[~new_support] = 0.0
        if np.array_equal(new_support, support):
            converged = True
            break
        support = new_support
    if not converged and support.any():
        # last pass thresholded without a refit; refit so coefficients match support
        coef = np.zeros(q)
        coef[support] = least_squares(work[:, support], b)
    coef = coef / scale
    r = A @ coef - b
    tn2 = float(b @ b) + residual_offset if target_norm2 is None else float(target_norm2)
    return SparseSolution(
        coef=coef,
        threshold=config.threshold,
        residual=float(r @ r) + residual_offset,
        target_norm2=tn2,
        iterations=iterations,
        converged=converged,
    )


class STLSRegressor(RegressorMixin, BaseEstimator):
    """Scikit-learn style wrapper around :func:`stls`.

    Parameters
    ----------
    threshold : float, default=0.1
    max_iter : int, default=20
    normalize : bool, default=False

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    n_iter_ : int
    """

    def __init__(self, threshold=0.1, max_iter=20, normalize=False):
        self.threshold = threshold
        self.max_iter = max_iter
        self.normalize = normalize

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        sol = stls(X, y, StlsConfig(self.threshold, self.max_iter, self.normalize))
        self.coef_ = sol.coef
        self.n_iter_ = sol.iterations
        self.solution_ = sol
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        return X @ self.coef_


__all__ = ["StlsConfig", "SparseSolution", "least_squares", "stls", "STLSRegressor"]
