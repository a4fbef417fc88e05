"""Ordinary least squares and projection algebra for full-rank design matrices.

All projections go through a thin orthonormal basis of the design's column
space; no n-by-n hat matrix is ever formed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

RANK_TOL = 1e-10


def _as_vector(v, n: int | None = None, name: str = "v") -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {n}")
    return arr


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Response vector with either per-point error bars or a known common variance.

    At most one of ``error_bars`` / ``common_sigma2`` may be set; neither set
    means the error variance is unknown and must be fitted.
    """

    y: np.ndarray
    error_bars: np.ndarray | None = None
    common_sigma2: float | None = None

    def __post_init__(self):
        y = _as_vector(self.y, name="y")
        if y.shape[0] < 1:
            raise ValueError("dataset must contain at least one observation")
        object.__setattr__(self, "y", _readonly(y))
        if self.error_bars is not None and self.common_sigma2 is not None:
            raise ValueError("at most one of error_bars / common_sigma2 may be set")
        if self.error_bars is not None:
            eb = _as_vector(self.error_bars, y.shape[0], name="error_bars")
            if np.any(eb <= 0.0):
                raise ValueError("all error bars must be strictly positive")
            object.__setattr__(self, "error_bars", _readonly(eb))
        if self.common_sigma2 is not None:
            if not (self.common_sigma2 > 0.0):
                raise ValueError("common_sigma2 must be positive")

    @property
    def n(self) -> int:
        return self.y.shape[0]


@dataclass(frozen=True)
class LinearModel:
    """Full-rank n-by-k design matrix plus its variance mode.

    ``sigma2`` set means the error variance is known; ``None`` means it is a
    nuisance parameter to be fitted.  An orthonormal basis of the column
    space is computed once at construction and cached on the instance.
    """

    X: np.ndarray
    sigma2: float | None = None
    basis: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"design matrix must be 2-D, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("design matrix contains non-finite values")
        n, k = X.shape
        if k < 1:
            raise ValueError("design matrix needs at least one column")
        if n <= k:
            raise ValueError(f"need more observations than parameters (n={n}, k={k})")
        if self.sigma2 is not None and not (self.sigma2 > 0.0):
            raise ValueError("sigma2 must be positive when given")
        sv = np.linalg.svd(X, compute_uv=False)
        if sv[-1] < RANK_TOL * sv[0]:
            raise ValueError(
                f"design matrix is rank deficient (singular value ratio "
                f"{sv[-1] / sv[0]:.2e} below {RANK_TOL:.0e})"
            )
        q, r = np.linalg.qr(X)
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "basis", _readonly(q))
        object.__setattr__(self, "_r_factor", _readonly(r))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]

    @property
    def variance_known(self) -> bool:
        return self.sigma2 is not None


@dataclass(frozen=True)
class FitResult:
    """Least-squares fit summary: coefficients, prediction, RSS, dimensions."""

    beta_hat: np.ndarray
    y_hat: np.ndarray
    rss: float
    sigma2_hat: float | None
    n: int
    k: int


def standardize_errors(dataset: Dataset, target_sigma: float) -> tuple[Dataset, np.ndarray]:
    """Rescale a dataset with per-point error bars to a common known variance.

    Each response is multiplied by ``target_sigma / error_bar``; the returned
    dataset carries ``common_sigma2 = target_sigma**2`` and no error bars.
    The per-row scale factors are returned alongside: any design matrix used
    with the standardized data must have its rows multiplied by the same
    factors, or the model equation no longer matches the data.
    """
    if dataset.error_bars is None:
        raise ValueError("dataset has no error bars to standardize")
    if not (target_sigma > 0.0):
        raise ValueError("target_sigma must be positive")
    scale = target_sigma / dataset.error_bars
    out = Dataset(y=dataset.y * scale, common_sigma2=target_sigma**2)
    return out, scale


def fit_ols(model: LinearModel, y) -> FitResult:
    """Fit the model to ``y`` by least squares via the cached QR factors.

    The coefficient solve never forms the normal-equations matrix.  In
    unknown-variance mode the maximum-likelihood estimate RSS/n is reported
    as ``sigma2_hat``.
    """
    y = _as_vector(y, model.n, name="y")
    u = model.basis
    coeffs = u.T @ y
    beta_hat = solve_triangular(model._r_factor, coeffs, lower=False)
    y_hat = u @ coeffs
    resid = y - y_hat
    rss = float(resid @ resid)
    sigma2_hat = None if model.variance_known else rss / model.n
    return FitResult(
        beta_hat=beta_hat,
        y_hat=y_hat,
        rss=rss,
        sigma2_hat=sigma2_hat,
        n=model.n,
        k=model.k,
    )


def apply_Q(model: LinearModel, v) -> np.ndarray:
    """Project ``v`` onto the orthogonal complement of the design's column space."""
    v = _as_vector(v, model.n)
    u = model.basis
    return v - u @ (u.T @ v)


def quadratic_form_Q(model: LinearModel, v) -> float:
    """Squared norm of the error-space component of ``v``; equals RSS when v = y."""
    q = apply_Q(model, v)
    return float(q @ q)


def diff_projection_traces(model1: LinearModel, model2: LinearModel) -> tuple[float, float]:
    """Traces of the squared and cubed difference of the two error projections.

    With P1, P2 the hat matrices, the difference of error projections is
    P1 - P2, so tr[(Q2-Q1)^2] = k1 + k2 - 2 tr(P1 P2), and tr(P1 P2) is the
    squared Frobenius norm of the k1-by-k2 cross-Gram matrix of the
    orthonormal bases.  The cubic trace reduces to k1 - k2 exactly: the two
    mixed products P1 P2 P1 and P2 P1 P2 have equal traces and cancel.
    """
    if model1.n != model2.n:
        raise ValueError(f"models disagree on n: {model1.n} vs {model2.n}")
    cross = model1.basis.T @ model2.basis
    t2 = model1.k + model2.k - 2.0 * float(np.sum(cross * cross))
    t2 = max(t2, 0.0)
    t3 = float(model1.k - model2.k)
    return t2, t3


def quadratic_form_diffQ(model1: LinearModel, model2: LinearModel, v) -> float:
    """Squared norm of (Q2 - Q1) v, i.e. of the difference of the two projections of v."""
    if model1.n != model2.n:
        raise ValueError(f"models disagree on n: {model1.n} vs {model2.n}")
    v = _as_vector(v, model1.n)
    u1, u2 = model1.basis, model2.basis
    d = u1 @ (u1.T @ v) - u2 @ (u2.T @ v)
    return float(d @ d)
