"""The AIC family of model-selection criteria as pure formulas on fit summaries.

Additive constants that do not involve the parameter count are dropped
throughout, since only differences between models matter for ranking.
A zero RSS in the log-based criteria is an error rather than -inf: it
signals a saturated fit outside the theory's domain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

CriterionKind = Literal[
    "aic_known", "aic_unknown", "aicc", "aicu", "aic_gamma", "akaike_weight"
]


@dataclass(frozen=True)
class CriterionValue:
    value: float
    kind: CriterionKind


def aic_known_sigma(rss: float, sigma2: float, k: int) -> float:
    """RSS/sigma2 + 2k, for a model with known error variance."""
    if not (sigma2 > 0.0):
        raise ValueError("sigma2 must be positive")
    if k < 0:
        raise ValueError("k must be nonnegative")
    return rss / sigma2 + 2.0 * k


def aic_unknown_sigma(rss: float, n: int, k: int) -> float:
    """n ln(RSS/n) + 2(k+1), for a model whose error variance is fitted."""
    _check_rss_n_k(rss, n, k)
    return n * math.log(rss / n) + 2.0 * (k + 1)


def aicc(rss: float, n: int, k: int) -> float:
    """Small-sample corrected criterion n ln(RSS/n) + 2(k+1)n/(n-k-2).

    Defined only when n - k - 2 > 0 (k+1 fitted parameters including the
    variance); meaningful only when the error variance is fitted and the
    model is correctly specified.
    """
    _check_rss_n_k(rss, n, k)
    if n - k - 2 <= 0:
        raise ValueError(f"small-sample correction undefined for n - k - 2 <= 0 (n={n}, k={k})")
    return n * math.log(rss / n) + 2.0 * (k + 1) * n / (n - k - 2)


def aicu(rss: float, n: int, k: int) -> float:
    """Variant of the unknown-variance criterion using the unbiased RSS/(n-k)."""
    _check_rss_n_k(rss, n, k)
    return n * math.log(rss / (n - k)) + 2.0 * (k + 1)


def aic_gamma(rss: float, sigma2: float, k: int, gamma: float) -> float:
    """RSS/sigma2 + gamma*k: penalty coefficient gamma >= 1 instead of 2."""
    if not (sigma2 > 0.0):
        raise ValueError("sigma2 must be positive")
    if gamma < 1.0:
        raise ValueError("gamma must be at least 1")
    return rss / sigma2 + gamma * k


def akaike_weights(criteria) -> np.ndarray:
    """Normalized preference weights exp(-(c - min c)/2) / sum.

    The min shift protects against underflow and cancels in the
    normalization, so weights depend only on criterion differences.
    """
    arr = np.asarray(criteria, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("need a nonempty 1-D list of criterion values")
    if not np.all(np.isfinite(arr)):
        raise ValueError("criterion values must be finite")
    w = np.exp(-(arr - arr.min()) / 2.0)
    return w / w.sum()


def _check_rss_n_k(rss: float, n: int, k: int) -> None:
    if rss < 0.0:
        raise ValueError("rss cannot be negative")
    if rss == 0.0:
        raise ValueError("rss = 0: perfect fit, log-based criterion undefined")
    if k < 0:
        raise ValueError("k must be nonnegative")
    if n <= k:
        raise ValueError(f"need n > k (n={n}, k={k})")
