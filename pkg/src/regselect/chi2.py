"""Central and non-central chi-squared distributions: moments, E[1/X], sampling.

Only integer degrees of freedom are supported; r = 0 with zero
non-centrality is allowed as the degenerate point mass at 0 (the law of a
quadratic form in a rank-0 projection).  No closed-form PDF/CDF is
provided; distributional checks elsewhere rely on moments and sampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Summation controls for the negative first moment: terms are added from the
# Poisson mode outward and dropped once below TERM_CUTOFF of the running sum.
TERM_CUTOFF = 1e-16


@dataclass(frozen=True)
class NoncentralChi2:
    r: int
    lam: float = 0.0

    def __post_init__(self):
        if not isinstance(self.r, (int, np.integer)):
            raise ValueError("degrees of freedom must be an integer")
        if self.r < 0:
            raise ValueError("degrees of freedom must be nonnegative")
        if self.lam < 0.0 or not math.isfinite(self.lam):
            raise ValueError("non-centrality must be finite and nonnegative")
        if self.r == 0 and self.lam != 0.0:
            raise ValueError("r = 0 is only the degenerate point mass at 0 (lam must be 0)")


def mean(d: NoncentralChi2) -> float:
    return d.r + d.lam


def variance(d: NoncentralChi2) -> float:
    return 2.0 * d.r + 4.0 * d.lam


def neg_first_moment(d: NoncentralChi2) -> float:
    """E[1/X] for X ~ chi2(r, lam), finite only for r > 2.

    Poisson-mixture series sum_m w_m / (r - 2 + 2m) with w_m the Poisson(lam/2)
    weights, evaluated from the modal m outward in both directions with the
    weights updated by recurrence.  Starting at the mode keeps the evaluation
    stable for large non-centrality, where the m = 0 weight underflows.
    """
    if d.r <= 2:
        raise ValueError(f"negative first moment diverges for r <= 2 (r={d.r})")
    t = d.lam / 2.0
    if t == 0.0:
        return 1.0 / (d.r - 2)
    m0 = int(t)
    w0 = math.exp(-t + m0 * math.log(t) - math.lgamma(m0 + 1))
    total = w0 / (d.r - 2 + 2 * m0)
    w, m = w0, m0
    while True:
        m += 1
        w *= t / m
        term = w / (d.r - 2 + 2 * m)
        total += term
        if term < TERM_CUTOFF * total:
            break
    w, m = w0, m0
    while m > 0:
        w *= m / t
        m -= 1
        term = w / (d.r - 2 + 2 * m)
        total += term
        if term < TERM_CUTOFF * total:
            break
    return total


def sample(d: NoncentralChi2, rng: np.random.Generator, size: int | None = None):
    """Draw from chi2(r, lam) as (Z + sqrt(lam))^2 + chi2(r-1), Z standard normal.

    Exact for every integer r >= 1; r = 0 returns the constant 0.  With
    ``size=None`` a single float is returned, otherwise an array.
    """
    if size is None:
        return float(sample(d, rng, size=1)[0])
    if d.r == 0:
        return np.zeros(size)
    out = (rng.standard_normal(size) + math.sqrt(d.lam)) ** 2
    if d.r > 1:
        out += rng.chisquare(d.r - 1, size)
    return out


def quadratic_form_law(rank_s: int, u_quadratic: float) -> NoncentralChi2:
    """Distribution of (z+u)' P (z+u) for a rank-s projection P: chi2(s, u'Pu)."""
    if rank_s < 0:
        raise ValueError("projection rank must be nonnegative")
    if u_quadratic < 0.0:
        raise ValueError("the quadratic form u'Pu cannot be negative")
    return NoncentralChi2(r=int(rank_s), lam=float(u_quadratic))
