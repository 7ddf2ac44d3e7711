"""Spectral inf-entropy of finite eigenvalue distributions and their i.i.d. powers.

The spectral inf-entropy at level ``eps`` is the supremum of thresholds
``z`` with ``Pr[-log2 p(Z) <= z] <= eps``.  For a distribution made of atoms
the CDF is a right-continuous step function, so the supremum is the first
support point whose inclusive CDF exceeds ``eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special

from fbl.distmath import (
    DiscreteDistribution,
    SurprisalStats,
    berry_esseen_radius,
    normal_cdf_inv,
)
from fbl.errors import DomainError, SupportExplosionError

DEFAULT_MERGE_TOL = 1e-12
DEFAULT_SUPPORT_GUARD = 2_000_000


@dataclass(frozen=True)
class SurprisalDistribution:
    """Finite-support law of the surprisal, sorted by ascending value (bits)."""

    surprisals: np.ndarray
    probs: np.ndarray
    merge_tolerance: float = DEFAULT_MERGE_TOL
    tail_bound: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.surprisals, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "surprisals", s)
        object.__setattr__(self, "probs", p)
        if s.shape != p.shape or s.ndim != 1 or s.size == 0:
            raise DomainError("surprisals and probs must be non-empty 1-D arrays of equal length")
        if np.any(p <= 0.0):
            raise DomainError("point probabilities must be positive")
        if s.size > 1 and np.any(np.diff(s) <= self.merge_tolerance):
            raise DomainError("surprisals must be sorted and separated by more than merge_tolerance")

    def __len__(self) -> int:
        return self.surprisals.size

    @property
    def mass(self) -> float:
        return math.fsum(self.probs)

    @property
    def mean(self) -> float:
        return float(np.dot(self.probs, self.surprisals))

    @property
    def max_gap(self) -> float:
        """Largest distance between neighbouring support points (0 for a single point)."""
        if self.surprisals.size < 2:
            return 0.0
        return float(np.max(np.diff(self.surprisals)))

    def stats(self) -> SurprisalStats:
        mean = self.mean
        dev = self.surprisals - mean
        return SurprisalStats(
            mean,
            max(float(np.dot(self.probs, dev * dev)), 0.0),
            float(np.dot(self.probs, np.abs(dev) ** 3)),
        )


@dataclass(frozen=True)
class SpecInfResult:
    """Spectral inf-entropy with its boundary diagnostics.

    ``achieved_mass`` is the probability strictly below ``value``.  When the
    represented distribution has a tail, ``lower`` is the value obtained by
    placing all of that tail adversarially at low surprisal; ``exact`` means
    the tail cannot move the answer.
    """

    value: float
    achieved_mass: float
    exact: bool
    lower: float


class Bracket(NamedTuple):
    low: float
    high: float
    radius: float


def _merge_sorted(s: np.ndarray, p: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Merge neighbouring points closer than ``tol``; mass preserved, value mass-weighted."""
    if s.size < 2:
        return s, p
    new_group = np.empty(s.size, dtype=bool)
    new_group[0] = True
    new_group[1:] = np.diff(s) > tol
    if new_group.all():
        return s, p
    starts = np.flatnonzero(new_group)
    mass = np.add.reduceat(p, starts)
    weighted = np.add.reduceat(p * s, starts)
    return weighted / mass, mass


def _from_pairs(s, p, tol: float, tail_bound: float) -> SurprisalDistribution:
    s = np.asarray(s, dtype=float)
    p = np.asarray(p, dtype=float)
    keep = p > 0.0
    s, p = s[keep], p[keep]
    order = np.argsort(s, kind="stable")
    s, p = _merge_sorted(s[order], p[order], tol)
    return SurprisalDistribution(s, p, tol, tail_bound)


def surprisal_of(
    dist: DiscreteDistribution, merge_tolerance: float = DEFAULT_MERGE_TOL
) -> SurprisalDistribution:
    """Push an eigenvalue distribution forward through ``p -> -log2 p``."""
    return _from_pairs(-np.log2(dist.probs), dist.probs, merge_tolerance, dist.tail_bound)


def _first_exceeding(s: np.ndarray, cdf: np.ndarray, eps: float) -> tuple[float, int]:
    idx = int(np.searchsorted(cdf, eps, side="right"))
    if idx >= s.size:
        return math.inf, s.size
    return float(s[idx]), idx


def spectral_inf_entropy(s: SurprisalDistribution, eps: float) -> SpecInfResult:
    """``sup{z : Pr[-log2 p(Z) <= z] <= eps}`` for a finite surprisal law."""
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps!r}")
    cdf = np.cumsum(s.probs)
    value, idx = _first_exceeding(s.surprisals, cdf, eps)
    below = float(cdf[idx - 1]) if idx > 0 else 0.0
    if s.tail_bound > 0.0:
        lower, _ = _first_exceeding(s.surprisals, cdf + s.tail_bound, eps)
        if s.tail_bound > eps:
            lower = -math.inf
    else:
        lower = value
    return SpecInfResult(value, below, lower == value, lower)


def _binomial_power(s: SurprisalDistribution, n: int) -> SurprisalDistribution:
    s0, s1 = s.surprisals
    total = s.mass
    p0, p1 = s.probs / total
    k = np.arange(n + 1)
    logpmf = (
        special.gammaln(n + 1)
        - special.gammaln(k + 1)
        - special.gammaln(n - k + 1)
        + k * math.log(p1)
        + (n - k) * math.log(p0)
    )
    probs = np.exp(logpmf) * total**n
    values = k * s1 + (n - k) * s0
    return _from_pairs(values, probs, s.merge_tolerance, _power_tail(s.tail_bound, n))


def _power_tail(tail: float, n: int) -> float:
    if tail <= 0.0:
        return 0.0
    return float(-math.expm1(n * math.log1p(-tail)))


def iid_power(
    s: SurprisalDistribution,
    n: int,
    support_guard: int = DEFAULT_SUPPORT_GUARD,
    fast_path: bool = True,
) -> SurprisalDistribution:
    """Exact law of the sum of ``n`` i.i.d. surprisals.

    Two-point laws go through the binomial closed form unless ``fast_path``
    is False; everything else is convolved one factor at a time, merging
    colliding sums at the distribution's ``merge_tolerance``.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if n == 1:
        return s
    if fast_path and len(s) == 2:
        return _binomial_power(s, n)
    if len(s) == 1:
        return SurprisalDistribution(
            s.surprisals * n, s.probs**n, s.merge_tolerance, _power_tail(s.tail_bound, n)
        )
    acc_s, acc_p = s.surprisals, s.probs
    for _ in range(n - 1):
        size = acc_s.size * len(s)
        if size > support_guard:
            raise SupportExplosionError(
                f"convolution support would reach {size} points (guard {support_guard}); "
                "use be_bracket for this blocklength"
            )
        sums = (acc_s[:, None] + s.surprisals[None, :]).ravel()
        probs = (acc_p[:, None] * s.probs[None, :]).ravel()
        order = np.argsort(sums, kind="stable")
        acc_s, acc_p = _merge_sorted(sums[order], probs[order], s.merge_tolerance)
    return SurprisalDistribution(acc_s, acc_p, s.merge_tolerance, _power_tail(s.tail_bound, n))


def second_order_expansion(stats: SurprisalStats, n: int, eps: float) -> float:
    """``n H + sqrt(n V) Phi^{-1}(eps)``; the O(1) remainder is not included."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if stats.variance == 0.0:
        return n * stats.mean
    return n * stats.mean + math.sqrt(n * stats.variance) * normal_cdf_inv(eps)


def be_bracket(stats: SurprisalStats, n: int, eps: float, strict: bool = True) -> Bracket:
    """Interval guaranteed by Berry-Esseen to contain the exact n-fold spectral inf-entropy.

    With ``strict=False`` the shifted levels may leave (0, 1), in which case
    the corresponding endpoint is infinite instead of raising.
    """
    r = berry_esseen_radius(stats, n)
    if strict and (eps - r <= 0.0 or eps + r >= 1.0):
        raise DomainError(
            f"Berry-Esseen radius {r:.4g} pushes eps={eps} out of (0, 1); n={n} is too small"
        )
    centre = n * stats.mean
    width = math.sqrt(n * stats.variance)
    return Bracket(
        centre + width * normal_cdf_inv(eps - r),
        centre + width * normal_cdf_inv(eps + r),
        r,
    )
