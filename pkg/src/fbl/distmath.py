"""Eigenvalue distributions, surprisal moments and normal-CDF helpers.

All entropic quantities here are in bits.  The thermal-state spectrum is
geometric, so truncation is done by certified tail mass rather than by a
fixed number of photon-number levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from fbl.errors import DomainError

LOG2E = 1.0 / math.log(2.0)
MASS_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteDistribution:
    """Atoms of a (possibly truncated) probability distribution.

    ``tail_bound`` is an upper bound on the probability mass that is not
    represented by any atom.  When ``tail_ratio`` is set, the omitted atoms
    are known to continue the geometric law ``p(n) = (1 - q) q**n`` with
    ``q = tail_ratio``, which lets :func:`surprisal_stats` account for them
    exactly instead of reporting an unbounded uncertainty.
    """

    labels: np.ndarray
    probs: np.ndarray
    tail_bound: float = 0.0
    tail_ratio: float | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "probs", probs)
        if labels.shape != probs.shape or probs.ndim != 1:
            raise DomainError("labels and probs must be 1-D arrays of equal length")
        if probs.size == 0:
            raise DomainError("distribution has no atoms")
        if np.any(probs <= 0.0) or np.any(probs > 1.0 + MASS_TOL):
            raise DomainError("atom probabilities must lie in (0, 1]")
        if np.unique(labels).size != labels.size:
            raise DomainError("atom labels must be unique")
        if self.tail_bound < 0.0:
            raise DomainError("tail_bound must be non-negative")
        total = math.fsum(probs)
        if total > 1.0 + MASS_TOL or total + self.tail_bound < 1.0 - MASS_TOL:
            raise DomainError(
                f"atom mass {total!r} with tail {self.tail_bound!r} does not cover 1"
            )

    @classmethod
    def from_probs(cls, probs, tail_bound: float = 0.0) -> "DiscreteDistribution":
        probs = np.asarray(probs, dtype=float)
        return cls(np.arange(probs.size), probs, tail_bound)

    @classmethod
    def uniform(cls, k: int) -> "DiscreteDistribution":
        return cls.from_probs(np.full(k, 1.0 / k))

    @property
    def mass(self) -> float:
        return math.fsum(self.probs)


@dataclass(frozen=True)
class SurprisalStats:
    """Moments of the surprisal ``-log2 p(Z)``.

    ``mean_err`` and ``variance_err`` bound how far the atom-only moments
    may sit from the moments of the untruncated distribution.
    """

    mean: float
    variance: float
    third_abs_moment: float
    mean_err: float = 0.0
    variance_err: float = 0.0

    def __post_init__(self):
        if self.variance < 0.0 or self.third_abs_moment < 0.0:
            raise DomainError("variance and third absolute moment must be >= 0")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @classmethod
    def two_point(cls, p: float) -> "SurprisalStats":
        """Stats of a two-atom distribution ``{p, 1 - p}``."""
        return surprisal_stats(DiscreteDistribution.from_probs([p, 1.0 - p]))


@dataclass(frozen=True)
class ChannelParams:
    """Pure-loss channel: transmissivity and input mean photon number."""

    transmissivity: float = 1.0
    mean_photon: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.transmissivity <= 1.0:
            raise DomainError("transmissivity must lie in (0, 1]")
        if self.mean_photon < 0.0:
            raise DomainError("mean_photon must be >= 0")

    @property
    def received_photon(self) -> float:
        return self.transmissivity * self.mean_photon


def geometric_atoms(mean_photon: float, count: int) -> np.ndarray:
    n = np.arange(count, dtype=float)
    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        direct = mean_photon**n / (mean_photon + 1.0) ** (n + 1.0)
        via_log = np.exp(n * math.log(mean_photon) - (n + 1.0) * math.log1p(mean_photon))
    ok = np.isfinite(direct) & (direct > np.finfo(float).tiny)
    return np.where(ok, direct, via_log)


def geometric_spectrum(mean_photon: float, tail_tolerance: float = 1e-12) -> DiscreteDistribution:
    """Photon-number distribution of a thermal state with the given mean.

    Atoms run over ``n = 0..n_max`` where ``n_max`` is the smallest cutoff
    whose omitted geometric mass ``q**(n_max+1)`` is at most
    ``tail_tolerance``; that omitted mass is stored as ``tail_bound``.
    """
    if mean_photon < 0.0 or math.isnan(mean_photon):
        raise DomainError(f"mean photon number must be >= 0, got {mean_photon!r}")
    if not 0.0 < tail_tolerance < 1.0:
        raise DomainError("tail_tolerance must lie in (0, 1)")
    if mean_photon == 0.0:
        return DiscreteDistribution(np.array([0]), np.array([1.0]), 0.0)
    log_q = -math.log1p(1.0 / mean_photon)
    count = max(1, math.ceil(math.log(tail_tolerance) / log_q))
    while count > 1 and math.exp((count - 1) * log_q) <= tail_tolerance:
        count -= 1
    while math.exp(count * log_q) > tail_tolerance:
        count += 1
    probs = geometric_atoms(mean_photon, count)
    keep = probs > 0.0
    tail = math.exp(count * log_q) + math.fsum(probs[~keep])
    return DiscreteDistribution(
        np.arange(count)[keep], probs[keep], tail, tail_ratio=math.exp(log_q)
    )


def _geometric_tail_moments(q: float, start: int, center: float) -> tuple[float, float, float]:
    """Mass, first moment and second moment about ``center`` of the omitted geometric tail."""
    mass = q**start
    if mass == 0.0:
        return 0.0, 0.0, 0.0
    a = -math.log2(1.0 - q)
    b = -math.log2(q)
    mu = q / (1.0 - q)
    var = q / (1.0 - q) ** 2
    first = mass * (a + b * (start + mu))
    offset = a + b * (start + mu) - center
    second = mass * (offset**2 + b * b * var)
    return mass, first, second


def surprisal_stats(dist: DiscreteDistribution) -> SurprisalStats:
    """Mean, variance and central third absolute moment of ``-log2 p``.

    Moments are summed over the atoms only.  The effect of the omitted tail
    is reported through ``mean_err`` / ``variance_err``: computed exactly for
    geometric tails, infinite when nothing is known about the tail.
    """
    p = dist.probs
    if p.size == 0:
        raise DomainError("empty distribution")
    s = -np.log2(p)
    mean = float(np.dot(p, s))
    dev = s - mean
    variance = float(np.dot(p, dev * dev))
    third = float(np.dot(p, np.abs(dev) ** 3))
    mean_err = variance_err = 0.0
    if dist.tail_bound > 0.0:
        if dist.tail_ratio is None:
            mean_err = variance_err = math.inf
        else:
            q = dist.tail_ratio
            start = int(dist.labels.max()) + 1
            _, tail_first, _ = _geometric_tail_moments(q, start, 0.0)
            full_mean = mean + tail_first
            _, _, tail_second = _geometric_tail_moments(q, start, full_mean)
            full_var = float(np.dot(p, (s - full_mean) ** 2)) + tail_second
            mean_err = tail_first
            variance_err = abs(full_var - variance)
    return SurprisalStats(mean, max(variance, 0.0), third, mean_err, variance_err)


def g_closed(x: float) -> float:
    """Entropy in bits of a thermal state with mean photon number ``x``."""
    if x < 0.0:
        raise DomainError(f"g is undefined for negative argument {x!r}")
    if x == 0.0:
        return 0.0
    # log2(x+1) + x*log2(1+1/x) avoids cancellation for large x
    return math.log1p(x) * LOG2E + x * math.log1p(1.0 / x) * LOG2E


def v_closed(x: float) -> float:
    """Entropy variance in bits^2 of a thermal state with mean photon number ``x``."""
    if x < 0.0:
        raise DomainError(f"v is undefined for negative argument {x!r}")
    if x == 0.0:
        return 0.0
    gap = math.log1p(1.0 / x) * LOG2E
    return x * (x + 1.0) * gap * gap


def normal_cdf(x: float) -> float:
    return float(special.ndtr(x))


def normal_cdf_inv(eps: float) -> float:
    """Inverse standard-normal CDF, extended to ``-inf``/``+inf`` outside (0, 1)."""
    if eps <= 0.0:
        return -math.inf
    if eps >= 1.0:
        return math.inf
    return float(special.ndtri(eps))


def berry_esseen_radius(stats: SurprisalStats, n: int) -> float:
    """Uniform bound ``T / (sigma^3 sqrt(n))`` on the CDF deviation of a standardized sum."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if stats.variance <= 0.0:
        raise DomainError("zero variance: surprisal is deterministic, Berry-Esseen does not apply")
    return stats.third_abs_moment / (stats.variance**1.5 * math.sqrt(n))
