"""Closed-form achievable rates and dispersions for coherent-state signalling.

Every ``*_second_order`` function returns the normal approximation
``n C + sqrt(n V) Phi^{-1}(eps)`` in bits.  The O(log n) remainder is not
included; :data:`NORMAL_APPROX_CAVEAT` is attached to each point so that
downstream consumers do not mistake it for a certified bound.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from fbl.distmath import (
    LOG2E,
    ChannelParams,
    DiscreteDistribution,
    SurprisalStats,
    g_closed,
    normal_cdf_inv,
    surprisal_stats,
    v_closed,
)
from fbl.errors import DomainError

NORMAL_APPROX_CAVEAT = "normal approximation; O(log n) remainder excluded"


class Method(str, enum.Enum):
    HOLEVO_NORMAL = "holevo_normal"
    HETERODYNE_NORMAL = "heterodyne_normal"
    BPSK_HOLEVO_NORMAL = "bpsk_holevo_normal"
    BPSK_DOLINAR_CAPACITY = "bpsk_dolinar_capacity"
    DT_BOUND = "dt_bound"
    CONSTRAINED_NORMAL = "constrained_normal"


@dataclass(frozen=True)
class RatePoint:
    n: int
    eps: float
    log_m: float
    method: Method
    caveat: str = NORMAL_APPROX_CAVEAT
    feasible: bool | None = None

    @property
    def rate(self) -> float:
        return self.log_m / self.n


@dataclass(frozen=True)
class ConstraintParams:
    """Photon backoff ``delta1``, error tilt ``delta2`` and the externally supplied
    feasibility constant (must lie in (0, 1))."""

    delta1: float
    delta2: float
    ww14_constant: float

    def __post_init__(self):
        if self.delta1 <= 0.0 or self.delta2 <= 0.0:
            raise DomainError("delta1 and delta2 must be > 0")
        if not 0.0 < self.ww14_constant < 1.0:
            raise DomainError("ww14_constant must lie in (0, 1)")


def _check(n: int, eps: float) -> None:
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n!r}")
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps!r}")


def _normal(capacity: float, dispersion: float, n: int, eps: float) -> float:
    if dispersion == 0.0:
        return n * capacity
    return n * capacity + math.sqrt(n * dispersion) * normal_cdf_inv(eps)


def binary_entropy(x: float) -> float:
    """h2(x) in bits."""
    if not 0.0 <= x <= 1.0:
        raise DomainError("binary entropy argument must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return float(-(x * math.log2(x) + (1.0 - x) * math.log2(1.0 - x)))


# -- Holevo (joint-detection) ------------------------------------------------

def holevo_second_order(ch: ChannelParams, n: int, eps: float) -> RatePoint:
    _check(n, eps)
    x = ch.received_photon
    return RatePoint(n, eps, _normal(g_closed(x), v_closed(x), n, eps), Method.HOLEVO_NORMAL)


# -- Heterodyne --------------------------------------------------------------

def heterodyne_capacity(mean_photon: float) -> float:
    if mean_photon < 0.0:
        raise DomainError("mean photon number must be >= 0")
    return math.log1p(mean_photon) * LOG2E


def heterodyne_dispersion(x: float) -> float:
    if x < 0.0:
        raise DomainError("mean photon number must be >= 0")
    return x * (x + 2.0) * LOG2E**2 / (x + 1.0) ** 2


def heterodyne_second_order(ch: ChannelParams, n: int, eps: float) -> RatePoint:
    _check(n, eps)
    x = ch.received_photon
    log_m = _normal(heterodyne_capacity(x), heterodyne_dispersion(x), n, eps)
    return RatePoint(n, eps, log_m, Method.HETERODYNE_NORMAL)


# -- BPSK --------------------------------------------------------------------

def bpsk_overlap(mean_photon: float) -> float:
    """<-a|a> = exp(-2 N_S) for a real amplitude a with |a|^2 = N_S."""
    if mean_photon < 0.0:
        raise DomainError("mean photon number must be >= 0")
    return math.exp(-2.0 * mean_photon)


def bpsk_spectrum(mean_photon: float) -> DiscreteDistribution:
    """Eigenvalues ``(1 +- e^{-2 N_S}) / 2`` of the equal mixture of ``|a>`` and ``|-a>``."""
    s = bpsk_overlap(mean_photon)
    hi = (1.0 + s) / 2.0
    lo = -math.expm1(-2.0 * mean_photon) / 2.0
    if lo == 0.0:
        return DiscreteDistribution.from_probs([1.0])
    return DiscreteDistribution.from_probs([hi, lo])


def bpsk_holevo(mean_photon: float) -> float:
    """Holevo information of equiprobable BPSK, bits per symbol."""
    if mean_photon < 0.0:
        raise DomainError("mean photon number must be >= 0")
    return binary_entropy(-math.expm1(-2.0 * mean_photon) / 2.0)


def dolinar_crossover(mean_photon: float) -> float:
    """Minimum error probability for discriminating ``|a>`` from ``|-a>`` (Helstrom)."""
    if mean_photon < 0.0:
        raise DomainError("mean photon number must be >= 0")
    if math.isinf(mean_photon):
        return 0.0
    one_minus = -math.expm1(-4.0 * mean_photon)
    root = math.sqrt(one_minus)
    # (1 - root)/2 == e^{-4N} / (2 (1 + root)), stable for large N
    return math.exp(-4.0 * mean_photon) / (2.0 * (1.0 + root))


def bpsk_dolinar_capacity(mean_photon: float) -> float:
    return 1.0 - binary_entropy(dolinar_crossover(mean_photon))


def bpsk_stats(mean_photon: float) -> SurprisalStats:
    return surprisal_stats(bpsk_spectrum(mean_photon))


def bpsk_ensemble_second_order(mean_photon: float, n: int, eps: float) -> RatePoint:
    _check(n, eps)
    st = bpsk_stats(mean_photon)
    return RatePoint(n, eps, _normal(st.mean, st.variance, n, eps), Method.BPSK_HOLEVO_NORMAL)


def bpsk_dolinar_point(mean_photon: float, n: int, eps: float) -> RatePoint:
    """First-order rate of the Dolinar-induced BSC, as a RatePoint (no eps dependence)."""
    _check(n, eps)
    return RatePoint(
        n, eps, n * bpsk_dolinar_capacity(mean_photon), Method.BPSK_DOLINAR_CAPACITY,
        caveat="capacity; no finite-blocklength correction",
    )


# -- small photon number -----------------------------------------------------

@dataclass(frozen=True)
class SmallNsExpansions:
    c_ultimate: float
    c_bpsk: float
    c1: float
    photon_efficiency: float


def small_ns_expansions(mean_photon: float) -> SmallNsExpansions:
    """Leading-order approximants (nats) of the capacities for ``N_S << 1``."""
    x = mean_photon
    if not 0.0 < x < 0.5:
        raise DomainError("small-N_S expansions are only meaningful for N_S in (0, 0.5)")
    ln = math.log(x)
    return SmallNsExpansions(
        c_ultimate=-x * ln + x + x * x / 2.0,
        c_bpsk=-x * ln + x + x * x * ln,
        c1=2.0 * x,
        photon_efficiency=-ln + 1.0,
    )


# -- DT bound for the BSC ----------------------------------------------------

class _DTProfile:
    """Prefix sums that make each DT-bound evaluation O(log n) for a fixed BSC(p)^n.

    With uniform inputs, a received word at Hamming distance t carries
    information density ``n + t log2 p + (n - t) log2(1 - p)`` bits, and the DT
    expectation ``E[min(1, (M-1)/2 * 2^{-i})]`` collapses to
    ``sum_t C(n,t) min(p^t (1-p)^(n-t), (M-1) 2^-(n+1))``.  Since the pattern
    probability decreases in t, the minimum switches branch at a single index.
    """

    def __init__(self, n: int, crossover: float):
        p = crossover
        t = np.arange(n + 1)
        self.n = n
        log_comb = special.gammaln(n + 1) - special.gammaln(t + 1) - special.gammaln(n - t + 1)
        self.neg_pattern = -(t * math.log(p) + (n - t) * math.log1p(-p))
        # log sum_{t' < t} C(n,t') and log sum_{t' >= t} C(n,t') pattern(t')
        self.head = np.concatenate(([-np.inf], np.logaddexp.accumulate(log_comb)))
        tail_terms = log_comb - self.neg_pattern
        self.tail = np.concatenate((np.logaddexp.accumulate(tail_terms[::-1])[::-1], [-np.inf]))

    def error(self, log2_m: float) -> float:
        if log2_m <= 0.0:
            return 0.0
        ln2 = math.log(2.0)
        log_m1 = log2_m * ln2 + math.log(-math.expm1(-log2_m * ln2))
        log_cap = log_m1 - (self.n + 1) * ln2
        split = int(np.searchsorted(self.neg_pattern, -log_cap, side="left"))
        return float(np.exp(np.logaddexp(log_cap + self.head[split], self.tail[split])))


def dt_error_bsc(n: int, crossover: float, log2_m: float) -> float:
    """DT bound on the average error of a random code with ``M = 2**log2_m`` codewords
    over ``n`` uses of a BSC with the given crossover probability."""
    return _DTProfile(n, crossover).error(log2_m)


def dt_bound_bsc(n: int, crossover: float, eps: float) -> RatePoint:
    """``log2`` of the largest integer M whose DT error bound is at most ``eps``."""
    _check(n, eps)
    if not 0.0 < crossover < 0.5:
        raise DomainError("crossover must lie in (0, 1/2)")
    prof = _DTProfile(n, crossover)
    caveat = "DT achievability bound"
    if prof.error(1.0) > eps:
        return RatePoint(n, eps, 0.0, Method.DT_BOUND, caveat=caveat)
    # error is increasing in M: bisect on log2 M, then settle on an integer M
    lo, hi = 1.0, float(n)
    while prof.error(hi) <= eps:
        hi *= 2.0
    while hi - lo > 1e-13 * hi:
        mid = 0.5 * (lo + hi)
        if prof.error(mid) <= eps:
            lo = mid
        else:
            hi = mid
    log_m = lo
    if lo < 52:
        m = math.floor(2.0**lo)
        while prof.error(math.log2(m + 1)) <= eps:
            m += 1
        while m > 1 and prof.error(math.log2(m)) > eps:
            m -= 1
        log_m = math.log2(m)
    return RatePoint(n, eps, log_m, Method.DT_BOUND, caveat=caveat)


# -- photon-number constrained ----------------------------------------------

def constrained_second_order(
    ch: ChannelParams, n: int, eps: float, cp: ConstraintParams
) -> RatePoint:
    """Second-order rate with Gaussian variance backed off to ``N_S - delta1``.

    ``feasible`` reports whether ``C**(n/2) + eps**delta2 < 1`` holds for the
    supplied constant ``C``.
    """
    _check(n, eps)
    if cp.delta1 >= ch.mean_photon:
        raise DomainError("delta1 must be smaller than the mean photon number")
    x = ch.transmissivity * (ch.mean_photon - cp.delta1)
    tilted = eps ** (1.0 + cp.delta2)
    log_m = _normal(g_closed(x), v_closed(x), n, tilted)
    feasible = cp.ww14_constant ** (n / 2.0) + eps**cp.delta2 < 1.0
    return RatePoint(n, eps, log_m, Method.CONSTRAINED_NORMAL, feasible=feasible)


def smallest_feasible_n(eps: float, cp: ConstraintParams) -> int | None:
    """Smallest n with ``C**(n/2) + eps**delta2 < 1``, or None if no n works."""
    slack = 1.0 - eps**cp.delta2
    if slack <= 0.0:
        return None
    n = max(1, math.floor(2.0 * math.log(slack) / math.log(cp.ww14_constant)))
    while n > 1 and cp.ww14_constant ** ((n - 1) / 2.0) < slack:
        n -= 1
    while not cp.ww14_constant ** (n / 2.0) < slack:
        n += 1
    return n
