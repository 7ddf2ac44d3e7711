"""Truncated-Fock-space simulation of random coding with a projected square-root measurement.

Codewords are pure states (coherent states for the bosonic ensembles).  The
decoder projects every received codeword onto the eigenspaces of the average
output state whose eigenvalues are at most ``2**-gamma``, renormalizes, and
applies the square-root measurement built from those projected vectors.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from fbl.distmath import DiscreteDistribution, normal_cdf_inv
from fbl.distmath import geometric_atoms as thermal_diagonal
from fbl.errors import DegenerateCodewordError, DomainError, TruncationError
from fbl.specinf import spectral_inf_entropy, surprisal_of

NORM_TOL = 1e-10
PINV_RTOL = 1e-12
PROJ_RTOL = 1e-9
ZERO_PROJECTION = 1e-12
DEFECT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class FockVector:
    """Unit vector in the span of ``|0>, ..., |d-1>``."""

    amplitudes: np.ndarray
    norm_defect: float = 0.0

    @classmethod
    def from_amplitudes(cls, amplitudes, tolerance: float = math.inf) -> "FockVector":
        amps = np.asarray(amplitudes, dtype=complex)
        norm_sq = float(np.vdot(amps, amps).real)
        if norm_sq == 0.0:
            raise DomainError("cannot normalize the zero vector")
        defect = max(0.0, 1.0 - norm_sq)
        if defect > tolerance:
            raise TruncationError(f"norm defect {defect:.3g} exceeds tolerance {tolerance:.3g}")
        return cls(amps / math.sqrt(norm_sq), defect)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


def coherent_state(alpha: complex, d: int, tolerance: float = NORM_TOL) -> FockVector:
    """Coherent state ``|alpha>`` cut at ``d`` levels and renormalized.

    Raises :class:`TruncationError` when the discarded norm exceeds
    ``tolerance``; raise ``d`` in that case.
    """
    if d < 1:
        raise DomainError("truncation dimension must be >= 1")
    alpha = complex(alpha)
    amps = np.empty(d, dtype=complex)
    amps[0] = math.exp(-abs(alpha) ** 2 / 2.0)
    for n in range(1, d):
        amps[n] = amps[n - 1] * alpha / math.sqrt(n)
    try:
        return FockVector.from_amplitudes(amps, tolerance)
    except TruncationError as exc:
        raise TruncationError(f"coherent state alpha={alpha} in d={d}: {exc}; increase d") from exc


def default_dimension(mean_photon: float) -> int:
    return max(20, math.ceil(8.0 * (mean_photon + 1.0)))


class EnsembleKind(str, enum.Enum):
    COHERENT_GAUSSIAN = "coherent_gaussian"
    BPSK = "bpsk"
    FINITE = "finite"


@dataclass(frozen=True)
class EnsembleSpec:
    """Distribution of channel outputs.

    For the bosonic kinds the output is ``|sqrt(transmissivity) alpha>``;
    ``states`` / ``probabilities`` are only used by the finite kind.
    """

    kind: EnsembleKind
    mean_photon: float = 0.0
    transmissivity: float = 1.0
    states: tuple[FockVector, ...] = ()
    probabilities: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", EnsembleKind(self.kind))
        if self.mean_photon < 0.0:
            raise DomainError("mean_photon must be >= 0")
        if not 0.0 < self.transmissivity <= 1.0:
            raise DomainError("transmissivity must lie in (0, 1]")
        if self.kind is EnsembleKind.FINITE:
            if not self.states or len(self.states) != len(self.probabilities):
                raise DomainError("finite ensemble needs one probability per state")
            if any(p < 0.0 for p in self.probabilities) or abs(math.fsum(self.probabilities) - 1.0) > 1e-12:
                raise DomainError("finite ensemble probabilities must be >= 0 and sum to 1")
            if len({s.dim for s in self.states}) != 1:
                raise DomainError("finite ensemble states must share one dimension")

    @classmethod
    def coherent_gaussian(cls, mean_photon: float, transmissivity: float = 1.0) -> "EnsembleSpec":
        return cls(EnsembleKind.COHERENT_GAUSSIAN, mean_photon, transmissivity)

    @classmethod
    def bpsk(cls, mean_photon: float, transmissivity: float = 1.0) -> "EnsembleSpec":
        return cls(EnsembleKind.BPSK, mean_photon, transmissivity)

    @classmethod
    def finite(cls, states: Sequence[FockVector], probabilities: Sequence[float]) -> "EnsembleSpec":
        return cls(EnsembleKind.FINITE, states=tuple(states), probabilities=tuple(probabilities))

    @property
    def received_photon(self) -> float:
        return self.transmissivity * self.mean_photon

    def sample(
        self, rng: np.random.Generator, count: int, d: int, tolerance: float = NORM_TOL
    ) -> list[FockVector]:
        """Draw ``count`` i.i.d. output states, each truncated to ``d`` levels within ``tolerance``."""
        if self.kind is EnsembleKind.FINITE:
            if d != self.states[0].dim:
                raise DomainError(f"finite ensemble has dimension {self.states[0].dim}, not {d}")
            idx = rng.choice(len(self.states), size=count, p=np.asarray(self.probabilities))
            return [self.states[i] for i in idx]
        scale = math.sqrt(self.transmissivity)
        if self.kind is EnsembleKind.BPSK:
            signs = rng.integers(0, 2, size=count) * 2 - 1
            amp = math.sqrt(self.mean_photon)
            alphas = signs * amp * scale
        else:
            sigma = math.sqrt(self.mean_photon / 2.0)
            alphas = (rng.normal(0.0, sigma, count) + 1j * rng.normal(0.0, sigma, count)) * scale
        return [coherent_state(a, d, tolerance) for a in alphas]


def expected_state(ens: EnsembleSpec, d: int) -> np.ndarray:
    """Average output density matrix in the truncated number basis.

    The Gaussian ensemble averages to a thermal state, which is returned
    directly as its (truncated) diagonal.
    """
    if d < 1:
        raise DomainError("truncation dimension must be >= 1")
    if ens.kind is EnsembleKind.COHERENT_GAUSSIAN:
        x = ens.received_photon
        diag = np.zeros(d)
        if x == 0.0:
            diag[0] = 1.0
        else:
            diag[:] = thermal_diagonal(x, d)
        return np.diag(diag).astype(complex)
    if ens.kind is EnsembleKind.BPSK:
        amp = math.sqrt(ens.received_photon)
        states = (coherent_state(amp, d), coherent_state(-amp, d))
        weights = (0.5, 0.5)
    else:
        states, weights = ens.states, ens.probabilities
        if states[0].dim != d:
            raise DomainError(f"finite ensemble has dimension {states[0].dim}, not {d}")
    rho = np.zeros((d, d), dtype=complex)
    for w, s in zip(weights, states):
        rho += w * s.projector()
    return rho


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def spectrum_of(rho: np.ndarray, floor: float = 1e-15) -> DiscreteDistribution:
    """Eigenvalue distribution of ``rho``; eigenvalues at or below ``floor`` are dropped and
    the missing trace becomes ``tail_bound``."""
    w = np.linalg.eigvalsh(hermitize(rho))
    w = w[w > floor]
    total = math.fsum(w)
    if total > 1.0:
        w = w / total
        total = 1.0
    return DiscreteDistribution.from_probs(w[::-1], tail_bound=max(0.0, 1.0 - total))


@dataclass(frozen=True)
class GammaProjector:
    matrix: np.ndarray
    trace_with_rho: float
    rank: int


def gamma_projector(rho: np.ndarray, gamma: float, rtol: float = PROJ_RTOL) -> GammaProjector:
    """Projector onto eigenvectors of ``rho`` with eigenvalue ``<= 2**-gamma``.

    Eigenvalues within relative ``rtol`` of the threshold count as passing,
    so that a threshold placed exactly on an eigenvalue keeps it.
    """
    w, v = np.linalg.eigh(hermitize(rho))
    threshold = 2.0**-gamma
    keep = w <= threshold * (1.0 + rtol)
    vk = v[:, keep]
    proj = vk @ vk.conj().T
    return GammaProjector(proj, float(np.sum(w[keep])), int(keep.sum()))


def project_normalize(state: FockVector, proj: np.ndarray) -> tuple[FockVector, float]:
    """Normalized ``P|phi>`` together with the pre-normalization norm."""
    out = proj @ state.amplitudes
    norm = float(np.linalg.norm(out))
    if norm <= ZERO_PROJECTION:
        raise DegenerateCodewordError("codeword has zero projection onto the gamma subspace")
    return FockVector(out / norm), norm


@dataclass(frozen=True)
class POVM:
    """Square-root-measurement elements plus the completion ``I - sum(elements)``."""

    elements: np.ndarray
    completion: np.ndarray

    @property
    def size(self) -> int:
        return self.elements.shape[0]

    def total(self) -> np.ndarray:
        return self.elements.sum(axis=0) + self.completion


def inverse_sqrt_on_range(s: np.ndarray, rtol: float = PINV_RTOL) -> np.ndarray:
    w, v = np.linalg.eigh(hermitize(s))
    top = w.max() if w.size else 0.0
    inv = np.zeros_like(w)
    mask = w > rtol * top
    inv[mask] = 1.0 / np.sqrt(w[mask])
    return (v * inv) @ v.conj().T


def srm(vectors: Sequence[FockVector | np.ndarray]) -> POVM:
    """Square-root measurement for the given (projected, normalized) codeword vectors.

    Zero vectors are allowed and receive the zero element.
    """
    if len(vectors) == 0:
        raise DomainError("square-root measurement needs at least one vector")
    cols = np.column_stack(
        [v.amplitudes if isinstance(v, FockVector) else np.asarray(v, dtype=complex) for v in vectors]
    )
    s_inv_half = inverse_sqrt_on_range(cols @ cols.conj().T)
    pretty = s_inv_half @ cols
    elements = np.einsum("im,jm->mij", pretty, pretty.conj())
    completion = np.eye(cols.shape[0], dtype=complex) - elements.sum(axis=0)
    return POVM(elements, hermitize(completion))


@dataclass(frozen=True)
class Codebook:
    codewords: tuple[FockVector, ...]
    ensemble: EnsembleSpec | None = None
    seed: int | None = None

    def __post_init__(self):
        if len(self.codewords) < 1:
            raise DomainError("a codebook needs at least one codeword")

    @property
    def size(self) -> int:
        return len(self.codewords)


def success_probabilities(cb: Codebook, povm: POVM) -> np.ndarray:
    """``Tr{Lambda_m phi_m}`` for each message."""
    if povm.size != cb.size:
        raise DomainError("POVM and codebook sizes differ")
    psi = np.column_stack([c.amplitudes for c in cb.codewords])
    return np.real(np.einsum("im,mij,jm->m", psi.conj(), povm.elements, psi))


def average_error(cb: Codebook, povm: POVM) -> float:
    """``1 - mean_m Tr{Lambda_m phi_m}``; the completion outcome counts as an error."""
    return float(1.0 - np.mean(success_probabilities(cb, povm)))


def hn_constants(c: float) -> tuple[float, float]:
    if c <= 0.0:
        raise DomainError("c must be > 0")
    return 1.0 + c, 2.0 + c + 1.0 / c


def hn_check(target: FockVector, others: Sequence[FockVector], c: float) -> float:
    """Smallest eigenvalue of ``c_I (I - phi) + c_II sum(others) - (I - Lambda_target)``.

    The square-root measurement is built from ``[target, *others]``.
    """
    c_one, c_two = hn_constants(c)
    povm = srm([target, *others])
    d = target.dim
    eye = np.eye(d, dtype=complex)
    lhs = eye - povm.elements[0]
    rhs = c_one * (eye - target.projector())
    for o in others:
        rhs = rhs + c_two * o.projector()
    return float(np.linalg.eigvalsh(hermitize(rhs - lhs))[0])


@dataclass
class TrialResult:
    error: float
    type_one: float
    collision: float | None
    degenerate: int
    max_norm_defect: float


@dataclass
class Theorem1Report:
    """Summary of a Monte Carlo run over random codebooks."""

    ensemble: str
    mean_photon: float
    transmissivity: float
    M: int
    eps: float
    eta_slack: float
    d: int
    trials: int
    seed: int
    gamma: float
    gamma_exact: bool
    achieved_mass: float
    spectrum_tail: float
    acceptance_slack: float
    tr_pi_rho: float
    c: float
    c_one: float
    c_two: float
    analytic_bound: float
    one_shot_log_m_bound: float
    mean_error: float
    stderr_error: float
    ci99_error: tuple[float, float]
    upper99_error: float
    mean_type_one: float
    stderr_type_one: float
    upper99_type_one: float
    mean_collision: float | None
    stderr_collision: float | None
    upper99_collision: float | None
    collision_bound: float
    degenerate_codewords: int
    max_norm_defect: float
    bound_holds: bool
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["ci99_error"] = list(self.ci99_error)
        return out


def _run_trial(
    ens: EnsembleSpec, M: int, d: int, proj: np.ndarray, seed: int, trial: int, tolerance: float
) -> TrialResult:
    rng = np.random.default_rng(np.random.SeedSequence([seed, trial]))
    words = ens.sample(rng, M, d, tolerance)
    projected = []
    degenerate = np.zeros(M, dtype=bool)
    type_one = np.empty(M)
    for m, w in enumerate(words):
        try:
            pv, norm = project_normalize(w, proj)
        except DegenerateCodewordError:
            degenerate[m] = True
            projected.append(np.zeros(d, dtype=complex))
            type_one[m] = 1.0
            continue
        projected.append(pv.amplitudes)
        # |<phi^g|phi>|^2 = <phi|P|phi> = norm^2
        type_one[m] = 1.0 - norm * norm
    povm = srm(projected)
    succ = success_probabilities(Codebook(tuple(words)), povm)
    succ[degenerate] = 0.0
    collision = None
    if M > 1:
        psi = np.column_stack([w.amplitudes for w in words])
        proj_cols = np.column_stack(projected)
        overlaps = np.abs(proj_cols.conj().T @ psi) ** 2
        off = ~np.eye(M, dtype=bool)
        collision = float(overlaps[off].mean())
    return TrialResult(
        float(1.0 - succ.mean()),
        float(type_one.mean()),
        collision,
        int(degenerate.sum()),
        max(w.norm_defect for w in words),
    )


def _mean_se(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else math.inf
    return mean, se


def theorem1_verify(
    ens: EnsembleSpec,
    M: int,
    eps: float,
    eta_slack: float,
    d: int,
    trials: int,
    seed: int,
    workers: int = 1,
    defect_tolerance: float = DEFECT_TOL,
) -> Theorem1Report:
    """Estimate the expected average error of random codes decoded by the projected SRM.

    ``gamma`` is the spectral inf-entropy of the average output state at
    level ``eps - eta_slack``; the tuning constant is
    ``c = eta_slack / (2 eps - eta_slack)``.  Trial ``k`` draws its codebook
    from ``SeedSequence([seed, k])``, so the report does not depend on
    ``workers``.

    Gaussian amplitudes are unbounded, so sampled codewords may lose up to
    ``defect_tolerance`` of their norm to truncation; the largest observed
    defect ``delta`` moves any error probability by at most ``2 sqrt(delta)``
    and is added to the acceptance slack.  Larger defects abort the run.
    """
    if not 0.0 < eta_slack < eps < 1.0:
        raise DomainError("need 0 < eta_slack < eps < 1")
    if M < 1 or trials < 1:
        raise DomainError("M and trials must be >= 1")
    notes: list[str] = []
    rho = expected_state(ens, d)
    spec = spectrum_of(rho)
    level = eps - eta_slack
    res = spectral_inf_entropy(surprisal_of(spec), level)
    gamma = res.value
    if not res.exact:
        notes.append("truncation tail may shift gamma; bound checked with tail slack")
    proj = gamma_projector(rho, gamma)
    c = eta_slack / (2.0 * eps - eta_slack)
    c_one, c_two = hn_constants(c)
    bound = c_one * level + c_two * M * 2.0**-gamma
    one_shot = gamma - math.log2(4.0 * eps / eta_slack**2)

    def job(k: int) -> TrialResult:
        return _run_trial(ens, M, d, proj.matrix, seed, k, defect_tolerance)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(trials)))
    else:
        results = [job(k) for k in range(trials)]

    z2 = normal_cdf_inv(0.995)
    z1 = normal_cdf_inv(0.99)
    mean_err, se_err = _mean_se([r.error for r in results])
    mean_t1, se_t1 = _mean_se([r.type_one for r in results])
    if M > 1:
        mean_col, se_col = _mean_se([r.collision for r in results])
        upper_col = mean_col + z1 * se_col
    else:
        mean_col = se_col = upper_col = None
    max_defect = max(r.max_norm_defect for r in results)
    if max_defect > 0.0:
        notes.append(f"largest codeword truncation defect {max_defect:.3g}")
    upper = mean_err + z1 * se_err
    tail_slack = spec.tail_bound + 2.0 * math.sqrt(max_defect)
    return Theorem1Report(
        ensemble=ens.kind.value,
        mean_photon=ens.mean_photon,
        transmissivity=ens.transmissivity,
        M=M,
        eps=eps,
        eta_slack=eta_slack,
        d=d,
        trials=trials,
        seed=seed,
        gamma=gamma,
        gamma_exact=res.exact,
        achieved_mass=res.achieved_mass,
        spectrum_tail=spec.tail_bound,
        acceptance_slack=tail_slack,
        tr_pi_rho=proj.trace_with_rho,
        c=c,
        c_one=c_one,
        c_two=c_two,
        analytic_bound=bound,
        one_shot_log_m_bound=one_shot,
        mean_error=mean_err,
        stderr_error=se_err,
        ci99_error=(mean_err - z2 * se_err, mean_err + z2 * se_err),
        upper99_error=upper,
        mean_type_one=mean_t1,
        stderr_type_one=se_t1,
        upper99_type_one=mean_t1 + z1 * se_t1,
        mean_collision=mean_col,
        stderr_collision=se_col,
        upper99_collision=upper_col,
        collision_bound=2.0**-gamma,
        degenerate_codewords=sum(r.degenerate for r in results),
        max_norm_defect=max_defect,
        bound_holds=mean_err <= bound + z1 * se_err + tail_slack,
        notes=notes,
    )
