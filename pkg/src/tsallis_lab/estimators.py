"""Query-model affinity estimation.

The pipeline mirrors the textbook recipe: two bounded polynomials turn
block-encodings of ``ρ`` and ``σ`` into one of ``(1/4) p₁(ρ) p₂(σ)``, a
Hadamard test converts its trace against ``ρ`` into an outcome probability,
and amplitude estimation reads that probability off.  Amplitude estimation is
simulated by sampling the canonical phase-estimation outcome distribution.
"""

from __future__ import annotations

import functools
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import blockenc
from .densityops import (DensityOperator, affinity_exact, hellinger_exact, tsallis_exact,
                         _check_same_dim)
from .errors import InvalidArgumentError
from .polyapprox import ApproxPolynomial, build_neg_power_poly, build_pos_power_poly

QAE_WINDOW = 1 << 18


# -- schedules --------------------------------------------------------------


@dataclass(frozen=True)
class ParameterSchedule:
    """Tolerances of one estimator run, after the ``α < 1/2`` swap."""

    mode: str
    alpha: float
    alpha_effective: float
    swapped: bool
    r: int
    eps: float
    eps1: float
    eps2: float
    epsH: float
    delta1: float
    delta1p: float
    delta2p: float
    delta: float = 0.0
    k_repetitions: int = 0
    d1: int = 0
    d2: int = 0

    def with_degrees(self, d1: int, d2: int) -> "ParameterSchedule":
        return ParameterSchedule(**{**asdict(self), "d1": d1, "d2": d2})


def _check_common(alpha: float, r: int, eps: float) -> None:
    if not 0 < alpha < 1:
        raise InvalidArgumentError(f"alpha must lie in (0, 1), got {alpha}")
    if r < 1:
        raise InvalidArgumentError(f"rank bound must be positive, got {r}")
    if not 0 < eps < 1:
        raise InvalidArgumentError(f"eps must lie in (0, 1), got {eps}")


def query_schedule(alpha: float, r: int, eps: float) -> ParameterSchedule:
    """Tolerances of the query algorithm for ``(α, r, ε)``."""
    _check_common(alpha, r, eps)
    swapped = alpha < 0.5
    a = 1.0 - alpha if swapped else alpha
    root = eps ** (1.0 / a) / 16.0 ** (1.0 / a)
    eps1 = root / r
    return ParameterSchedule(
        mode="query", alpha=alpha, alpha_effective=a, swapped=swapped, r=r, eps=eps,
        eps1=eps1, delta1=eps1, eps2=r ** (a - 1.0) * eps / 8.0,
        epsH=root / (8.0 * r ** (1.0 - a)),
        delta1p=root / (16.0 * r ** (1.0 - a)), delta2p=root / (16.0 * r ** (1.0 - a)))


def hoeffding_repetitions(eps_h: float, c1: float = 8.0) -> int:
    return math.ceil(c1 / (eps_h * eps_h))


def sample_schedule(alpha: float, r: int, eps: float, c1: float = 8.0) -> ParameterSchedule:
    """Tolerances of the sample algorithm for ``(α, r, ε)``; ``k = ⌈c₁/ε_H²⌉``."""
    _check_common(alpha, r, eps)
    swapped = alpha < 0.5
    a = 1.0 - alpha if swapped else alpha
    root = eps ** (1.0 / a) / 40.0 ** (1.0 / a)
    eps_h = root / (256.0 * r ** (1.0 - a))
    dp = root / (128.0 * r ** (1.0 - a))
    return ParameterSchedule(
        mode="sample", alpha=alpha, alpha_effective=a, swapped=swapped, r=r, eps=eps,
        eps1=root / r, delta1=root / r, eps2=r ** (a - 1.0) * eps / 8.0, epsH=eps_h,
        delta1p=dp, delta2p=dp, delta=eps_h, k_repetitions=hoeffding_repetitions(eps_h, c1))


def query_error_total_bound(s: ParameterSchedule) -> float:
    """Deterministic-plus-estimation error budget of the query algorithm."""
    a, r, d = s.alpha_effective, s.r, s.delta1
    return ((16.0 / d ** (1 - a)) * (2 * s.epsH + s.delta1p + s.delta2p)
            + (r * s.eps2 + r ** a / 2) * (6 * d ** a + 4 * s.eps1 / d ** (1 - a))
            + 2 * r ** (1 - a) * s.eps2)


def sample_error_total_bound(s: ParameterSchedule) -> float:
    """Deterministic-plus-estimation error budget of the sample algorithm."""
    a, r, d = s.alpha_effective, s.r, s.delta1
    return ((16.0 / d ** (1 - a)) * (2 * (s.epsH + s.delta) + s.delta1p + s.delta2p)
            + (r * s.eps2 + 2 ** (a - 2) * r ** a) * (16 * d ** a + 4 * s.eps1 / d ** (1 - a))
            + 2 ** (2 - a) * r ** (1 - a) * s.eps2)


# -- polynomials (cached; construction dominates small runs) ----------------


@functools.lru_cache(maxsize=64)
def neg_power_poly(c: float, delta: float, eps: float) -> ApproxPolynomial:
    return build_neg_power_poly(c, delta, eps)


@functools.lru_cache(maxsize=64)
def pos_power_poly(beta: float, eps: float) -> ApproxPolynomial:
    return build_pos_power_poly(beta, eps)


# -- ledgers and outcomes ---------------------------------------------------


@dataclass
class QueryLedger:
    """Oracle uses, including controlled and inverse ones."""

    queries_rho: int = 0
    queries_sigma: int = 0

    def charge(self, rho: int = 0, sigma: int = 0) -> None:
        if rho < 0 or sigma < 0:
            raise InvalidArgumentError("ledger charges must be nonnegative")
        self.queries_rho += int(rho)
        self.queries_sigma += int(sigma)

    @property
    def total(self) -> int:
        return self.queries_rho + self.queries_sigma


@dataclass
class EstimateOutcome:
    value: float
    oracle_value: float
    schedule: ParameterSchedule
    ledger: object
    trial_seed: int | None = None
    wall_ms: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def abs_error(self) -> float:
        return abs(self.value - self.oracle_value)

    @property
    def clamped(self) -> float:
        return min(max(self.value, 0.0), 1.0)


# -- Hadamard test and amplitude estimation ---------------------------------


def hadamard_test_prob(be: blockenc.BlockEncoding, rho) -> float:
    """Outcome-0 probability ``(1 + Re tr(A ρ))/2`` of the Hadamard test."""
    rho_m = np.asarray(rho, dtype=complex)
    if rho_m.shape[0] != be.system_dim:
        raise InvalidArgumentError(
            f"state dimension {rho_m.shape[0]} does not match block dimension {be.system_dim}")
    if abs(be.scale - 1.0) > 1e-12:
        raise InvalidArgumentError(f"Hadamard test needs scale 1, got {be.scale}")
    t = np.trace(blockenc.encoded_block(be) @ rho_m).real
    return float(min(max((1.0 + t) / 2.0, 0.0), 1.0))


def qae_grid_size(eps: float) -> int:
    return max(4, 2 ** math.ceil(math.log2(math.pi / eps)))


def qae_rounds(delta: float) -> int:
    return max(1, math.ceil(18.0 * math.log(1.0 / delta)))


def _fejer_window(frac: float, m: int, half: int) -> tuple[np.ndarray, np.ndarray]:
    """Offsets ``j`` and probabilities ``F((j − frac)/M)`` in a window around the peak."""
    j = np.arange(-half + 1, half + 1)
    if frac == 0.0:
        return np.array([0]), np.array([1.0])
    num = math.sin(math.pi * frac) ** 2
    den = (m * np.sin(np.pi * (j - frac) / m)) ** 2
    pmf = num / den
    return j, pmf / pmf.sum()


def qae_sample(p_true: float, m: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` canonical amplitude-estimation estimates ``sin²(πy/M)``.

    The outcome ``y`` follows ``½F(y/M − ω) + ½F(y/M + ω)`` with
    ``ω = arcsin(√p)/π`` and ``F`` the Fejér kernel.  Each peak is sampled
    within ``±QAE_WINDOW`` grid points; the mass outside is below 1e-6.
    """
    omega = math.asin(math.sqrt(min(max(p_true, 0.0), 1.0))) / math.pi
    half = min(m // 2, QAE_WINDOW)
    out = np.empty(size)
    signs = rng.integers(0, 2, size=size)
    for s, sign in ((0, 1.0), (1, -1.0)):
        mask = signs == s
        cnt = int(mask.sum())
        if cnt == 0:
            continue
        center = sign * omega * m
        base = math.floor(center)
        frac = center - base
        if frac > 1.0 - 1e-12:
            base, frac = base + 1, 0.0
        elif frac < 1e-12:
            frac = 0.0
        j, pmf = _fejer_window(frac, m, half)
        cdf = np.cumsum(pmf)
        picks = np.searchsorted(cdf, rng.random(cnt) * cdf[-1], side="right")
        y = (base + j[np.minimum(picks, len(j) - 1)]) % m
        out[mask] = np.sin(np.pi * y / m) ** 2
    return out


def amp_est(p_true: float, eps: float, delta: float, rng: np.random.Generator,
            ledger: QueryLedger | None = None, cost: tuple[int, int] = (1, 0)) -> float:
    """Median of ``⌈18 ln(1/δ)⌉`` simulated amplitude-estimation rounds.

    Every round uses the state-preparation unitary ``M`` times; each use is
    charged ``cost = (queries to ρ, queries to σ)``.
    """
    if not (0 < eps < 1 and 0 < delta < 1):
        raise InvalidArgumentError(f"eps and delta must lie in (0, 1), got {eps}, {delta}")
    m = qae_grid_size(eps)
    rounds = qae_rounds(delta)
    if ledger is not None:
        ledger.charge(rounds * m * cost[0], rounds * m * cost[1])
    return float(np.median(qae_sample(p_true, m, rounds, rng)))


# -- Algorithm 1 ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Pipeline:
    """Deterministic part of one estimator run."""

    schedule: ParameterSchedule
    rho: DensityOperator
    sigma: DensityOperator
    p1: ApproxPolynomial
    p2: ApproxPolynomial


def _oriented(rho, sigma, schedule):
    return (sigma, rho) if schedule.swapped else (rho, sigma)


def _check_inputs(rho: DensityOperator, sigma: DensityOperator, r: int) -> None:
    _check_same_dim(rho, sigma)
    worst = max(rho.rank, sigma.rank)
    if worst > r:
        raise InvalidArgumentError(f"input rank {worst} exceeds the rank bound r = {r}")


def query_pipeline(rho: DensityOperator, sigma: DensityOperator, r: int, eps: float,
                   alpha: float) -> Pipeline:
    _check_inputs(rho, sigma, r)
    s = query_schedule(alpha, r, eps)
    a = s.alpha_effective
    p1 = neg_power_poly(1.0 - a, s.delta1, s.eps1)
    p2 = pos_power_poly(1.0 - a, s.eps2)
    rho_e, sigma_e = _oriented(rho, sigma, s)
    return Pipeline(s.with_degrees(p1.degree, p2.degree), rho_e, sigma_e, p1, p2)


def product_encoding(rho_be: blockenc.BlockEncoding, sigma_be: blockenc.BlockEncoding,
                     pipe: Pipeline, rng: np.random.Generator | None) -> blockenc.BlockEncoding:
    """Encoding of ``(1/4) p₁(·) p₂(·)`` with the schedule's injected errors."""
    s = pipe.schedule
    u1 = blockenc.eigen_transform(rho_be, pipe.p1.scaled(0.5), s.delta1p, rng)
    u2 = blockenc.eigen_transform(sigma_be, pipe.p2.scaled(0.5), s.delta2p, rng)
    return blockenc.block_product(u1, u2)


def query_costs(pipe: Pipeline) -> tuple[int, int]:
    """Queries per Hadamard-test use, mapped back to the caller's ρ and σ.

    The transformed encodings call their density encoding ``d`` times, and
    each density encoding calls its oracle twice (``O`` and ``O†``); one more
    call to ``O_ρ`` prepares the test input.
    """
    c_first = 2 * pipe.schedule.d1 + 1
    c_second = 2 * pipe.schedule.d2
    return (c_second, c_first) if pipe.schedule.swapped else (c_first, c_second)


def affinity_est_q(rho: DensityOperator, sigma: DensityOperator, r: int, eps: float,
                   alpha: float, rng: np.random.Generator, trial_seed: int | None = None
                   ) -> EstimateOutcome:
    """Query-model estimate of ``tr(ρ^α σ^(1−α))`` within ``eps`` w.p. ≥ 2/3."""
    start = time.perf_counter()
    pipe = query_pipeline(rho, sigma, r, eps, alpha)
    s = pipe.schedule
    rho_be = blockenc.density_block_encoding(blockenc.purified_oracle(pipe.rho))
    sigma_be = blockenc.density_block_encoding(blockenc.purified_oracle(pipe.sigma))
    prod = product_encoding(rho_be, sigma_be, pipe, rng)
    p0 = hadamard_test_prob(prod, pipe.rho.entries)
    ledger = QueryLedger()
    x = amp_est(p0, s.epsH, 0.25, rng, ledger, query_costs(pipe))
    value = 16.0 * s.delta1 ** (s.alpha_effective - 1.0) * (2.0 * x - 1.0)
    return EstimateOutcome(
        value=value, oracle_value=affinity_exact(rho, sigma, alpha), schedule=s, ledger=ledger,
        trial_seed=trial_seed, wall_ms=(time.perf_counter() - start) * 1e3,
        extras={"p0": p0, "x": x})


def tsallis_from_affinity(outcome: EstimateOutcome, rho, sigma, alpha: float) -> EstimateOutcome:
    return EstimateOutcome(
        value=(1.0 - outcome.value) / (1.0 - alpha), oracle_value=tsallis_exact(rho, sigma, alpha),
        schedule=outcome.schedule, ledger=outcome.ledger, trial_seed=outcome.trial_seed,
        wall_ms=outcome.wall_ms, extras={**outcome.extras, "affinity": outcome.value})


def tsallis_est_q(rho, sigma, r: int, eps: float, alpha: float, rng: np.random.Generator,
                  trial_seed: int | None = None) -> EstimateOutcome:
    """Tsallis relative entropy within ``eps`` via affinity precision ``(1−α)ε``."""
    a = affinity_est_q(rho, sigma, r, (1.0 - alpha) * eps, alpha, rng, trial_seed)
    return tsallis_from_affinity(a, rho, sigma, alpha)


# -- tolerant certification -------------------------------------------------


@dataclass
class CertificationResult:
    decision: str
    d_hat: float
    midpoint: float
    oracle_hellinger: float
    estimate: EstimateOutcome


def certification_precision(eps1_thr: float, eps2_thr: float) -> float:
    if not 0 <= eps1_thr < eps2_thr <= 1:
        raise InvalidArgumentError(
            f"thresholds must satisfy 0 <= eps1 < eps2 <= 1, got {eps1_thr}, {eps2_thr}")
    return (eps2_thr - eps1_thr) ** 2 / 9.0


def decide(estimate: EstimateOutcome, rho, sigma, eps1_thr: float,
           eps2_thr: float) -> CertificationResult:
    d_hat = math.sqrt(max(0.0, 1.0 - estimate.value))
    mid = (eps1_thr + eps2_thr) / 2.0
    return CertificationResult("close" if d_hat <= mid else "far", d_hat, mid,
                               hellinger_exact(rho, sigma), estimate)


def hellinger_certify_q(rho, sigma, r: int, eps1_thr: float, eps2_thr: float,
                        rng: np.random.Generator, trial_seed: int | None = None
                        ) -> CertificationResult:
    """Decide ``d_H ≤ eps1_thr`` versus ``d_H ≥ eps2_thr`` from query access."""
    prec = certification_precision(eps1_thr, eps2_thr)
    est = affinity_est_q(rho, sigma, r, prec, 0.5, rng, trial_seed)
    return decide(est, rho, sigma, eps1_thr, eps2_thr)
