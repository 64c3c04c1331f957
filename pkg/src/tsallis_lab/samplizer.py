"""Sample-access machinery and the sample-model affinity estimator.

Channels are held as superoperators in the row-major vectorization
``vec(X)[i·d + j] = X[i, j]``, so conjugation by ``U`` is ``U ⊗ conj(U)``.
Choi matrices are unnormalized, ``J = Σ |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)`` with trace ``d``
for trace-preserving ``Φ``.

A query circuit is samplized by replacing each oracle call with an
approximating channel.  In ``ideal`` mode the oracle is an exact one-ancilla
block-encoding of ``ρ_j/2`` followed by global depolarizing noise whose
strength makes the per-call Choi bound equal ``δ/Q``.  In ``lmr`` mode the
oracle is ``exp(−iρ_j t)`` and each call is realized by ``m`` partial-swap
steps with fresh copies of ``ρ_j``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import blockenc
from .densityops import DensityOperator, affinity_exact, as_matrix, num_qubits
from .errors import InvalidArgumentError
from .estimators import (CertificationResult, EstimateOutcome, ParameterSchedule,
                         certification_precision, decide, hadamard_test_prob, neg_power_poly,
                         pos_power_poly, sample_schedule, tsallis_from_affinity, _check_inputs,
                         _oriented)

DEFAULT_C0 = 16
LMR_CALIBRATION_STEPS = 16
LMR_MAX_VERIFIED_STEPS = 1 << 16
_INT64_SAFE = 1 << 62


# -- ledgers ----------------------------------------------------------------


@dataclass
class SampleLedger:
    """Copies of each state consumed; ``c0`` is the per-query cost constant."""

    samples_rho: int = 0
    samples_sigma: int = 0
    c0: int = DEFAULT_C0

    def charge(self, rho: int = 0, sigma: int = 0) -> None:
        if rho < 0 or sigma < 0:
            raise InvalidArgumentError("ledger charges must be nonnegative")
        self.samples_rho += int(rho)
        self.samples_sigma += int(sigma)

    def charge_index(self, j: int, count: int) -> None:
        if j == 0:
            self.charge(rho=count)
        elif j == 1:
            self.charge(sigma=count)
        else:
            raise InvalidArgumentError(f"a sample ledger tracks two states, got index {j}")

    @property
    def total(self) -> int:
        return self.samples_rho + self.samples_sigma


def sample_charge(eps: float, c0: int = DEFAULT_C0) -> int:
    """Copies consumed by one samplized query at deviation ``eps``: ``⌈c₀ (1/ε) ln²(1/ε)⌉``."""
    if not 0 < eps < 1:
        raise InvalidArgumentError(f"per-query deviation must lie in (0, 1), got {eps}")
    return math.ceil(c0 * (1.0 / eps) * math.log(1.0 / eps) ** 2)


# -- channels ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ChannelApprox:
    representation: np.ndarray = field(repr=False)  # Choi matrix
    claimed_deviation: float = 0.0
    sample_cost: int = 0

    @property
    def dim(self) -> int:
        return math.isqrt(self.representation.shape[0])

    @property
    def superoperator(self) -> np.ndarray:
        return choi_to_superop(self.representation)


def superop_to_choi(s: np.ndarray) -> np.ndarray:
    d = math.isqrt(s.shape[0])
    return s.reshape(d, d, d, d).transpose(2, 0, 3, 1).reshape(d * d, d * d)


def choi_to_superop(j: np.ndarray) -> np.ndarray:
    d = math.isqrt(j.shape[0])
    return j.reshape(d, d, d, d).transpose(1, 3, 0, 2).reshape(d * d, d * d)


def unitary_superop(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj())


def depolarizing_superop(dim: int, p: float) -> np.ndarray:
    """``X ↦ (1 − p) X + p tr(X) I/dim``."""
    eye = np.eye(dim).reshape(dim * dim)
    return (1.0 - p) * np.eye(dim * dim) + p * np.outer(eye, eye) / dim


def channel(superop: np.ndarray, deviation: float = 0.0, cost: int = 0) -> ChannelApprox:
    return ChannelApprox(superop_to_choi(superop), deviation, cost)


def apply_superop(s: np.ndarray, x: np.ndarray) -> np.ndarray:
    d = x.shape[0]
    return (s @ x.reshape(d * d)).reshape(d, d)


def check_channel(ch: ChannelApprox, tol: float = 1e-9) -> None:
    """Complete positivity and trace preservation within ``tol``."""
    j = ch.representation
    herm = (j + j.conj().T) / 2
    if np.linalg.eigvalsh(herm).min() < -tol:
        raise InvalidArgumentError("channel is not completely positive")
    d = ch.dim
    partial = np.trace(j.reshape(d, d, d, d), axis1=1, axis2=3)
    if np.max(np.abs(partial - np.eye(d))) > tol:
        raise InvalidArgumentError("channel is not trace preserving")


def channel_distance_upper(e: ChannelApprox, f: ChannelApprox) -> float:
    """Choi bound ``‖J(E) − J(F)‖₁`` on the diamond distance.

    With trace-one Choi states this is ``dim · ‖Ĵ(E) − Ĵ(F)‖₁``.
    """
    diff = e.representation - f.representation
    return float(np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2))))


def channel_distance_lower(e: ChannelApprox, f: ChannelApprox, rng: np.random.Generator,
                           trials: int = 200) -> float:
    """Largest output trace distance over random pure inputs (times 2)."""
    se, sf = e.superoperator, f.superoperator
    d = e.dim
    best = 0.0
    for _ in range(trials):
        v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        v /= np.linalg.norm(v)
        x = np.outer(v, v.conj())
        diff = apply_superop(se, x) - apply_superop(sf, x)
        best = max(best, float(np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2)))))
    return best


def depolarizing_choi_bound(dim: int) -> float:
    """``channel_distance_upper`` of full depolarizing versus identity on ``dim`` levels."""
    return 2.0 * (dim * dim - 1) / dim


# -- LMR density-matrix exponentiation --------------------------------------


def _swap(d: int) -> np.ndarray:
    idx = np.arange(d * d).reshape(d, d).T.reshape(d * d)
    s = np.zeros((d * d, d * d))
    s[np.arange(d * d), idx] = 1.0
    return s


def _controlled(u: np.ndarray) -> np.ndarray:
    d = u.shape[0]
    out = np.eye(2 * d, dtype=complex)
    out[d:, d:] = u
    return out


def lmr_step_superop(rho, tau: float, controlled: bool = False) -> np.ndarray:
    """One partial-swap step ``X ↦ tr₂[e^{−iτG}(X ⊗ ρ)e^{iτG}]``, ``G`` the swap
    (or control ⊗ swap)."""
    rho = as_matrix(rho)
    d = rho.shape[0]
    s = _swap(d)
    u = math.cos(tau) * np.eye(d * d) - 1j * math.sin(tau) * s
    if controlled:
        u = _controlled(u)
    dx = 2 * d if controlled else d
    out = np.empty((dx * dx, dx * dx), dtype=complex)
    for col in range(dx * dx):
        e = np.zeros(dx * dx, dtype=complex)
        e[col] = 1.0
        x = np.kron(e.reshape(dx, dx), rho)
        y = (u @ x @ u.conj().T).reshape(dx, d, dx, d)
        out[:, col] = np.trace(y, axis1=1, axis2=3).reshape(dx * dx)
    return out


def exp_unitary(rho, t: float, controlled: bool = False) -> np.ndarray:
    u = scipy.linalg.expm(-1j * t * as_matrix(rho))
    return _controlled(u) if controlled else u


def lmr_channel(rho, t: float, m: int, ledger: SampleLedger | None = None, index: int = 0,
                controlled: bool = False) -> ChannelApprox:
    """``m`` partial-swap steps with ``τ = t/m`` approximating conjugation by ``e^{−iρt}``.

    Consumes ``m`` copies of ``ρ`` (charged to ``ledger`` under ``index``).
    """
    if m <= 0:
        raise InvalidArgumentError(f"step count must be positive, got {m}")
    step = lmr_step_superop(rho, t / m, controlled)
    s = np.linalg.matrix_power(step, m)
    exact = unitary_superop(exp_unitary(rho, t, controlled))
    ch = channel(s, cost=m)
    dev = channel_distance_upper(ch, channel(exact))
    if ledger is not None:
        ledger.charge_index(index, m)
    return ChannelApprox(ch.representation, dev, m)


def lmr_error_constant(rho, t: float = 1.0, controlled: bool = False) -> float:
    """``C`` in ``deviation ≈ C/m``, measured at ``m = LMR_CALIBRATION_STEPS``."""
    return lmr_channel(rho, t, LMR_CALIBRATION_STEPS, controlled=controlled).claimed_deviation \
        * LMR_CALIBRATION_STEPS


def lmr_steps_for(rho, t: float, eps: float, controlled: bool = False) -> int:
    """Smallest tested ``m`` whose measured deviation is at most ``eps``.

    Beyond ``LMR_MAX_VERIFIED_STEPS`` the ``C/m`` law is extrapolated, since the
    deviation there falls under double-precision resolution.
    """
    c = lmr_error_constant(rho, t, controlled)
    if c == 0.0:
        return 1
    m = max(1, math.ceil(c / eps))
    if m > LMR_MAX_VERIFIED_STEPS:
        return m
    while lmr_channel(rho, t, m, controlled=controlled).claimed_deviation > eps:
        m *= 2
    return m


# -- query circuits ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GateSlot:
    unitary: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class QuerySlot:
    """Call to oracle ``oracle`` on ``targets`` (qubit indices, most significant first)."""

    oracle: int
    targets: tuple[int, ...]
    control: int | None = None
    inverse: bool = False


@dataclass(frozen=True, eq=False)
class QueryCircuit:
    n_qubits: int
    slots: tuple = ()

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    @property
    def query_count(self) -> int:
        return sum(isinstance(s, QuerySlot) for s in self.slots)

    def query_counts(self, n_oracles: int) -> list[int]:
        counts = [0] * n_oracles
        for s in self.slots:
            if isinstance(s, QuerySlot):
                counts[s.oracle] += 1
        return counts


def embed_operator(op: np.ndarray, targets: tuple[int, ...], n_qubits: int) -> np.ndarray:
    """``op`` on the listed qubits, identity on the rest."""
    k = len(targets)
    if len(set(targets)) != k or any(not 0 <= q < n_qubits for q in targets):
        raise InvalidArgumentError(f"bad target qubits {targets} for {n_qubits} qubits")
    rest = [q for q in range(n_qubits) if q not in targets]
    order = list(targets) + rest
    full = np.kron(op, np.eye(2 ** (n_qubits - k)))
    t = full.reshape([2] * (2 * n_qubits))
    inv = np.argsort(order)
    axes = list(inv) + [n_qubits + i for i in inv]
    return t.transpose(axes).reshape(2 ** n_qubits, 2 ** n_qubits)


def embed_channel(s: np.ndarray, targets: tuple[int, ...], n_qubits: int) -> np.ndarray:
    """Superoperator of a local channel acting on ``targets`` (via Kraus operators)."""
    j = superop_to_choi(s)
    w, v = np.linalg.eigh((j + j.conj().T) / 2)
    d = math.isqrt(j.shape[0])
    out = np.zeros((4 ** n_qubits, 4 ** n_qubits), dtype=complex)
    for val, vec in zip(w, v.T):
        if val <= 1e-14:
            continue
        kraus = math.sqrt(val) * vec.reshape(d, d).T
        big = embed_operator(kraus, targets, n_qubits)
        out += np.kron(big, big.conj())
    return out


def _oracle_unitary(state: DensityOperator, slot: QuerySlot, mode: str, t: float) -> np.ndarray:
    if mode == "ideal":
        u = blockenc.exact_block_encoding(state.entries / 2.0).core
    else:
        u = exp_unitary(state.entries, -t if slot.inverse else t)
    if mode == "ideal" and slot.inverse:
        u = u.conj().T
    return u


def _slot_qubits(slot: QuerySlot) -> tuple[int, ...]:
    return ((slot.control,) if slot.control is not None else ()) + tuple(slot.targets)


def _validate(circuit: QueryCircuit, states, mode: str) -> None:
    if mode not in ("ideal", "lmr"):
        raise InvalidArgumentError(f"unknown samplizer mode {mode!r}")
    for s in circuit.slots:
        if isinstance(s, QuerySlot):
            if not 0 <= s.oracle < len(states):
                raise InvalidArgumentError(f"query marker references missing state {s.oracle}")
            need = states[s.oracle].n_qubits + (1 if mode == "ideal" else 0)
            if len(s.targets) != need:
                raise InvalidArgumentError(
                    f"oracle {s.oracle} acts on {need} qubits, marker lists {len(s.targets)}")
        elif s.unitary.shape != (circuit.dim, circuit.dim):
            raise InvalidArgumentError("gate does not act on the full register")


def exact_channel(circuit: QueryCircuit, states, mode: str = "ideal", t: float = 1.0
                  ) -> ChannelApprox:
    """Conjugation by the ideal query circuit."""
    _validate(circuit, states, mode)
    u = np.eye(circuit.dim, dtype=complex)
    for s in circuit.slots:
        if isinstance(s, GateSlot):
            g = s.unitary
        else:
            local = _oracle_unitary(states[s.oracle], s, mode, t)
            if s.control is not None:
                local = _controlled(local)
            g = embed_operator(local, _slot_qubits(s), circuit.n_qubits)
        u = g @ u
    return channel(unitary_superop(u))


def samplized_channel(circuit: QueryCircuit, states, delta: float, mode: str = "ideal",
                      ledger: SampleLedger | None = None, c0: int = DEFAULT_C0,
                      t: float = 1.0) -> ChannelApprox:
    """The channel ``F = G_Q ∘ E_Q ∘ … ∘ G_1 ∘ E_1 ∘ G_0`` with per-call deviation ``δ/Q``."""
    if not 0 < delta < 1:
        raise InvalidArgumentError(f"delta must lie in (0, 1), got {delta}")
    _validate(circuit, states, mode)
    q = circuit.query_count
    dim = circuit.dim
    s_total = np.eye(dim * dim, dtype=complex)
    if q == 0:
        for s in circuit.slots:
            s_total = unitary_superop(s.unitary) @ s_total
        return channel(s_total)
    eps = delta / q
    rest_dim = {}
    lmr_cache = {}
    cost = 0
    for s in circuit.slots:
        if isinstance(s, GateSlot):
            s_total = unitary_superop(s.unitary) @ s_total
            continue
        qubits = _slot_qubits(s)
        if mode == "ideal":
            local = _oracle_unitary(states[s.oracle], s, mode, t)
            if s.control is not None:
                local = _controlled(local)
            v = unitary_superop(embed_operator(local, qubits, circuit.n_qubits))
            noise = depolarizing_superop(dim, eps / depolarizing_choi_bound(dim))
            s_total = noise @ v @ s_total
            charge = sample_charge(eps, c0)
        else:
            # The Choi bound of a local channel grows by the dimension of the idle qubits.
            key = (s.oracle, s.control is not None, s.inverse)
            if key not in lmr_cache:
                rest_dim[key] = dim // 2 ** len(qubits)
                tt = -t if s.inverse else t
                m = lmr_steps_for(states[s.oracle].entries, tt, eps / rest_dim[key],
                                  s.control is not None)
                lmr_cache[key] = lmr_channel(states[s.oracle].entries, tt, m,
                                             controlled=s.control is not None)
            ch = lmr_cache[key]
            s_total = embed_channel(ch.superoperator, qubits, circuit.n_qubits) @ s_total
            charge = ch.sample_cost
        cost += charge
        if ledger is not None:
            ledger.charge_index(s.oracle, charge)
    return channel(s_total, deviation=delta, cost=cost)


def samplize(circuit: QueryCircuit, states, delta: float, input_state, mode: str = "ideal",
             rng: np.random.Generator | None = None, ledger: SampleLedger | None = None,
             c0: int = DEFAULT_C0) -> DensityOperator:
    """Apply the samplized circuit to ``input_state``.

    ``rng`` is accepted for interface symmetry; the channel itself is
    deterministic.
    """
    ch = samplized_channel(circuit, states, delta, mode, ledger, c0)
    x = as_matrix(input_state)
    if x.shape[0] != circuit.dim:
        raise InvalidArgumentError("input state does not match the circuit register")
    out = apply_superop(ch.superoperator, x)
    return DensityOperator((out + out.conj().T) / 2)


# -- Algorithm 2 ------------------------------------------------------------


def binomial_large(n: int, p: float, rng: np.random.Generator) -> int:
    """Binomial draw for ``n`` beyond the int64 range, as a sum of chunks."""
    total = 0
    while n > 0:
        chunk = min(n, _INT64_SAFE)
        total += int(rng.binomial(chunk, p))
        n -= chunk
    return total


def hadamard_register_qubits(product: blockenc.BlockEncoding) -> int:
    """Control + every (formal) ancilla + system."""
    return 1 + product.ancilla_qubits + product.system_qubits


def samplized_first_qubit_prob(p_one: float, queries: int, noise: float) -> float:
    """``Pr[1]`` after ``queries`` calls each followed by global depolarizing of strength ``noise``.

    Depolarizing commutes through unitaries, so the composite channel is
    ``(1 − noise)^Q · ideal + (1 − (1 − noise)^Q) · full depolarizing``.
    """
    keep = math.exp(queries * math.log1p(-noise))
    return keep * p_one + (1.0 - keep) / 2.0


def sample_ledger_closed_form(schedule: ParameterSchedule, c0: int = DEFAULT_C0
                              ) -> tuple[int, int]:
    """Ideal-mode copies of the caller's ``(ρ, σ)`` for a whole run.

    Each of the ``k`` repetitions samplizes a circuit with ``d₁`` calls to the
    first state and ``d₂`` to the second at deviation ``δ/(d₁+d₂)`` per call,
    plus one copy of the first state as the test input.
    """
    q = schedule.d1 + schedule.d2
    per = sample_charge(schedule.delta / q, c0)
    first = schedule.k_repetitions * (schedule.d1 * per + 1)
    second = schedule.k_repetitions * schedule.d2 * per
    return (second, first) if schedule.swapped else (first, second)


def affinity_est_s(rho: DensityOperator, sigma: DensityOperator, r: int, eps: float,
                   alpha: float, mode: str = "ideal", rng: np.random.Generator | None = None,
                   trial_seed: int | None = None, c0: int = DEFAULT_C0, c1: float = 8.0
                   ) -> EstimateOutcome:
    """Sample-model estimate of ``tr(ρ^α σ^(1−α))`` within ``eps`` w.p. ≥ 2/3."""
    if mode not in ("ideal", "lmr"):
        raise InvalidArgumentError(f"unknown samplizer mode {mode!r}")
    rng = rng if rng is not None else np.random.default_rng()
    start = time.perf_counter()
    _check_inputs(rho, sigma, r)
    s = sample_schedule(alpha, r, eps, c1)
    a = s.alpha_effective
    p1 = neg_power_poly(1.0 - a, s.delta1, s.eps1)
    p2 = pos_power_poly(1.0 - a, s.eps2)
    s = s.with_degrees(p1.degree, p2.degree)
    first, second = _oriented(rho, sigma, s)

    half_first = blockenc.exact_block_encoding(first.entries / 2.0)
    half_second = blockenc.exact_block_encoding(second.entries / 2.0)
    u1 = blockenc.eigen_transform(half_first, p1.scaled(0.5), s.delta1p, rng)
    u2 = blockenc.eigen_transform(half_second, p2.scaled(0.5), s.delta2p, rng)
    prod = blockenc.block_product(u1, u2)
    p_one = 1.0 - hadamard_test_prob(prod, first.entries)

    q = s.d1 + s.d2
    eps_q = s.delta / q
    dim = 2 ** hadamard_register_qubits(prod)
    ledger = SampleLedger(c0=c0)
    if mode == "ideal":
        dev = eps_q
        charges = (sample_charge(eps_q, c0),) * 2
    else:
        # Per-call LMR steps calibrated on the controlled exponential of each state.
        m1 = lmr_steps_for(first.entries, 1.0, eps_q, controlled=True)
        m2 = lmr_steps_for(second.entries, 1.0, eps_q, controlled=True)
        c_first = lmr_error_constant(first.entries, 1.0, True)
        c_second = lmr_error_constant(second.entries, 1.0, True)
        dev = max(c_first / m1, c_second / m2)
        charges = (m1, m2)
    noise = dev / depolarizing_choi_bound(dim)
    prob_one = samplized_first_qubit_prob(p_one, q, noise)
    k = s.k_repetitions
    x = binomial_large(k, prob_one, rng) / k
    value = 16.0 * s.delta1 ** (a - 1.0) * (1.0 - 2.0 * x)

    first_cost = k * (s.d1 * charges[0] + 1)
    second_cost = k * s.d2 * charges[1]
    if s.swapped:
        ledger.charge(rho=second_cost, sigma=first_cost)
    else:
        ledger.charge(rho=first_cost, sigma=second_cost)
    return EstimateOutcome(
        value=value, oracle_value=affinity_exact(rho, sigma, alpha), schedule=s, ledger=ledger,
        trial_seed=trial_seed, wall_ms=(time.perf_counter() - start) * 1e3,
        extras={"mode": mode, "k": k, "p_one": p_one, "prob_one": prob_one, "x": x,
                "per_query_deviation": dev, "charges": charges})


def tsallis_est_s(rho, sigma, r: int, eps: float, alpha: float, mode: str = "ideal",
                  rng: np.random.Generator | None = None, trial_seed: int | None = None
                  ) -> EstimateOutcome:
    a = affinity_est_s(rho, sigma, r, (1.0 - alpha) * eps, alpha, mode, rng, trial_seed)
    return tsallis_from_affinity(a, rho, sigma, alpha)


def hellinger_certify_s(rho, sigma, r: int, eps1_thr: float, eps2_thr: float,
                        mode: str = "ideal", rng: np.random.Generator | None = None,
                        trial_seed: int | None = None) -> CertificationResult:
    prec = certification_precision(eps1_thr, eps2_thr)
    est = affinity_est_s(rho, sigma, r, prec, 0.5, mode, rng, trial_seed)
    return decide(est, rho, sigma, eps1_thr, eps2_thr)
