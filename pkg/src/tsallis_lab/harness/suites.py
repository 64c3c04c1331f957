"""Property suites run by ``verify``.

Each check reports its worst *slack* ``max(lhs − rhs)``: a check passes when
the slack stays at or below its tolerance (negative slack is margin).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import blockenc, estimators, samplizer
from ..densityops import (DensityOperator, affinity_exact, hellinger_exact, matrix_power,
                          random_low_rank_state, schatten_norm, trace_distance_exact,
                          tsallis_exact)
from ..polyapprox import ApproxPolynomial, eval_poly, eval_poly_matrix, identity_poly
from .seeding import derive_seed

SLACK_TOL = 1e-9
DEFAULT_PAIRS = 1000
DEFAULT_TUPLES = 100

PolyHook = Callable[[ApproxPolynomial], ApproxPolynomial]


@dataclass
class Check:
    name: str
    slack: float = -math.inf
    count: int = 0
    tol: float = SLACK_TOL

    def update(self, lhs: float, rhs: float) -> None:
        self.slack = max(self.slack, float(lhs - rhs))
        self.count += 1

    @property
    def passed(self) -> bool:
        return self.count > 0 and self.slack <= self.tol


@dataclass
class SuiteResult:
    name: str
    checks: list[Check] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        head = f"[{'PASS' if self.passed else 'FAIL'}] {self.name} ({self.seconds:.2f}s)"
        body = [f"    {'ok ' if c.passed else 'BAD'} {c.name}: max slack {c.slack:.3e} "
                f"over {c.count} cases (tol {c.tol:.0e})" for c in self.checks]
        return [head] + body


def _random_pair(rng: np.random.Generator, max_qubits: int = 3):
    dim = 2 ** int(rng.integers(1, max_qubits + 1))
    r1, r2 = (int(rng.integers(1, dim + 1)) for _ in range(2))
    return (random_low_rank_state(dim, r1, rng), random_low_rank_state(dim, r2, rng))


# -- inequality suites -------------------------------------------------------


def suite_pinsker(seed: int = 0, pairs: int = DEFAULT_PAIRS) -> SuiteResult:
    rng = np.random.default_rng(derive_seed(seed, 10))
    lower, upper = Check("2a·d² + (2/9)a(a+1)(2-a)·d⁴ <= D_T"), Check("D_T <= d/(1-a)")
    alphas = np.round(np.arange(0.1, 0.91, 0.1), 10)
    for i in range(pairs):
        rho, sigma = _random_pair(rng)
        a = float(alphas[i % len(alphas)])
        d = trace_distance_exact(rho, sigma)
        dt = tsallis_exact(rho, sigma, a)
        lower.update(2 * a * d ** 2 + (2 / 9) * a * (a + 1) * (2 - a) * d ** 4, dt)
        upper.update(dt, d / (1 - a))
    return SuiteResult("pinsker", [lower, upper])


def suite_hellinger(seed: int = 0, pairs: int = DEFAULT_PAIRS) -> SuiteResult:
    rng = np.random.default_rng(derive_seed(seed, 11))
    lower, upper = Check("d_H² <= d_tr"), Check("d_tr <= √2·d_H")
    for _ in range(pairs):
        rho, sigma = _random_pair(rng)
        dh, dt = hellinger_exact(rho, sigma), trace_distance_exact(rho, sigma)
        lower.update(dh ** 2, dt)
        upper.update(dt, math.sqrt(2) * dh)
    return SuiteResult("hellinger", [lower, upper])


def suite_powermean(seed: int = 0, pairs: int = DEFAULT_PAIRS) -> SuiteResult:
    rng = np.random.default_rng(derive_seed(seed, 12))
    chk = Check("‖ρ^a‖₁ <= r^(1-a)")
    for _ in range(pairs):
        rho, _ = _random_pair(rng)
        a = float(rng.uniform(0.05, 0.95))
        chk.update(schatten_norm(matrix_power(rho, a), 1), rho.rank ** (1 - a))
    return SuiteResult("powermean", [chk])


def _random_rank_matrix(rng, dim: int, rank: int) -> np.ndarray:
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    h = rng.standard_normal((rank, dim)) + 1j * rng.standard_normal((rank, dim))
    return g @ h


def suite_contractivity(seed: int = 0, pairs: int = DEFAULT_PAIRS) -> SuiteResult:
    rng = np.random.default_rng(derive_seed(seed, 13))
    checks = {pq: Check(f"‖A‖_{pq[0]} <= r^(1/{pq[0]}-1/{pq[1]})‖A‖_{pq[1]}")
              for pq in ((1, 2), (1, math.inf), (2, math.inf))}
    for _ in range(pairs):
        dim = 2 ** int(rng.integers(1, 4))
        r = int(rng.integers(1, dim + 1))
        a = _random_rank_matrix(rng, dim, r)
        for (p, q), chk in checks.items():
            scale = schatten_norm(a, q)
            expo = 1 / p - (0 if q == math.inf else 1 / q)
            chk.update(schatten_norm(a, p) / scale, r ** expo)
    return SuiteResult("contractivity", list(checks.values()))


def suite_jordan_hahn(seed: int = 0, pairs: int = DEFAULT_PAIRS) -> SuiteResult:
    rng = np.random.default_rng(derive_seed(seed, 14))
    chk = Check("|tr(AB)| <= tr(A|B|)")
    for _ in range(pairs):
        rho, sigma = _random_pair(rng)
        b = rho.entries - sigma.entries * float(rng.uniform(0.2, 3.0))
        a = random_low_rank_state(rho.dim, int(rng.integers(1, rho.dim + 1)), rng).entries
        w, v = np.linalg.eigh(b)
        abs_b = (v * np.abs(w)) @ v.conj().T
        chk.update(abs(np.trace(a @ b)), np.trace(a @ abs_b).real)
    return SuiteResult("jordan_hahn", [chk])


def suite_holder(seed: int = 0, pairs: int = DEFAULT_PAIRS) -> SuiteResult:
    rng = np.random.default_rng(derive_seed(seed, 15))
    chk = Check("‖AB‖₁ <= ‖A‖_p‖B‖_q")
    exps = [(1.0, math.inf), (2.0, 2.0), (3.0, 1.5), (math.inf, 1.0), (1.25, 5.0)]
    for i in range(pairs):
        dim = 2 ** int(rng.integers(1, 4))
        a = _random_rank_matrix(rng, dim, int(rng.integers(1, dim + 1)))
        b = _random_rank_matrix(rng, dim, int(rng.integers(1, dim + 1)))
        p, q = exps[i % len(exps)]
        chk.update(schatten_norm(a @ b, 1), schatten_norm(a, p) * schatten_norm(b, q))
    return SuiteResult("holder", [chk])


def suite_symmetry(seed: int = 0, pairs: int = DEFAULT_PAIRS) -> SuiteResult:
    rng = np.random.default_rng(derive_seed(seed, 16))
    chk = Check("|A_a(ρ,σ) - A_(1-a)(σ,ρ)| <= 1e-10", tol=1e-10)
    for _ in range(pairs):
        rho, sigma = _random_pair(rng)
        a = float(rng.uniform(0.05, 0.95))
        chk.update(abs(affinity_exact(rho, sigma, a) - affinity_exact(sigma, rho, 1 - a)), 0.0)
    return SuiteResult("symmetry", [chk])


def suite_faithfulness(seed: int = 0, pairs: int = DEFAULT_PAIRS) -> SuiteResult:
    rng = np.random.default_rng(derive_seed(seed, 17))
    chk = Check("d_tr >= 0.05 ⇒ A_a <= 1 - (1-a)·2a·0.05²")
    for _ in range(pairs):
        rho, sigma = _random_pair(rng)
        a = float(rng.uniform(0.05, 0.95))
        if trace_distance_exact(rho, sigma) >= 0.05:
            chk.update(affinity_exact(rho, sigma, a), 1 - (1 - a) * 2 * a * 0.05 ** 2)
    return SuiteResult("faithfulness", [chk])


# -- polynomial and block-encoding suites -----------------------------------


POLY_GRID = [(a, e, d) for a in (0.25, 0.5, 0.75) for e in (0.1, 0.01) for d in (0.2, 0.05)]


def suite_poly(seed: int = 0) -> SuiteResult:
    err1, err2 = Check("p1 grid error <= eps", tol=0.0), Check("p2 grid error <= eps", tol=0.0)
    bound = Check("max |p| <= 1", tol=0.0)
    odd = Check("|p1(x) + p1(-x)| <= 1e-10", tol=1e-10)
    xs = np.cos(np.pi * (np.arange(10_000) + 0.5) / 10_000)
    for a, eps, delta in POLY_GRID:
        p1 = estimators.neg_power_poly(1 - a, delta, eps)
        p2 = estimators.pos_power_poly(1 - a, eps)
        grid = np.linspace(delta, 1.0, 10_000)
        err1.update(np.max(np.abs(eval_poly(p1, grid) - (delta ** (1 - a) / 2) * grid ** (a - 1))),
                    eps)
        unit = np.linspace(0.0, 1.0, 10_000)
        err2.update(np.max(np.abs(eval_poly(p2, unit) - 0.5 * unit ** (1 - a))), eps)
        for p in (p1, p2):
            bound.update(np.max(np.abs(eval_poly(p, xs))), 1.0)
        half = xs[:1000]
        odd.update(np.max(np.abs(eval_poly(p1, half) + eval_poly(p1, -half))), 0.0)
    return SuiteResult("poly", [err1, err2, bound, odd])


def suite_blockenc(seed: int = 0, states: int = 50) -> SuiteResult:
    rng = np.random.default_rng(derive_seed(seed, 20))
    dens = Check("density encoding residual <= 1e-9", tol=1e-9)
    prod = Check("product residual <= a·δ + b·ε")
    unit = Check("eigen_transform unitarity <= 1e-9", tol=1e-9)
    for i in range(states):
        dim = (2, 4, 8)[i % 3]
        rho = random_low_rank_state(dim, int(rng.integers(1, dim + 1)), rng)
        be = blockenc.density_block_encoding(blockenc.purified_oracle(rho))
        dens.update(blockenc.verify(be, rho.entries), 0.0)
        unit.update(blockenc.eigen_transform(be, identity_poly(0.5)).unitarity_residual(), 0.0)
    for i in range(states):
        dim = (2, 4)[i % 2]
        rho = random_low_rank_state(dim, int(rng.integers(1, dim + 1)), rng)
        sigma = random_low_rank_state(dim, int(rng.integers(1, dim + 1)), rng)
        e1, e2 = (float(x) for x in rng.uniform(0.0, 0.05, size=2))
        s1, s2 = (float(x) for x in rng.uniform(1.1, 2.0, size=2))
        u = blockenc.with_injected_error(blockenc.exact_block_encoding(rho.entries, s1), e1, rng)
        v = blockenc.with_injected_error(blockenc.exact_block_encoding(sigma.entries, s2), e2, rng)
        w = blockenc.block_product(u, v)
        prod.update(blockenc.verify(w, rho.entries @ sigma.entries), w.error_bound)
        unit.update(w.unitarity_residual(), 0.0)
    return SuiteResult("blockenc", [dens, prod, unit])


# -- proposition suites ------------------------------------------------------


PROP_ALPHAS = (0.5, 0.6, 0.7)
PROP_DELTAS = (0.05, 0.1, 0.2)
PROP_EPS = (0.01, 0.05)


def _prop_tuple(rng):
    dim = 2 ** int(rng.integers(1, 4))
    r = int(rng.integers(1, dim + 1))
    rho = random_low_rank_state(dim, int(rng.integers(1, r + 1)), rng)
    sigma = random_low_rank_state(dim, int(rng.integers(1, r + 1)), rng)
    a = float(rng.choice(PROP_ALPHAS))
    delta = float(rng.choice(PROP_DELTAS))
    e1, e2 = (float(rng.choice(PROP_EPS)) for _ in range(2))
    return rho, sigma, r, a, delta, e1, e2


def _op_norm(m) -> float:
    return float(np.linalg.norm(m, 2))


def suite_prop_query(seed: int = 0, tuples: int = DEFAULT_TUPLES,
                     p1_hook: PolyHook | None = None) -> SuiteResult:
    rng = np.random.default_rng(derive_seed(seed, 30))
    ca = Check("(a) ‖ρp1(ρ) - (δ^(1-a)/2)ρ^a‖ <= 1.5δ + ε1")
    cb = Check("(b) first-step trace deviation <= (rε2 + r^a/2)(1.5δ + ε1)")
    cc = Check("(c) second-step trace deviation <= (δ^(1-a)/2)r^(1-a)ε2")
    for _ in range(tuples):
        rho, sigma, r, a, delta, e1, e2 = _prop_tuple(rng)
        p1 = estimators.neg_power_poly(1 - a, delta, e1)
        if p1_hook is not None:
            p1 = p1_hook(p1)
        p2 = estimators.pos_power_poly(1 - a, e2)
        R, S = rho.entries, sigma.entries
        p1r, p2s = eval_poly_matrix(p1, R), eval_poly_matrix(p2, S)
        ra = matrix_power(R, a)
        pref = delta ** (1 - a) / 2
        ca.update(_op_norm(R @ p1r - pref * ra), 1.5 * delta + e1)
        lhs_b = abs(np.trace(R @ p1r @ p2s) - np.trace(pref * ra @ p2s))
        cb.update(lhs_b, (r * e2 + r ** a / 2) * (1.5 * delta + e1))
        lhs_c = abs(np.trace(pref * ra @ p2s) - np.trace(pref / 2 * ra @ matrix_power(S, 1 - a)))
        cc.update(lhs_c, pref * r ** (1 - a) * e2)
    return SuiteResult("prop_query", [ca, cb, cc])


def suite_prop_sample(seed: int = 0, tuples: int = DEFAULT_TUPLES,
                      p1_hook: PolyHook | None = None) -> SuiteResult:
    rng = np.random.default_rng(derive_seed(seed, 31))
    ca = Check("single: ‖ρp1(ρ/2) - δ^(1-a)(ρ/2)^a‖ <= 4δ + ε1")
    cb = Check("first: trace deviation <= (rε2 + 2^(a-2)r^a)(4δ + ε1)")
    cc = Check("second: trace deviation <= (δ^(1-a)/2^a)r^(1-a)ε2")
    for _ in range(tuples):
        rho, sigma, r, a, delta, e1, e2 = _prop_tuple(rng)
        p1 = estimators.neg_power_poly(1 - a, delta, e1)
        if p1_hook is not None:
            p1 = p1_hook(p1)
        p2 = estimators.pos_power_poly(1 - a, e2)
        R, S = rho.entries, sigma.entries
        p1r, p2s = eval_poly_matrix(p1, R / 2), eval_poly_matrix(p2, S / 2)
        rha = matrix_power(R / 2, a)
        pref = delta ** (1 - a)
        ca.update(_op_norm(R @ p1r - pref * rha), 4 * delta + e1)
        lhs_b = abs(np.trace(R @ p1r @ p2s) - np.trace(pref * rha @ p2s))
        cb.update(lhs_b, (r * e2 + 2 ** (a - 2) * r ** a) * (4 * delta + e1))
        lhs_c = abs(np.trace(pref * rha @ p2s)
                    - np.trace(pref / 2 * rha @ matrix_power(S / 2, 1 - a)))
        cc.update(lhs_c, pref / 2 ** a * r ** (1 - a) * e2)
    return SuiteResult("prop_sample", [ca, cb, cc])


def _fixtures():
    zero, one = DensityOperator.basis(2, 0), DensityOperator.basis(2, 1)
    return [(zero, zero, 1), (zero, one, 1),
            (DensityOperator.diagonal([0.75, 0.25]), DensityOperator.maximally_mixed(2), 2)]


def suite_total(seed: int = 0) -> SuiteResult:
    """Deterministic error budgets of both estimators, given an ``ε_H``-accurate ``X``."""
    rng = np.random.default_rng(derive_seed(seed, 32))
    cq = Check("query total deviation <= budget")
    cs = Check("sample total deviation <= budget")
    for rho, sigma, r in _fixtures():
        for alpha in (0.5, 0.3):
            target = affinity_exact(rho, sigma, alpha)
            pipe = estimators.query_pipeline(rho, sigma, r, 0.2, alpha)
            s = pipe.schedule
            be_r = blockenc.density_block_encoding(blockenc.purified_oracle(pipe.rho))
            be_s = blockenc.density_block_encoding(blockenc.purified_oracle(pipe.sigma))
            p0 = estimators.hadamard_test_prob(
                estimators.product_encoding(be_r, be_s, pipe, rng), pipe.rho.entries)
            scale = 16 * s.delta1 ** (s.alpha_effective - 1)
            worst = max(abs(scale * (2 * (p0 + t) - 1) - target) for t in (-s.epsH, s.epsH))
            cq.update(worst, estimators.query_error_total_bound(s))

            out = samplizer.affinity_est_s(rho, sigma, r, 0.25, alpha, "ideal", rng)
            ss = out.schedule
            scale = 16 * ss.delta1 ** (ss.alpha_effective - 1)
            p1 = out.extras["prob_one"]
            worst = max(abs(scale * (1 - 2 * (p1 + t)) - target) for t in (-ss.epsH, ss.epsH))
            cs.update(worst, estimators.sample_error_total_bound(ss))
    return SuiteResult("total", [cq, cs])


# -- samplizer suite ----------------------------------------------------------


_H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)


def alternating_circuit(q: int, mode: str = "ideal") -> samplizer.QueryCircuit:
    """``q`` queries alternating between two one-qubit states, Hadamards in between."""
    slots = []
    for i in range(q):
        if mode == "ideal":
            slots.append(samplizer.QuerySlot(i % 2, (0, 1)))
        else:
            slots.append(samplizer.QuerySlot(i % 2, (1,), control=0))
        slots.append(samplizer.GateSlot(np.kron(_H, _H)))
    return samplizer.QueryCircuit(2, tuple(slots))


def suite_samplizer(seed: int = 0, delta: float = 0.1) -> SuiteResult:
    states = [DensityOperator.basis(2, 0), DensityOperator.diagonal([0.75, 0.25])]
    ideal = Check("ideal: Choi bound of F vs exact <= δ")
    lmr = Check("lmr: Choi bound of F vs exact <= δ")
    ratio = Check("lmr: error(m=100) <= error(m=10)/4")
    ledger = Check("ideal ledger = Σ_j Q_j·charge(δ/Q)", tol=0.0)
    for q in (1, 2, 4):
        circ = alternating_circuit(q)
        led = samplizer.SampleLedger()
        f = samplizer.samplized_channel(circ, states, delta, "ideal", led)
        ideal.update(samplizer.channel_distance_upper(f, samplizer.exact_channel(circ, states)),
                     delta)
        qj = circ.query_counts(2)
        per = samplizer.sample_charge(delta / q)
        ledger.update(abs(led.samples_rho - qj[0] * per) + abs(led.samples_sigma - qj[1] * per), 0)
        circ = alternating_circuit(q, "lmr")
        f = samplizer.samplized_channel(circ, states, delta, "lmr")
        lmr.update(samplizer.channel_distance_upper(
            f, samplizer.exact_channel(circ, states, "lmr")), delta)
    for rho, t in ((np.eye(2) / 2, 1.0), (np.diag([1.0, 0.0]), math.pi / 2)):
        e10 = samplizer.lmr_channel(rho, t, 10).claimed_deviation
        e100 = samplizer.lmr_channel(rho, t, 100).claimed_deviation
        ratio.update(e100, e10 / 4)
    return SuiteResult("samplizer", [ideal, lmr, ratio, ledger])


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "pinsker": suite_pinsker,
    "hellinger": suite_hellinger,
    "powermean": suite_powermean,
    "holder": suite_holder,
    "jordan_hahn": suite_jordan_hahn,
    "contractivity": suite_contractivity,
    "symmetry": suite_symmetry,
    "faithfulness": suite_faithfulness,
    "poly": suite_poly,
    "blockenc": suite_blockenc,
    "prop_query": suite_prop_query,
    "prop_sample": suite_prop_sample,
    "total": suite_total,
    "samplizer": suite_samplizer,
}

MUTATIONS: dict[str, PolyHook] = {"p1-sign": lambda p: p.scaled(-1.0)}


def run_suites(names=None, seed: int = 0, mutation: str | None = None) -> list[SuiteResult]:
    names = list(SUITES) if not names else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suites: {unknown}")
    hook = MUTATIONS[mutation] if mutation else None
    results = []
    for name in names:
        start = time.perf_counter()
        fn = SUITES[name]
        res = fn(seed, p1_hook=hook) if name in ("prop_query", "prop_sample") else fn(seed)
        res.seconds = time.perf_counter() - start
        results.append(res)
    return results
