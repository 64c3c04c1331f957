"""The ten acceptance criteria, one test each.

Every test records a ``criterion N: PASS|FAIL`` line (shown in the pytest
terminal summary) and asserts its runtime budget.
"""

import time
import warnings

import numpy as np
import pytest
from scipy.stats import binomtest

from tsallis_lab import estimators, samplizer
from tsallis_lab.densityops import DensityOperator, affinity_exact
from tsallis_lab.harness.config import ExperimentConfig
from tsallis_lab.harness.experiments import fixture_pair, loglog_slope, sweep
from tsallis_lab.harness.seeding import rng_for, trial_seeds
from tsallis_lab.harness.suites import run_suites

FIXTURES = ("identical", "orthogonal", "diag")
TRIALS = 30
NEEDED = 20


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def contract_ok(hits: int) -> tuple[bool, float]:
    """``≥ 20/30`` and not rejected against the 2/3 contract at the 5% level."""
    p = binomtest(hits, TRIALS, 2 / 3, alternative="less").pvalue
    return hits >= NEEDED and p > 0.05, p


def suites_detail(results) -> str:
    worst = max(c.slack for r in results for c in r.checks)
    cases = min(c.count for r in results for c in r.checks)
    return f"max slack {worst:.2e}, >= {cases} cases per check"


# -- 1 ----------------------------------------------------------------------


def test_criterion_01_oracle_fixtures(report):
    worst = 0.0
    with Timer() as t:
        for d in (2, 4):
            for ep in (0.1, 0.25):
                half = d // 2
                rho = DensityOperator.diagonal([(1 + 2 * ep) / d] * half + [(1 - 2 * ep) / d] * half)
                sigma = DensityOperator.maximally_mixed(d)
                for alpha in (0.3, 0.5, 0.7):
                    closed = ((1 + 2 * ep) ** alpha + (1 - 2 * ep) ** alpha) / 2
                    worst = max(worst, abs(affinity_exact(rho, sigma, alpha) - closed))
    ok = worst <= 1e-10 and t.seconds < 1
    report(1, ok, f"max |A - closed form| = {worst:.1e} over 12 cells ({t.seconds:.2f}s)")
    assert ok


# -- 2 ----------------------------------------------------------------------


def test_criterion_02_inequality_suites(report):
    names = ["pinsker", "hellinger", "powermean", "holder", "jordan_hahn", "contractivity"]
    with Timer() as t:
        results = run_suites(names, seed=0)
    cases = min(c.count for r in results for c in r.checks)
    ok = all(r.passed for r in results) and cases >= 1000 and t.seconds < 30
    report(2, ok, f"{len(names)} suites, {suites_detail(results)} ({t.seconds:.1f}s)")
    assert ok, "\n".join(line for r in results for line in r.lines())


# -- 3 ----------------------------------------------------------------------


def test_criterion_03_polynomial_contracts(report):
    with Timer() as t:
        results = run_suites(["poly"], seed=0)
    cases = results[0].checks[0].count
    ok = results[0].passed and cases == 12 and t.seconds < 60
    report(3, ok, f"12-cell grid, error/bound/oddness: {suites_detail(results)} ({t.seconds:.1f}s)")
    assert ok, "\n".join(results[0].lines())


# -- 4 ----------------------------------------------------------------------


def test_criterion_04_block_encoding_contracts(report):
    with Timer() as t:
        results = run_suites(["blockenc"], seed=0)
    ok = results[0].passed and t.seconds < 60
    report(4, ok, f"density BE, product bound, unitarity: {suites_detail(results)} "
                  f"({t.seconds:.1f}s)")
    assert ok, "\n".join(results[0].lines())


# -- 5 ----------------------------------------------------------------------


def test_criterion_05_proposition_suites(report):
    with Timer() as t:
        results = run_suites(["prop_query", "prop_sample"], seed=0)
    cases = min(c.count for r in results for c in r.checks)
    ok = all(r.passed for r in results) and cases >= 100 and t.seconds < 120
    report(5, ok, f"query/sample single-first-second: {suites_detail(results)} "
                  f"({t.seconds:.1f}s)")
    assert ok, "\n".join(line for r in results for line in r.lines())


# -- 6 ----------------------------------------------------------------------


def test_criterion_06_algorithm_1(report):
    eps, counts, pvals = 0.1, {}, {}
    with Timer() as t:
        for i, name in enumerate(FIXTURES):
            rho, sigma, r = fixture_pair(name)
            hits = 0
            for seed in trial_seeds(600 + i, TRIALS):
                out = estimators.affinity_est_q(rho, sigma, r, eps, 0.5, rng_for(seed), seed)
                hits += out.abs_error <= eps
            counts[name] = hits
            _, pvals[name] = contract_ok(hits)
    ok = all(contract_ok(h)[0] for h in counts.values()) and t.seconds < 300
    detail = ", ".join(f"{k} {v}/{TRIALS} (p={pvals[k]:.2f})" for k, v in counts.items())
    report(6, ok, f"eps=0.1: {detail} ({t.seconds:.1f}s)")
    assert ok


# -- 7 ----------------------------------------------------------------------


def test_criterion_07_algorithm_2_ideal(report):
    eps, counts, ledger_ok = 0.25, {}, True
    with Timer() as t:
        for i, name in enumerate(FIXTURES):
            rho, sigma, r = fixture_pair(name)
            hits = 0
            for seed in trial_seeds(700 + i, TRIALS):
                out = samplizer.affinity_est_s(rho, sigma, r, eps, 0.5, "ideal", rng_for(seed),
                                               seed)
                hits += out.abs_error <= eps
                closed = samplizer.sample_ledger_closed_form(out.schedule, out.ledger.c0)
                ledger_ok &= (out.ledger.samples_rho, out.ledger.samples_sigma) == closed
            counts[name] = hits
    ok = all(contract_ok(h)[0] for h in counts.values()) and ledger_ok and t.seconds < 600
    detail = ", ".join(f"{k} {v}/{TRIALS}" for k, v in counts.items())
    report(7, ok, f"eps=0.25: {detail}; ledger == closed form: {ledger_ok} ({t.seconds:.1f}s)")
    assert ok


# -- 8 ----------------------------------------------------------------------


def test_criterion_08_samplizer_fidelity(report):
    with Timer() as t:
        results = run_suites(["samplizer"], seed=0)
    ok = results[0].passed and t.seconds < 120
    report(8, ok, f"Choi bound <= delta for Q in 1,2,4; lmr m=100 <= m=10 / 4: "
                  f"{suites_detail(results)} ({t.seconds:.1f}s)")
    assert ok, "\n".join(results[0].lines())


# -- 9 ----------------------------------------------------------------------


def test_criterion_09_certification(report):
    expected = {"identical": "close", "orthogonal": "far", "diag": "close"}
    counts = {}
    with Timer() as t:
        for i, name in enumerate(FIXTURES):
            rho, sigma, r = fixture_pair(name)
            for kind in ("q", "s"):
                hits = 0
                for seed in trial_seeds(900 + 2 * i + (kind == "s"), TRIALS):
                    if kind == "q":
                        res = estimators.hellinger_certify_q(rho, sigma, r, 0.05, 0.4,
                                                             rng_for(seed), seed)
                    else:
                        res = samplizer.hellinger_certify_s(rho, sigma, r, 0.05, 0.4, "ideal",
                                                            rng_for(seed), seed)
                    hits += res.decision == expected[name]
                counts[f"{name}/{kind}"] = hits
    ok = all(h >= NEEDED for h in counts.values()) and t.seconds < 300
    detail = ", ".join(f"{k} {v}/{TRIALS}" for k, v in counts.items())
    report(9, ok, f"thresholds (0.05, 0.4): {detail} ({t.seconds:.1f}s)")
    assert ok


# -- 10 ---------------------------------------------------------------------


def test_criterion_10_complexity_shape(report):
    ranks = [2, 4, 8]
    base = ExperimentConfig(alpha=0.5, dim=2, rank=2, eps=0.15, trials=3, seed=10).validate()
    with Timer() as t:
        rows = sweep(base, [0.5], ranks, [0.15], ["query"])
    queries = [float(r["mean_queries_rho"]) + float(r["mean_queries_sigma"]) for r in rows]
    slope = loglog_slope(ranks, queries)
    monotone = all(b >= a for a, b in zip(queries, queries[1:]))
    if slope > 2.0:
        warnings.warn(f"query-count slope {slope:.3f} exceeds 1.5 + 0.5", stacklevel=1)
    ok = monotone and t.seconds < 600
    report(10, ok, f"mean queries {', '.join(f'{q:.3g}' for q in queries)}; "
                   f"log-log slope {slope:.3f} (soft limit 2.0"
                   f"{'' if slope <= 2.0 else ', WARNING'}) ({t.seconds:.1f}s)")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
