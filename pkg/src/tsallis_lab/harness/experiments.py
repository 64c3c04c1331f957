"""Instance generation, estimator runs and sweeps behind the CLI."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .. import estimators, samplizer
from ..densityops import (DensityOperator, divergence_report, random_low_rank_state,
                          read_instance, write_instance)
from ..polyapprox import neg_power_degree_formula, pos_power_degree_formula
from .config import ExperimentConfig
from .seeding import derive_seed, rng_for, trial_seeds

QUERY_COLUMNS = ["seed", "alpha", "dim", "rank", "eps", "value", "oracle", "abs_error",
                 "queries_rho", "queries_sigma", "d1", "d2", "wall_ms"]
SAMPLE_COLUMNS = QUERY_COLUMNS + ["samples_rho", "samples_sigma", "mode", "k"]
SWEEP_COLUMNS = ["alpha", "rank", "eps", "mode", "dim", "trials", "success_rate",
                 "mean_abs_error", "mean_queries_rho", "mean_queries_sigma",
                 "mean_samples_rho", "mean_samples_sigma", "d1", "d2", "d1_formula",
                 "d2_formula"]

_STREAM_INSTANCE = 1
_STREAM_TRIALS = 2


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("TSALLIS_LAB_THREADS", "1")))
    except ValueError:
        return 1


def fixture_pair(name: str) -> tuple[DensityOperator, DensityOperator, int]:
    """The three reference pairs and their rank bound."""
    zero = DensityOperator.basis(2, 0)
    if name == "identical":
        return zero, zero, 1
    if name == "orthogonal":
        return zero, DensityOperator.basis(2, 1), 1
    if name == "diag":
        return DensityOperator.diagonal([0.75, 0.25]), DensityOperator.maximally_mixed(2), 2
    raise ValueError(f"unknown fixture {name!r}")


def random_pair(dim: int, rank: int, seed: int) -> tuple[DensityOperator, DensityOperator]:
    return (random_low_rank_state(dim, rank, derive_seed(seed, _STREAM_INSTANCE, 0)),
            random_low_rank_state(dim, rank, derive_seed(seed, _STREAM_INSTANCE, 1)))


def resolve_instance(cfg: ExperimentConfig) -> tuple[DensityOperator, DensityOperator]:
    if cfg.fixture is not None:
        rho, sigma, _ = fixture_pair(cfg.fixture)
        return rho, sigma
    if cfg.rho_path is not None:
        return read_instance(cfg.rho_path), read_instance(cfg.sigma_path)
    return random_pair(cfg.dim, cfg.rank, cfg.seed)


# -- gen / oracle -----------------------------------------------------------


def generate_instance(cfg: ExperimentConfig, out_dir: str | os.PathLike) -> dict:
    """Write ``rho.txt``, ``sigma.txt`` and ``manifest.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rho, sigma = random_pair(cfg.dim, cfg.rank, cfg.seed)
    write_instance(out / "rho.txt", rho)
    write_instance(out / "sigma.txt", sigma)
    manifest = {"version": cfg.version, "dim": cfg.dim, "rank": cfg.rank, "seed": cfg.seed,
                "alpha": cfg.alpha, "rho": "rho.txt", "sigma": "sigma.txt",
                "oracle": oracle_report(rho, sigma, cfg.alpha)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def oracle_report(rho, sigma, alpha: float) -> dict:
    rep = asdict(divergence_report(rho, sigma, alpha))
    return {k: (None if isinstance(v, float) and math.isinf(v) else v) for k, v in rep.items()}


# -- run --------------------------------------------------------------------


def _one_trial(cfg: ExperimentConfig, rho, sigma, seed: int):
    rng = rng_for(seed)
    sample_mode = {"sample-ideal": "ideal", "sample-lmr": "lmr"}.get(cfg.mode)
    if cfg.quantity == "certify":
        lo, hi = cfg.thresholds
        if sample_mode is None:
            return estimators.hellinger_certify_q(rho, sigma, cfg.rank, lo, hi, rng, seed)
        return samplizer.hellinger_certify_s(rho, sigma, cfg.rank, lo, hi, sample_mode, rng, seed)
    if cfg.quantity == "tsallis":
        if sample_mode is None:
            return estimators.tsallis_est_q(rho, sigma, cfg.rank, cfg.eps, cfg.alpha, rng, seed)
        return samplizer.tsallis_est_s(rho, sigma, cfg.rank, cfg.eps, cfg.alpha, sample_mode,
                                       rng, seed)
    if sample_mode is None:
        return estimators.affinity_est_q(rho, sigma, cfg.rank, cfg.eps, cfg.alpha, rng, seed)
    return samplizer.affinity_est_s(rho, sigma, cfg.rank, cfg.eps, cfg.alpha, sample_mode,
                                    rng, seed)


def _row(cfg: ExperimentConfig, rho, result) -> dict:
    est = result.estimate if isinstance(result, estimators.CertificationResult) else result
    s = est.schedule
    row = {"seed": est.trial_seed, "alpha": repr(cfg.alpha), "dim": rho.dim,
           "rank": cfg.rank, "eps": repr(s.eps), "value": repr(est.value),
           "oracle": repr(est.oracle_value), "abs_error": repr(est.abs_error),
           "queries_rho": 0, "queries_sigma": 0, "d1": s.d1, "d2": s.d2,
           "wall_ms": f"{est.wall_ms:.3f}" if cfg.timing else "0"}
    if isinstance(est.ledger, estimators.QueryLedger):
        row["queries_rho"] = est.ledger.queries_rho
        row["queries_sigma"] = est.ledger.queries_sigma
    else:
        row.update(samples_rho=est.ledger.samples_rho, samples_sigma=est.ledger.samples_sigma,
                   mode=cfg.mode, k=s.k_repetitions)
    if isinstance(result, estimators.CertificationResult):
        row.update(decision=result.decision, d_hat=repr(result.d_hat),
                   hellinger=repr(result.oracle_hellinger))
    return row


def columns_for(cfg: ExperimentConfig) -> list[str]:
    cols = list(QUERY_COLUMNS if cfg.mode == "query" else SAMPLE_COLUMNS)
    if cfg.quantity == "certify":
        cols += ["decision", "d_hat", "hellinger"]
    return cols


def run_trials(cfg: ExperimentConfig, rho=None, sigma=None) -> list[dict]:
    """One CSV row per trial, in trial order whatever the thread count."""
    if rho is None:
        rho, sigma = resolve_instance(cfg)
    seeds = trial_seeds(cfg.seed, cfg.trials, _STREAM_TRIALS)
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = list(pool.map(lambda s: _one_trial(cfg, rho, sigma, s), seeds))
    return [_row(cfg, rho, res) for res in results]


def rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


# -- sweep ------------------------------------------------------------------


def sweep(base: ExperimentConfig, alphas, ranks, epss, modes) -> list[dict]:
    """Aggregate rows over the grid ``alphas × ranks × epss × modes``.

    Every cell draws a rank-``r`` pair in dimension ``max(dim, r)`` from its
    own derived seed.
    """
    out = []
    for cell, (alpha, r, eps, mode) in enumerate(itertools.product(alphas, ranks, epss, modes)):
        cell_seed = derive_seed(base.seed, 3, cell)
        dim = max(base.dim, 1 << (int(r) - 1).bit_length())
        cfg = replace(base, alpha=alpha, rank=r, eps=eps, mode=mode, dim=dim, seed=cell_seed,
                      fixture=None, rho_path=None, sigma_path=None).validate()
        rows = run_trials(cfg)
        a_eff = max(alpha, 1.0 - alpha)
        sched = (estimators.query_schedule if mode == "query"
                 else estimators.sample_schedule)(alpha, r, eps)

        def mean(key):
            vals = [float(row.get(key, 0)) for row in rows]
            return repr(float(np.mean(vals))) if vals else "nan"

        errs = [float(row["abs_error"]) for row in rows]
        out.append({
            "alpha": repr(alpha), "rank": r, "eps": repr(eps), "mode": mode, "dim": dim,
            "trials": len(rows),
            "success_rate": repr(float(np.mean([e <= eps for e in errs]))) if rows else "nan",
            "mean_abs_error": repr(float(np.mean(errs))) if rows else "nan",
            "mean_queries_rho": mean("queries_rho"), "mean_queries_sigma": mean("queries_sigma"),
            "mean_samples_rho": mean("samples_rho"), "mean_samples_sigma": mean("samples_sigma"),
            "d1": rows[0]["d1"] if rows else "", "d2": rows[0]["d2"] if rows else "",
            "d1_formula": repr(neg_power_degree_formula(1 - a_eff, sched.delta1, sched.eps1)),
            "d2_formula": repr(pos_power_degree_formula(1 - a_eff, sched.eps2)),
        })
    return out


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])
