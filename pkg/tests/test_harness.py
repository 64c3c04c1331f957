import csv
import io
import json
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from tsallis_lab.densityops import affinity_exact, read_instance
from tsallis_lab.errors import CertificationError
from tsallis_lab.harness import cli
from tsallis_lab.harness.cli import main
from tsallis_lab.harness.config import ConfigError, ExperimentConfig, load_config
from tsallis_lab.harness.experiments import (
    QUERY_COLUMNS, SAMPLE_COLUMNS, SWEEP_COLUMNS, loglog_slope, rows_to_csv, run_trials, sweep)
from tsallis_lab.harness.seeding import derive_seed, splitmix64, trial_seeds
from tsallis_lab.harness.suites import run_suites


def run_cli(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:
        code = exc.code
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


# -- seeding ----------------------------------------------------------------


def test_splitmix_reference_value():
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(1) == 0x910A2DEC89025CC1


def test_derived_seeds_are_distinct_and_stable():
    seeds = trial_seeds(42, 1000)
    assert len(set(seeds)) == 1000
    assert seeds == trial_seeds(42, 1000)
    assert derive_seed(42, 0, 1) != derive_seed(42, 1, 0)
    assert trial_seeds(42, 5, stream=1) != trial_seeds(42, 5, stream=2)


# -- config -----------------------------------------------------------------


def test_config_json_round_trip():
    cfg = ExperimentConfig(alpha=0.3, dim=4, rank=2, eps=0.25, trials=3, quantity="certify",
                           thresholds=(0.05, 0.4)).validate()
    back = load_config(cfg.to_json())
    assert back == cfg


@pytest.mark.parametrize("text", ['{"alpha": 1.5}', '{"dim": 3}', '{"rank": 9, "dim": 4}',
                                  '{"bogus": 1}', '[1, 2]', 'not json', '{"version": 2}',
                                  '{"quantity": "certify"}', '{"rho_path": "a"}'])
def test_config_rejections(text):
    with pytest.raises(ConfigError):
        load_config(text).validate()


# -- gen / oracle -----------------------------------------------------------


def test_gen_writes_instance_and_manifest(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "gen", "--dim", "4", "--rank", "2", "--seed", "5",
                           "--alpha", "0.3", "--out", str(tmp_path))
    assert code == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    rho = read_instance(tmp_path / "rho.txt")
    sigma = read_instance(tmp_path / "sigma.txt")
    assert rho.rank == 2 and sigma.rank == 2
    assert abs(manifest["oracle"]["affinity_alpha"] - affinity_exact(rho, sigma, 0.3)) <= 1e-12
    assert json.loads(out) == manifest["oracle"]


def test_gen_rank_one_is_pure(tmp_path, capsys):
    run_cli(capsys, "gen", "--dim", "2", "--rank", "1", "--out", str(tmp_path))
    assert read_instance(tmp_path / "rho.txt").rank == 1


def test_gen_is_deterministic(tmp_path, capsys):
    for sub in ("a", "b"):
        run_cli(capsys, "gen", "--dim", "4", "--rank", "3", "--seed", "9",
                "--out", str(tmp_path / sub))
    for name in ("rho.txt", "sigma.txt", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_oracle_command(tmp_path, capsys):
    run_cli(capsys, "gen", "--dim", "2", "--rank", "2", "--out", str(tmp_path))
    code, out, _ = run_cli(capsys, "oracle", str(tmp_path / "rho.txt"),
                           str(tmp_path / "sigma.txt"), "--alpha", "0.5")
    assert code == 0
    rep = json.loads(out)
    assert set(rep) >= {"affinity_alpha", "tsallis_alpha", "hellinger", "trace_distance"}


# -- run --------------------------------------------------------------------


def test_run_query_csv(capsys):
    code, out, _ = run_cli(capsys, "run", "--fixture", "diag", "--rank", "2", "--eps", "0.2",
                           "--trials", "4", "--seed", "1")
    assert code == 0
    rows = read_csv(out)
    assert list(rows[0]) == QUERY_COLUMNS
    assert len(rows) == 4
    assert all(int(r["queries_rho"]) > 0 and r["wall_ms"] == "0" for r in rows)


def test_run_is_byte_identical(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        run_cli(capsys, "run", "--dim", "4", "--rank", "2", "--eps", "0.25", "--trials", "3",
                "--seed", "11", "--out", str(p))
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_run_byte_identical_across_threads(monkeypatch):
    cfg = ExperimentConfig(dim=4, rank=2, eps=0.25, trials=4, seed=3).validate()
    single = rows_to_csv(run_trials(cfg), QUERY_COLUMNS)
    monkeypatch.setenv("TSALLIS_LAB_THREADS", "4")
    assert rows_to_csv(run_trials(cfg), QUERY_COLUMNS) == single


def test_run_zero_trials(tmp_path, capsys):
    out = tmp_path / "empty.csv"
    code, _, _ = run_cli(capsys, "run", "--trials", "0", "--out", str(out))
    assert code == 0
    assert read_csv(out.read_text()) == []


def test_run_sample_lmr_columns(capsys):
    code, out, _ = run_cli(capsys, "run", "--fixture", "diag", "--rank", "2", "--eps", "0.25",
                           "--trials", "2", "--mode", "sample-lmr")
    assert code == 0
    rows = read_csv(out)
    assert list(rows[0]) == SAMPLE_COLUMNS
    assert all(int(r["samples_rho"]) > 0 and r["mode"] == "sample-lmr" for r in rows)


def test_run_certify(capsys):
    code, out, _ = run_cli(capsys, "run", "--fixture", "orthogonal", "--thresholds", "0.05,0.4",
                           "--trials", "3")
    assert code == 0
    rows = read_csv(out)
    assert all(r["decision"] == "far" for r in rows)


def test_run_from_instance_files(tmp_path, capsys):
    run_cli(capsys, "gen", "--dim", "2", "--rank", "2", "--out", str(tmp_path))
    code, out, _ = run_cli(capsys, "run", "--rho", str(tmp_path / "rho.txt"),
                           "--sigma", str(tmp_path / "sigma.txt"), "--dim", "2", "--rank", "2",
                           "--eps", "0.3", "--trials", "2")
    assert code == 0 and len(read_csv(out)) == 2


def test_run_from_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(ExperimentConfig(fixture="identical", eps=0.3, trials=2).to_json())
    code, out, _ = run_cli(capsys, "run", "--config", str(cfg), "--trials", "1")
    assert code == 0 and len(read_csv(out)) == 1


@pytest.mark.parametrize("argv", [["run", "--alpha", "1.5"], ["run", "--dim", "3"],
                                  ["run", "--mode", "quantum"], ["run", "--thresholds", "0.4"],
                                  ["oracle", "/nonexistent/rho.txt", "/nonexistent/s.txt"],
                                  ["frobnicate"]])
def test_invalid_input_exit_code(capsys, argv):
    code, _, _ = run_cli(capsys, *argv)
    assert code == 3


def test_certification_failure_exit_code(capsys, monkeypatch):
    def boom(cfg):
        raise CertificationError("no certificate", achieved_error=0.5, degree=10)

    monkeypatch.setattr(cli, "run_trials", boom)
    code, _, err = run_cli(capsys, "run", "--trials", "1")
    assert code == 2 and "certification" in err


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "tsallis_lab.harness.cli", "run", "--alpha",
                          "2"], capture_output=True, text=True)
    assert res.returncode == 3


# -- sweep ------------------------------------------------------------------


def test_single_cell_sweep_matches_run():
    base = ExperimentConfig(dim=2, rank=2, eps=0.25, trials=4, seed=2).validate()
    rows = sweep(base, [0.5], [2], [0.25], ["query"])
    assert len(rows) == 1
    cell = rows[0]
    assert list(cell) == SWEEP_COLUMNS
    cfg = replace(base, seed=derive_seed(2, 3, 0))
    trials = run_trials(cfg)
    errs = [float(t["abs_error"]) for t in trials]
    assert float(cell["mean_abs_error"]) == pytest.approx(np.mean(errs))
    assert float(cell["success_rate"]) == pytest.approx(np.mean([e <= 0.25 for e in errs]))
    assert int(cell["d1"]) <= 20 * float(cell["d1_formula"])
    assert int(cell["d2"]) <= 20 * float(cell["d2_formula"])


def test_sweep_is_deterministic(capsys):
    argv = ["sweep", "--trials", "2", "--ranks", "1,2", "--eps", "0.3", "--seed", "4"]
    _, first, _ = run_cli(capsys, *argv)
    _, second, err = run_cli(capsys, *argv)
    assert first == second
    assert "slope" in err


def test_loglog_slope():
    assert loglog_slope([2, 4, 8], [3 * 2 ** 1.5, 3 * 4 ** 1.5, 3 * 8 ** 1.5]) == pytest.approx(1.5)


# -- verify -----------------------------------------------------------------


def test_verify_single_suite(capsys):
    code, out, _ = run_cli(capsys, "verify", "--suite", "pinsker")
    assert code == 0
    assert "[PASS] pinsker" in out and "1/1 suites passed" in out
    assert "hellinger" not in out


def test_verify_mutation_fails_proposition_suite(capsys):
    code, out, _ = run_cli(capsys, "verify", "--suite", "prop_query", "--mutate", "p1-sign")
    assert code == 1
    assert "[FAIL] prop_query" in out
    assert "BAD (a)" in out


def test_fresh_suites_pass():
    results = run_suites(["hellinger", "symmetry", "faithfulness", "blockenc", "samplizer"])
    assert all(r.passed for r in results), "\n".join(
        line for r in results for line in r.lines())
