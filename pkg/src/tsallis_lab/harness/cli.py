"""``tsallis-lab`` command line: gen | oracle | run | sweep | verify.

Exit codes: 0 success, 1 a verification suite failed, 2 polynomial
certification failed, 3 invalid configuration or arguments.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from ..densityops import read_instance
from ..errors import CertificationError, InvalidArgumentError
from .config import FIXTURES, MODES, QUANTITIES, ConfigError, ExperimentConfig, load_config
from .experiments import (SWEEP_COLUMNS, columns_for, generate_instance, loglog_slope,
                          oracle_report, rows_to_csv, run_trials, sweep)
from .suites import MUTATIONS, SUITES, run_suites

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_CERTIFICATION, EXIT_CONFIG = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _csv_floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _csv_ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config; flags override its fields")
    p.add_argument("--alpha", type=float)
    p.add_argument("--dim", type=int)
    p.add_argument("--rank", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", dest="output_path", help="output file or directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tsallis-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a random instance pair and its oracle manifest")
    _add_experiment_flags(g)

    o = sub.add_parser("oracle", help="exact divergences of an instance pair")
    o.add_argument("rho")
    o.add_argument("sigma")
    o.add_argument("--alpha", type=float, default=0.5)

    r = sub.add_parser("run", help="repeated estimator trials, one CSV row each")
    _add_experiment_flags(r)
    r.add_argument("--quantity", choices=QUANTITIES)
    r.add_argument("--thresholds", type=_csv_floats, help="certification thresholds lo,hi")
    r.add_argument("--fixture", choices=FIXTURES)
    r.add_argument("--rho", dest="rho_path")
    r.add_argument("--sigma", dest="sigma_path")
    r.add_argument("--timing", action="store_true", default=None,
                   help="record wall-clock time (output is then not reproducible)")

    s = sub.add_parser("sweep", help="aggregate runs over a parameter grid")
    _add_experiment_flags(s)
    s.add_argument("--alphas", type=_csv_floats)
    s.add_argument("--ranks", type=_csv_ints)
    s.add_argument("--epss", type=_csv_floats)
    s.add_argument("--modes", type=lambda t: [m for m in t.split(",") if m])

    v = sub.add_parser("verify", help="run the property suites")
    v.add_argument("--suite", action="append", choices=sorted(SUITES),
                   help="run only this suite (repeatable)")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--mutate", choices=sorted(MUTATIONS), help=argparse.SUPPRESS)
    return parser


_CONFIG_FIELDS = ("alpha", "dim", "rank", "eps", "trials", "mode", "seed", "output_path",
                  "quantity", "thresholds", "fixture", "rho_path", "sigma_path", "timing")


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        cfg = load_config(Path(args.config).read_text())
    updates = {k: getattr(args, k) for k in _CONFIG_FIELDS
               if getattr(args, k, None) is not None}
    if "thresholds" in updates:
        if len(updates["thresholds"]) != 2:
            raise ConfigError("--thresholds takes exactly two values")
        updates["thresholds"] = tuple(updates["thresholds"])
        updates.setdefault("quantity", "certify")
    return replace(cfg, **updates).validate()


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_gen(args) -> int:
    cfg = config_from_args(args)
    manifest = generate_instance(cfg, cfg.output_path or ".")
    print(json.dumps(manifest["oracle"], sort_keys=True))
    return EXIT_OK


def _cmd_oracle(args) -> int:
    rho, sigma = read_instance(args.rho), read_instance(args.sigma)
    print(json.dumps(oracle_report(rho, sigma, args.alpha), indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = config_from_args(args)
    rows = run_trials(cfg)
    _emit(rows_to_csv(rows, columns_for(cfg)), cfg.output_path)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = config_from_args(args)
    alphas = args.alphas or [cfg.alpha]
    ranks = args.ranks or [cfg.rank]
    epss = args.epss or [cfg.eps]
    modes = args.modes or [cfg.mode]
    bad = [m for m in modes if m not in MODES]
    if bad:
        raise ConfigError(f"unknown modes {bad}")
    rows = sweep(cfg, alphas, ranks, epss, modes)
    _emit(rows_to_csv(rows, SWEEP_COLUMNS), cfg.output_path)
    if len(ranks) >= 2 and modes == ["query"] and len(alphas) == 1 and len(epss) == 1:
        q = [float(r["mean_queries_rho"]) + float(r["mean_queries_sigma"]) for r in rows]
        slope = loglog_slope(ranks, q)
        print(f"# query-count log-log slope in r: {slope:.3f}", file=sys.stderr)
        if slope > 2.0:
            warnings.warn(f"query-count slope {slope:.3f} exceeds 1.5 + 0.5", stacklevel=1)
    return EXIT_OK


def _cmd_verify(args) -> int:
    results = run_suites(args.suite, seed=args.seed, mutation=args.mutate)
    for res in results:
        print("\n".join(res.lines()))
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} suites passed"
          + (f"; failed: {', '.join(failed)}" if failed else ""))
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


_COMMANDS = {"gen": _cmd_gen, "oracle": _cmd_oracle, "run": _cmd_run, "sweep": _cmd_sweep,
             "verify": _cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except CertificationError as exc:
        print(f"certification failure: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    except (InvalidArgumentError, OSError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
