"""Command line entry point: ``regdyn run|validate|verify``."""

from __future__ import annotations

import argparse
import sys

from .config import ExperimentConfig, validate_config
from .errors import ConfigError, DomainError, SimulationError
from .harness import run_experiment, verify_output


def _load(path):
    try:
        return ExperimentConfig.load(path)
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        return None


def cmd_run(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return 2
    diags = validate_config(cfg)
    if diags:
        for d in diags:
            print(f"error: {d}", file=sys.stderr)
        return 2
    try:
        status, summary = run_experiment(cfg, out_dir=args.out, seed=args.seed, workers=args.threads)
    except (ConfigError, DomainError, SimulationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for c in summary["checks"]:
        tag = "PASS" if c["pass"] else "FAIL"
        if not c["applicable"]:
            tag += " (not applicable)"
        print(f"{tag} {c['name']}")
    print(f"{'all checks passed' if status == 0 else 'some checks failed'}; outputs: {', '.join(summary['manifest'])}, summary.json")
    return status


def cmd_validate(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return 2
    diags = validate_config(cfg)
    for d in diags:
        print(d)
    if not diags:
        print("ok")
    return 0 if not diags else 1


def cmd_verify(args) -> int:
    problems = verify_output(args.out_dir)
    for p in problems:
        print(p)
    if not problems:
        print("ok")
    return 0 if not problems else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="regdyn", description="Stochastic regularized learning experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: OUT_DIR or output.dir)")
    r.add_argument("--seed", type=int, help="override the seed (default: SEED or config)")
    r.add_argument("--threads", type=int, help="worker processes (default: THREADS or 1)")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)
    f = sub.add_parser("verify", help="re-check embedded hashes of an output directory")
    f.add_argument("out_dir")
    f.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
