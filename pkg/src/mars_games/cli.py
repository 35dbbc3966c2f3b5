"""Command-line entry point: ``gen``, ``run``, ``eval`` and ``slope`` subcommands.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.  The
``MARS_GAMES_LOG`` environment variable sets the logging level.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .exceptions import ConfigError, MarsGamesError, ParameterError
from .game import JointPolicy, MGSpec, validate_policy, validate_spec
from .harness import fit_slope, load_config, run_experiment
from .instances import bias_instance, lower_bound_mg, random_mg
from .regret import certify_approx, episode_gaps, read_csv_column

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _sidecar(out: Path, tag: str) -> Path:
    return out.with_name(f"{out.stem}.{tag}.json")


def cmd_gen(args) -> int:
    if args.kind == "bias":
        desc = bias_instance(len(args.betas), args.betas, args.H, args.K,
                             check_reward_range=not args.allow_large_reward)
    elif args.kind == "lower_bound":
        desc = lower_bound_mg(args.beta_star, args.H, args.K, args.machine, args.regime,
                              args.agents)
    else:
        desc = random_mg(args.seed, args.S, args.H, args.action_sizes, args.betas, args.sparsity)
    out = Path(args.out)
    desc.spec.to_json(out)
    _sidecar(out, "descriptor").write_text(desc.to_json() + "\n")
    for name, policy in desc.fixtures.items():
        _sidecar(out, name).write_text(json.dumps(policy.to_dict()) + "\n")
    print(out)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    summary = run_experiment(cfg, out_dir=args.out, workers=args.workers)
    print(json.dumps(summary.aggregate, indent=2, sort_keys=True))
    if summary.failures:
        for f in summary.failures:
            print(f"seed {f['seed']} failed: {f['error']}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_eval(args) -> int:
    spec = MGSpec.from_json(Path(args.spec))
    problems = validate_spec(spec)
    if problems and not args.allow_large_reward:
        raise ConfigError("; ".join(problems))
    policy = JointPolicy.from_dict(json.loads(Path(args.policy).read_text()))
    problems = validate_policy(policy, spec)
    if problems:
        raise ConfigError("; ".join(problems))
    gaps = episode_gaps(spec, policy, args.kind)
    eps = certify_approx(spec, policy, args.kind)
    print(json.dumps({"kind": args.kind, "gaps": [float(g) for g in gaps], "eps": eps}))
    return EXIT_OK


def cmd_slope(args) -> int:
    ks, vals = read_csv_column(args.csv, args.column)
    print(repr(fit_slope(ks, vals, args.window)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mars-games",
                                     description="Risk-sensitive self-play experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a game instance as JSON")
    gen.add_argument("--kind", choices=["bias", "lower_bound", "random"], required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--H", type=int, default=3)
    gen.add_argument("--K", type=int, default=1000)
    gen.add_argument("--betas", type=float, nargs="+", default=[1.0])
    gen.add_argument("--allow-large-reward", action="store_true",
                     help="bias instance: permit K below Phi_H(beta_*)^2")
    gen.add_argument("--beta-star", type=float, default=1.0)
    gen.add_argument("--machine", type=int, choices=[1, 2], default=1)
    gen.add_argument("--regime", choices=["exp", "inv_h"], default="exp")
    gen.add_argument("--agents", type=int, default=1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--S", type=int, default=2)
    gen.add_argument("--action-sizes", type=int, nargs="+", default=[2, 2])
    gen.add_argument("--sparsity", type=float, default=0.0)
    gen.set_defaults(func=cmd_gen)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--out")
    run.add_argument("--workers", type=int)
    run.set_defaults(func=cmd_run)

    ev = sub.add_parser("eval", help="static gap evaluation of a fixed policy")
    ev.add_argument("--spec", required=True)
    ev.add_argument("--policy", required=True)
    ev.add_argument("--kind", choices=["ne", "ce", "cce"], required=True)
    ev.add_argument("--allow-large-reward", action="store_true")
    ev.set_defaults(func=cmd_eval)

    sl = sub.add_parser("slope", help="log-log slope of a CSV column")
    sl.add_argument("--csv", required=True)
    sl.add_argument("--column", default="balanced_cum")
    sl.add_argument("--window", type=float, default=0.5)
    sl.set_defaults(func=cmd_slope)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("MARS_GAMES_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MarsGamesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
