"""Command-line entry point: ``herkfac {train,eval,plot,sweep}``."""

from __future__ import annotations

import argparse
import logging
import re
import sys

from ..envs import make_env
from ..errors import (CheckpointError, ConfigError, CurvatureError, FormatError,
                      NumericError)
from .checkpoint import load_checkpoint
from .config import load_config
from .plot import emit_plot
from .sweep import sweep
from .training import evaluate, train

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _parse_env(name: str, actor_in: int) -> dict:
    """``point_reach``, ``point_reach(8)`` or ``bit_flip(10)``; n inferred from the actor if omitted."""
    m = re.fullmatch(r"\s*(\w+)\s*(?:\((\d+)\))?\s*", name)
    if not m:
        raise ConfigError(f"cannot parse environment {name!r}")
    env_name, n = m.group(1), m.group(2)
    params = {}
    if env_name in ("point_reach", "bit_flip"):
        params["n"] = int(n) if n else actor_in // 2
    elif n:
        raise ConfigError(f"{env_name} takes no size parameter")
    return {"name": env_name, **params}


def _parse_grid(items: list[str]) -> dict[str, list[str]]:
    grid = {}
    for item in items:
        key, sep, values = item.partition("=")
        if not sep or not values:
            raise ConfigError(f"--grid expects key=v1,v2, got {item!r}")
        grid[key.strip()] = [v.strip() for v in values.split(",")]
    return grid


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    _, rows = train(cfg)
    print(f"final eval_success_rate {rows[-1].eval_success_rate:.3f} after {rows[-1].epoch} epochs")
    return EXIT_OK


def cmd_eval(args) -> int:
    agent = load_checkpoint(args.checkpoint)
    params = _parse_env(args.env, agent.actor_in)
    env = make_env(params.pop("name"), **params)
    if env.spec.obs_dim + env.spec.goal_dim != agent.actor_in:
        raise ConfigError("environment does not match the checkpoint's network dimensions")
    rate = evaluate(agent, env, args.episodes, args.seed)
    print(f"success_rate {rate:.4f}")
    return EXIT_OK


def cmd_plot(args) -> int:
    paths = [p for p in args.metrics.split(",") if p]
    emit_plot(paths, args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    summary = sweep(cfg, _parse_grid(args.grid or []), args.out)
    for row in summary:
        print(f"{row['run']}: eval_success_rate {row['eval_success_rate']:.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="herkfac", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an agent from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint without exploration noise")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--env", required=True)
    p.add_argument("--episodes", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="SVG chart of eval success rate per epoch")
    p.add_argument("--metrics", required=True, help="comma-separated metrics CSV paths")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("sweep", help="grid search over config keys")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", action="append", help="key=v1,v2 (repeatable)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except (CheckpointError, FormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericError, CurvatureError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
