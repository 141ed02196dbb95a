"""Command-line entry point: ``diverse-nystrom <task> [--config FILE] [--field VALUE ...]``.

Exit codes: 0 on success, 1 when a verification check fails, 2 on a
configuration or data error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .datasets import DataError
from .experiments import TASKS, ConfigError, ExperimentConfig, load_config, run

log = logging.getLogger("diverse_nystrom")

_INT = ("n", "d", "k", "dp_count", "prelim_draws", "max_iter", "seed", "trials", "n_rrls",
        "cv_folds", "n_bins", "clusters", "restarts", "verify_instances", "mc_samples")
_FLOAT = ("b", "noise", "sigma", "lam", "dp_min", "dp_max", "epsilon", "oversample", "gamma",
          "quantile", "delta")
_BOOL = ("sweep", "standardize")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="diverse-nystrom",
        description="Landmark sampling experiments for Nystrom kernel approximation.")
    p.add_argument("task", choices=TASKS)
    p.add_argument("--config", help="JSON file with configuration fields")
    p.add_argument("-v", "--verbose", action="store_true")
    for name in ExperimentConfig.field_names():
        if name == "task":
            continue
        flag = "--lambda" if name == "lam" else "--" + name.replace("_", "-")
        if name in _BOOL:
            p.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction, default=None)
        else:
            kind = int if name in _INT else float if name in _FLOAT else str
            p.add_argument(flag, dest=name, type=kind, default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    overrides = {"task": args.task}
    for name in ExperimentConfig.field_names():
        value = getattr(args, name, None)
        if name != "task" and value is not None:
            overrides["lambda" if name == "lam" else name] = value
    try:
        config = load_config(args.config, overrides)
        result = run(config)
    except (ConfigError, DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for line in result.lines:
        print(line)
    for path in result.paths:
        log.info("wrote %s", path)
    return 1 if result.failed else 0


if __name__ == "__main__":
    sys.exit(main())
