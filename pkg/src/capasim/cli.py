"""Command-line interface: run, compare, and oracle subcommands."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

from .config import ScenarioConfig, default_config, parse_config, with_overrides
from .errors import CapasimError
from .report import write_comparison_outputs, write_oracle_outputs, write_run_outputs
from .runner import compare_runs, execute_run, oracle_comparison
from .world import cents_to_euros

DEFAULT_OUT_DIR = "capasim_out"
OUT_DIR_ENV = "CAPASIM_OUT"


def _load_config(path: Optional[str]) -> ScenarioConfig:
    if path is None:
        return default_config()
    return parse_config(Path(path).read_text())


def _resolve_out_dir(cli_out: Optional[str], config: ScenarioConfig) -> Path:
    if cli_out:
        return Path(cli_out)
    if config.output.directory:
        return Path(config.output.directory)
    return Path(os.environ.get(OUT_DIR_ENV) or DEFAULT_OUT_DIR)


def _plots_enabled(args: argparse.Namespace, config: ScenarioConfig) -> bool:
    return config.output.plots and not args.no_plots


def _apply_common_overrides(args: argparse.Namespace, config: ScenarioConfig) -> ScenarioConfig:
    policy_on = None
    if getattr(args, "policy", None) is not None:
        policy_on = args.policy == "on"
    return with_overrides(config, seed=args.seed, episodes=args.episodes, policy_on=policy_on)


def cmd_run(args: argparse.Namespace) -> int:
    config = _apply_common_overrides(args, _load_config(args.config))
    out_dir = _resolve_out_dir(args.out, config)
    artifacts = execute_run(config)
    written = write_run_outputs(artifacts, out_dir, plots=_plots_enabled(args, config))
    for agent in artifacts.summary["agents"]:
        strategy = " ".join(agent["strategy"]) or "(none)"
        print(
            f"agent {agent['id']} ({'registered' if agent['registered_at_start'] else 'non-registered'}): "
            f"{strategy} -> {agent['terminal']} "
            f"({cents_to_euros(agent['billed_cents']):.2f} EUR billed)"
        )
    print(
        f"total billed {cents_to_euros(artifacts.summary['total_billed_cents']):.2f} EUR, "
        f"remaining budget {cents_to_euros(artifacts.summary['remaining_budget_cents']):.2f} EUR"
    )
    print(f"wrote {len(written)} files to {out_dir}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    config = with_overrides(_load_config(args.config), seed=args.seed, episodes=args.episodes)
    out_dir = _resolve_out_dir(args.out, config)
    comparison = compare_runs(config)
    written = write_comparison_outputs(comparison, out_dir, plots=_plots_enabled(args, config))
    diff = comparison.diff
    print(
        f"total billed: policy on {cents_to_euros(diff['total_billed_cents_on']):.2f} EUR, "
        f"policy off {cents_to_euros(diff['total_billed_cents_off']):.2f} EUR, "
        f"delta {cents_to_euros(diff['total_billed_cents_delta']):.2f} EUR"
    )
    header = f"{'agent':>5} {'len on':>7} {'len off':>8} {'cost on':>9} {'cost off':>9}"
    print(header)
    for agent in diff["per_agent"]:
        print(
            f"{agent['id']:>5} {agent['strategy_length_on']:>7} {agent['strategy_length_off']:>8} "
            f"{cents_to_euros(agent['billed_cents_on']):>9.2f} {cents_to_euros(agent['billed_cents_off']):>9.2f}"
        )
    print(f"wrote {len(written)} files to {out_dir}")
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    config = _apply_common_overrides(args, _load_config(args.config))
    out_dir = _resolve_out_dir(args.out, config)
    report = oracle_comparison(config)
    write_oracle_outputs(report, out_dir)
    print(f"{'agent':>5} {'trained':>30} {'oracle':>30} {'match':>6}")
    for agent in report["agents"]:
        print(
            f"{agent['id']:>5} {' '.join(agent['trained_strategy']):>30} "
            f"{' '.join(agent['oracle_strategy']):>30} {str(agent['match']).lower():>6}"
        )
    print(f"wrote oracle report to {out_dir / 'oracle.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capasim",
        description="Seed-reproducible policy-scenario simulator with capability-based evaluation.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add_common(sub: argparse.ArgumentParser, with_policy: bool = True) -> None:
        sub.add_argument("--config", help="path to a scenario config (JSON); defaults are built in")
        sub.add_argument("--seed", type=int, help="override the training seed")
        sub.add_argument("--out", help=f"output directory (default: ${OUT_DIR_ENV} or ./{DEFAULT_OUT_DIR})")
        sub.add_argument("--episodes", type=int, help="override the number of training episodes")
        sub.add_argument("--no-plots", action="store_true", help="skip figure rendering")
        if with_policy:
            sub.add_argument("--policy", choices=["on", "off"], help="override the registration gate")

    run_parser = subparsers.add_parser("run", help="train, roll out greedily, evaluate, write outputs")
    add_common(run_parser)
    run_parser.set_defaults(func=cmd_run)

    compare_parser = subparsers.add_parser("compare", help="run with the policy gate on and off, then diff")
    add_common(compare_parser, with_policy=False)
    compare_parser.set_defaults(func=cmd_compare)

    oracle_parser = subparsers.add_parser("oracle", help="exact solver vs trained policies")
    add_common(oracle_parser)
    oracle_parser.set_defaults(func=cmd_oracle)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapasimError as exc:
        print(json.dumps({"error": exc.as_record()}), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": {"type": "OSError", "message": str(exc)}}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
