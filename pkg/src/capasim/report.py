"""File outputs: delimited tables, the summary document, and rendered figures.

Column sets and orderings are fixed; tests pin them. Money columns are integer
cents, booleans are lowercase true/false, and no wall-clock data is written,
so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import TYPE_CHECKING

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .world import cents_to_euros

if TYPE_CHECKING:
    from .runner import ComparisonArtifacts, RunArtifacts

LEARNING_CURVE_COLUMNS = ["episode", "agent_id", "return", "epsilon"]
LEDGER_COLUMNS = ["timestep", "agent_id", "service", "amount_cents", "remaining_cents"]
ROLLOUT_BASE_COLUMNS = ["step", "agent_id", "action", "feasible", "reward", "health", "registered"]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_learning_curves(artifacts: "RunArtifacts", path: Path) -> None:
    rows = []
    for episode, epsilon in enumerate(artifacts.training.epsilons):
        for agent_id in sorted(artifacts.training.curves):
            rows.append([episode, agent_id, artifacts.training.curves[agent_id][episode], epsilon])
    _write_csv(path, LEARNING_CURVE_COLUMNS, rows)


def rollout_columns(artifacts: "RunArtifacts") -> list[str]:
    caps = artifacts.scenario.catalog.evaluated_capabilities()
    return ROLLOUT_BASE_COLUMNS + [f"cap_{c.value}" for c in caps]


def write_rollout(artifacts: "RunArtifacts", path: Path) -> None:
    caps = artifacts.scenario.catalog.evaluated_capabilities()
    scale = artifacts.scenario.population.scale
    rows = []
    per_agent_index = {agent_id: 0 for agent_id in artifacts.capabilities}
    for step in artifacts.rollout.steps:
        agent_id = step.agent_id
        scores = artifacts.capabilities[agent_id].scores[per_agent_index[agent_id]]
        per_agent_index[agent_id] += 1
        rows.append(
            [
                step.timestep,
                agent_id,
                step.action.label,
                step.action in step.partition.possible,
                step.reward,
                step.record.health_after * scale.delta,
                step.record.registered_after,
            ]
            + [scores[c] for c in caps]
        )
    _write_csv(path, rollout_columns(artifacts), rows)


def write_ledger(artifacts: "RunArtifacts", path: Path) -> None:
    rows = []
    remaining = artifacts.rollout.ledger.initial_cents
    for entry in artifacts.rollout.ledger.entries:
        remaining -= entry.amount_cents
        rows.append([entry.timestep, entry.agent_id, entry.service.value, entry.amount_cents, remaining])
    _write_csv(path, LEDGER_COLUMNS, rows)


def write_summary(artifacts: "RunArtifacts", path: Path) -> None:
    path.write_text(json.dumps(artifacts.summary, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# figures

def _moving_average(values: list[float], window: int = 10) -> list[float]:
    return [sum(values[max(0, i - window + 1): i + 1]) / len(values[max(0, i - window + 1): i + 1])
            for i in range(len(values))]


def _agent_label(artifacts: "RunArtifacts", agent_id: int) -> str:
    profile = next(p for p in artifacts.training.profiles if p.id == agent_id)
    status = "registered" if profile.registered else "non-registered"
    return f"agent {agent_id} ({status})"


def render_learning_curves(artifacts: "RunArtifacts", path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    for agent_id in sorted(artifacts.training.curves):
        returns = artifacts.training.curves[agent_id]
        label = _agent_label(artifacts, agent_id)
        (line,) = ax.plot(returns, alpha=0.3)
        ax.plot(_moving_average(returns), color=line.get_color(), label=f"{label}, 10-episode mean")
    ax.set_xlabel("episode")
    ax.set_ylabel("episode return")
    ax.set_title("Learning curves")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_strategies(artifacts: "RunArtifacts", path: Path) -> None:
    agent_ids = sorted(artifacts.capabilities)
    fig, axes = plt.subplots(len(agent_ids), 1, figsize=(7, 2.2 * len(agent_ids)), sharex=True, squeeze=False)
    from .mdp import ACTIONS

    for ax, agent_id in zip(axes.flat, agent_ids):
        steps = artifacts.rollout.agent_steps(agent_id)
        xs = [s.timestep for s in steps]
        ys = [int(s.action) for s in steps]
        ax.step(xs, ys, where="post", marker="o")
        ax.set_yticks([int(a) for a in ACTIONS])
        ax.set_yticklabels([a.label for a in ACTIONS])
        ax.set_ylim(0.5, len(ACTIONS) + 0.5)
        ax.set_title(_agent_label(artifacts, agent_id))
        ax.grid(alpha=0.3)
    axes.flat[-1].set_xlabel("simulation step")
    fig.suptitle("Greedy strategies")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_capabilities(artifacts: "RunArtifacts", path: Path) -> None:
    caps = artifacts.scenario.catalog.evaluated_capabilities()
    fig, axes = plt.subplots(len(caps), 1, figsize=(7, 2.6 * len(caps)), sharex=True, squeeze=False)
    for ax, capability in zip(axes.flat, caps):
        for agent_id in sorted(artifacts.capabilities):
            series = artifacts.capabilities[agent_id].series(capability)
            ax.plot(series, marker="o", label=_agent_label(artifacts, agent_id))
        ax.set_ylabel(capability.value)
        ax.set_ylim(-0.05, 1.05)
        ax.grid(alpha=0.3)
    axes.flat[0].legend()
    axes.flat[-1].set_xlabel("simulation step")
    fig.suptitle("Capability scores over the rollout")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_functionings(artifacts: "RunArtifacts", path: Path) -> None:
    fig, (ax_health, ax_reg) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    for agent_id in sorted(artifacts.functionings):
        rows = artifacts.functionings[agent_id].rows
        label = _agent_label(artifacts, agent_id)
        ax_health.plot([r.step for r in rows], [r.health for r in rows], marker="o", label=label)
        ax_reg.step(
            [r.step for r in rows], [int(r.registered) for r in rows], where="post", marker="o", label=label
        )
    ax_health.set_ylabel("health")
    ax_health.grid(alpha=0.3)
    ax_health.legend()
    ax_reg.set_ylabel("registered")
    ax_reg.set_yticks([0, 1])
    ax_reg.set_xlabel("simulation step")
    ax_reg.grid(alpha=0.3)
    fig.suptitle("Functionings over the rollout")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_cost_comparison(comparison: "ComparisonArtifacts", path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    totals = [
        cents_to_euros(comparison.diff["total_billed_cents_on"]),
        cents_to_euros(comparison.diff["total_billed_cents_off"]),
    ]
    ax.bar(["policy on", "policy off"], totals)
    for i, total in enumerate(totals):
        ax.annotate(f"{total:.2f}", (i, total), ha="center", va="bottom")
    ax.set_ylabel("total billed (euros)")
    ax.set_title("Cost of learned strategies")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


# ---------------------------------------------------------------------------
# top-level writers

def write_run_outputs(artifacts: "RunArtifacts", out_dir: Path, plots: bool | None = None) -> list[Path]:
    """Write every run artifact into the directory; returns the written paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    formats = artifacts.config.output.formats
    if plots is None:
        plots = artifacts.config.output.plots
    written: list[Path] = []
    if "csv" in formats:
        for name, writer in (
            ("learning_curves.csv", write_learning_curves),
            ("rollout.csv", write_rollout),
            ("ledger.csv", write_ledger),
        ):
            path = out_dir / name
            writer(artifacts, path)
            written.append(path)
    if "json" in formats:
        path = out_dir / "summary.json"
        write_summary(artifacts, path)
        written.append(path)
    if plots:
        for name, renderer in (
            ("learning_curves.png", render_learning_curves),
            ("rollout_strategies.png", render_strategies),
            ("rollout_capabilities.png", render_capabilities),
            ("rollout_functionings.png", render_functionings),
        ):
            path = out_dir / name
            renderer(artifacts, path)
            written.append(path)
    return written


def write_comparison_outputs(
    comparison: "ComparisonArtifacts", out_dir: Path, plots: bool | None = None
) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    if plots is None:
        plots = comparison.policy_on.config.output.plots
    written = write_run_outputs(comparison.policy_on, out_dir / "policy_on", plots)
    written += write_run_outputs(comparison.policy_off, out_dir / "policy_off", plots)
    compare_json = out_dir / "comparison.json"
    compare_json.write_text(json.dumps(comparison.diff, indent=2, sort_keys=True) + "\n")
    written.append(compare_json)
    compare_csv = out_dir / "comparison.csv"
    caps = comparison.policy_on.scenario.catalog.evaluated_capabilities()
    header = [
        "agent_id", "strategy_length_on", "strategy_length_off", "strategy_length_delta",
        "billed_cents_on", "billed_cents_off", "billed_cents_delta",
    ] + [f"time_to_max_{c.value}_{side}" for c in caps for side in ("on", "off", "delta")]
    rows = []
    for agent in comparison.diff["per_agent"]:
        row = [
            agent["id"], agent["strategy_length_on"], agent["strategy_length_off"],
            agent["strategy_length_delta"], agent["billed_cents_on"], agent["billed_cents_off"],
            agent["billed_cents_delta"],
        ]
        for capability in caps:
            ttm = agent["time_to_max_capability"][capability.value]
            row += [
                "" if ttm["policy_on"] is None else ttm["policy_on"],
                "" if ttm["policy_off"] is None else ttm["policy_off"],
                "" if ttm["delta"] is None else ttm["delta"],
            ]
        rows.append(row)
    _write_csv(compare_csv, header, rows)
    written.append(compare_csv)
    if plots:
        figure = out_dir / "comparison_costs.png"
        render_cost_comparison(comparison, figure)
        written.append(figure)
    return written


def write_oracle_outputs(report: dict, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "oracle.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return [path]
