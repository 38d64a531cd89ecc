"""Run orchestration: train, roll out greedily, evaluate, diff scenarios."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .agents import TerminalKind
from .config import ScenarioConfig, build_scenario, config_hash, config_to_dict, with_overrides
from .evaluation import (
    CapabilityReport,
    CostReport,
    FunctioningReport,
    capability_report,
    cost_report,
    functioning_report,
    time_to_max,
)
from .learning import EpisodeTrace, Scenario, TrainResult, greedy_controller, greedy_rollout, train
from .oracle import OracleResult, oracle_rollout, value_iteration_oracle


@dataclass
class RunArtifacts:
    config: ScenarioConfig
    scenario: Scenario
    training: TrainResult
    rollout: EpisodeTrace
    capabilities: dict[int, CapabilityReport] = field(default_factory=dict)
    functionings: dict[int, FunctioningReport] = field(default_factory=dict)
    costs: Optional[CostReport] = None
    summary: dict = field(default_factory=dict)


def _agent_summary(artifacts: RunArtifacts, agent_id: int) -> dict:
    scenario = artifacts.scenario
    start = next(p for p in artifacts.training.profiles if p.id == agent_id)
    steps = artifacts.rollout.agent_steps(agent_id)
    final = next(p for p in artifacts.rollout.final_agents if p.id == agent_id)
    cap_report = artifacts.capabilities[agent_id]
    scale = scenario.population.scale
    billed = [e for e in artifacts.rollout.ledger.entries if e.agent_id == agent_id]
    by_service: dict[str, int] = {}
    for entry in billed:
        by_service[entry.service.value] = by_service.get(entry.service.value, 0) + entry.amount_cents
    return {
        "id": agent_id,
        "registered_at_start": start.registered,
        "start_health": start.health_value(scale),
        "strategy": [step.action.label for step in steps],
        "strategy_length": len(steps),
        "terminal": final.terminal.value,
        "truncated": final.terminal is TerminalKind.NONE,
        "return": sum(step.reward for step in steps),
        "billed_cents": sum(e.amount_cents for e in billed),
        "billed_by_service_cents": by_service,
        "final_health": final.health_value(scale),
        "final_registered": final.registered,
        "final_capabilities": (
            {c.value: s for c, s in cap_report.scores[-1].items()} if cap_report.scores else {}
        ),
        "time_to_max_capability": {
            c.value: time_to_max(cap_report.series(c))
            for c in scenario.catalog.evaluated_capabilities()
        },
    }


def execute_run(config: ScenarioConfig) -> RunArtifacts:
    """Train on the scenario, play the learned strategies once, and evaluate them."""
    scenario = build_scenario(config)
    training = train(scenario)
    controllers = {agent_id: greedy_controller(q) for agent_id, q in training.qtables.items()}
    rollout = greedy_rollout(scenario, controllers, profiles=training.profiles)
    artifacts = RunArtifacts(config=config, scenario=scenario, training=training, rollout=rollout)
    state_dependent = config.evaluation.state_dependent_weights
    for profile in training.profiles:
        artifacts.capabilities[profile.id] = capability_report(
            rollout, profile.id, scenario.catalog, state_dependent
        )
        artifacts.functionings[profile.id] = functioning_report(
            rollout, profile.id, scenario.population.scale.delta
        )
    artifacts.costs = cost_report(rollout.ledger, label="run")
    agents = [_agent_summary(artifacts, p.id) for p in training.profiles]
    artifacts.summary = {
        "seed": scenario.hyper.seed,
        "config_hash": config_hash(config),
        "phc_requires_registration": scenario.policy.phc_requires_registration,
        "episodes": scenario.hyper.episodes,
        "agents": agents,
        "total_billed_cents": artifacts.costs.total_cents,
        "billed_by_service_cents": artifacts.costs.by_service_cents,
        "remaining_budget_cents": artifacts.costs.remaining_cents,
        "budget_exhausted": artifacts.costs.exhausted,
        "non_convergence": any(a["terminal"] != TerminalKind.HEALTHY.value for a in agents),
        "config": config_to_dict(config),
    }
    return artifacts


@dataclass
class ComparisonArtifacts:
    policy_on: RunArtifacts
    policy_off: RunArtifacts
    diff: dict = field(default_factory=dict)


def compare_runs(config: ScenarioConfig) -> ComparisonArtifacts:
    """Run the scenario with the access gate on and off under the same seed."""
    on = execute_run(with_overrides(config, policy_on=True))
    off = execute_run(with_overrides(config, policy_on=False))
    per_agent = []
    for agent_on, agent_off in zip(on.summary["agents"], off.summary["agents"]):
        ttm = {}
        for capability in on.scenario.catalog.evaluated_capabilities():
            t_on = agent_on["time_to_max_capability"][capability.value]
            t_off = agent_off["time_to_max_capability"][capability.value]
            ttm[capability.value] = {
                "policy_on": t_on,
                "policy_off": t_off,
                "delta": None if t_on is None or t_off is None else t_on - t_off,
            }
        per_agent.append(
            {
                "id": agent_on["id"],
                "strategy_length_on": agent_on["strategy_length"],
                "strategy_length_off": agent_off["strategy_length"],
                "strategy_length_delta": agent_on["strategy_length"] - agent_off["strategy_length"],
                "billed_cents_on": agent_on["billed_cents"],
                "billed_cents_off": agent_off["billed_cents"],
                "billed_cents_delta": agent_on["billed_cents"] - agent_off["billed_cents"],
                "time_to_max_capability": ttm,
            }
        )
    diff = {
        "seed": on.summary["seed"],
        "config_hash": on.summary["config_hash"],
        "total_billed_cents_on": on.summary["total_billed_cents"],
        "total_billed_cents_off": off.summary["total_billed_cents"],
        "total_billed_cents_delta": on.summary["total_billed_cents"] - off.summary["total_billed_cents"],
        "per_agent": per_agent,
    }
    return ComparisonArtifacts(policy_on=on, policy_off=off, diff=diff)


def oracle_comparison(config: ScenarioConfig) -> dict:
    """Exact-solver policies and rollouts, matched against the trained strategies."""
    scenario = build_scenario(config)
    training = train(scenario)
    report: dict = {"seed": scenario.hyper.seed, "config_hash": config_hash(config), "agents": []}
    for profile in training.profiles:
        result: OracleResult = value_iteration_oracle(
            scenario.world, scenario.policy, profile, scenario.population.scale,
            scenario.catalog, scenario.hyper.gamma, scenario.hyper.state_key_mode,
        )
        oracle_trace = oracle_rollout(
            scenario.world, scenario.policy, profile, scenario.population.scale,
            scenario.catalog, scenario.hyper, result,
        )
        trained_trace = greedy_rollout(
            scenario, {profile.id: greedy_controller(training.qtables[profile.id])}, [profile]
        )
        trained_steps = trained_trace.agent_steps(profile.id)
        mismatches = [
            {"state": list(map(str, step.key)), "trained": step.action.label,
             "oracle": result.policy[step.key].label}
            for step in trained_steps
            if step.key in result.policy and result.policy[step.key] is not step.action
        ]
        report["agents"].append(
            {
                "id": profile.id,
                "registered_at_start": profile.registered,
                "oracle_strategy": [s.action.label for s in oracle_trace.agent_steps(profile.id)],
                "oracle_terminal": oracle_trace.final_agents[0].terminal.value,
                "oracle_start_value": (
                    result.values.get(trained_steps[0].key) if trained_steps else None
                ),
                "trained_strategy": [s.action.label for s in trained_steps],
                "trained_terminal": trained_trace.final_agents[0].terminal.value,
                "match": not mismatches,
                "mismatches": mismatches,
                "states_explored": result.states_explored,
            }
        )
    return report
