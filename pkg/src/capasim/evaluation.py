"""Capability and functioning assessment plus cost reporting.

Capability scores are exact rational arithmetic over the evaluation weights:
score(c) = sum(alpha_k * feasible_k) / sum(|alpha_k|) over the weighted links
of capability c, so every score lands in [-1, 1] (in [0, 1] for all-positive
weights).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .agents import TerminalKind
from .errors import UndefinedMetricError
from .learning import EpisodeTrace
from .mdp import Action, Capability, CapabilityCatalog, FeasibilityPartition
from .world import BudgetLedger, Facility


def central_capability(
    feasibility: FeasibilityPartition,
    catalog: CapabilityCatalog,
    capability: Capability,
    state_dependent_weights: bool = False,
) -> float:
    """Weighted share of the capability's evaluation-linked actions that are feasible."""
    links = catalog.evaluation_links(capability)
    if not links:
        raise UndefinedMetricError(f"capability {capability.value} has no weighted evaluation links")
    numerator = Fraction(0)
    denominator = Fraction(0)
    for link in links:
        feasible = link.action in feasibility.possible
        if state_dependent_weights and link.weight_when_restoring_only and not feasible:
            continue  # alternate reading: a conditional weight only counts while it can restore
        numerator += link.eval_weight * (1 if feasible else 0)
        denominator += abs(link.eval_weight)
    if denominator == 0:
        raise UndefinedMetricError(f"capability {capability.value} has no active evaluation links")
    return float(numerator / denominator)


@dataclass
class CapabilityReport:
    agent_id: int
    scores: list[dict[Capability, float]] = field(default_factory=list)
    indicators: list[dict[Action, bool]] = field(default_factory=list)

    def series(self, capability: Capability) -> list[float]:
        return [row[capability] for row in self.scores]


@dataclass(frozen=True)
class FunctioningRow:
    step: int
    action: Action
    health: float
    registered: bool
    terminal: TerminalKind


@dataclass
class FunctioningReport:
    agent_id: int
    rows: list[FunctioningRow] = field(default_factory=list)


def capability_report(
    trace: EpisodeTrace,
    agent_id: int,
    catalog: CapabilityCatalog,
    state_dependent_weights: bool = False,
) -> CapabilityReport:
    """Score the agent's opportunity set at each of its decision points."""
    report = CapabilityReport(agent_id=agent_id)
    for step in trace.agent_steps(agent_id):
        report.scores.append(
            {
                capability: central_capability(
                    step.partition, catalog, capability, state_dependent_weights
                )
                for capability in catalog.evaluated_capabilities()
            }
        )
        report.indicators.append({a: a in step.partition.possible for a in Action})
    return report


def functioning_report(trace: EpisodeTrace, agent_id: int, health_delta: float) -> FunctioningReport:
    """Project the realized trajectory: action taken, resulting health and status."""
    report = FunctioningReport(agent_id=agent_id)
    for index, step in enumerate(trace.agent_steps(agent_id)):
        report.rows.append(
            FunctioningRow(
                step=index,
                action=step.action,
                health=step.record.health_after * health_delta,
                registered=step.record.registered_after,
                terminal=step.terminal,
            )
        )
    return report


def time_to_max(series: Sequence[float]) -> Optional[int]:
    """First step at which the series reaches its running maximum; None for empty series."""
    if not series:
        return None
    peak = max(series)
    return next(i for i, value in enumerate(series) if value == peak)


@dataclass
class PopulationAggregate:
    mean: dict[Capability, list[float]]
    scores: dict[Capability, list[list[float]]]
    deprived: dict[Capability, list[list[int]]]  # per timestep, ids below both thresholds


def population_aggregate(
    reports: Sequence[CapabilityReport],
    functionings: Optional[Sequence[FunctioningReport]] = None,
    capability_threshold: float = 0.5,
    functioning_threshold: float = 1.0,
) -> PopulationAggregate:
    """Mean and distribution of scores per capability per timestep, plus the
    agents simultaneously below the capability and functioning thresholds."""
    if not reports:
        raise ValueError("population_aggregate needs at least one capability report")
    capabilities = list(reports[0].scores[0].keys()) if reports[0].scores else []
    health_by_agent: dict[int, list[float]] = {}
    for f in functionings or []:
        health_by_agent[f.agent_id] = [row.health for row in f.rows]
    horizon = max((len(r.scores) for r in reports), default=0)
    mean: dict[Capability, list[float]] = {c: [] for c in capabilities}
    scores: dict[Capability, list[list[float]]] = {c: [] for c in capabilities}
    deprived: dict[Capability, list[list[int]]] = {c: [] for c in capabilities}
    for t in range(horizon):
        active = [r for r in reports if t < len(r.scores)]
        for capability in capabilities:
            at_t = [r.scores[t][capability] for r in active]
            mean[capability].append(sum(at_t) / len(at_t))
            scores[capability].append(sorted(at_t))
            flagged = []
            for r in active:
                if r.scores[t][capability] >= capability_threshold:
                    continue
                healths = health_by_agent.get(r.agent_id)
                if healths is not None and t < len(healths) and healths[t] >= functioning_threshold:
                    continue
                flagged.append(r.agent_id)
            deprived[capability].append(flagged)
    return PopulationAggregate(mean=mean, scores=scores, deprived=deprived)


@dataclass
class CostReport:
    label: str
    total_cents: int
    by_service_cents: dict[str, int]
    by_agent_cents: dict[int, int]
    remaining_cents: int
    exhausted: bool


def cost_report(ledger: BudgetLedger, label: str = "") -> CostReport:
    by_service = {facility.value: 0 for facility in (Facility.PHC, Facility.ICU)}
    by_agent: dict[int, int] = {}
    for entry in ledger.entries:
        by_service[entry.service.value] = by_service.get(entry.service.value, 0) + entry.amount_cents
        by_agent[entry.agent_id] = by_agent.get(entry.agent_id, 0) + entry.amount_cents
    return CostReport(
        label=label,
        total_cents=ledger.total_billed_cents,
        by_service_cents=by_service,
        by_agent_cents=by_agent,
        remaining_cents=ledger.remaining_cents,
        exhausted=ledger.exhausted,
    )
