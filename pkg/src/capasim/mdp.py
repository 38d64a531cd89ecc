"""MDP core: actions, feasibility gating, deterministic transitions, rewards.

All transition functions are pure: they take a value-semantics `SimState` and
return a new one, so identical inputs always produce identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from fractions import Fraction
from typing import Optional, Sequence

from .agents import AgentProfile, HealthScale, TerminalKind, starting_terminal
from .errors import ContractViolation
from .world import BudgetLedger, Facility, PolicyRules, WorldModel, bill


class Action(IntEnum):
    """The four agent-initiated actions; hospitalization is a consequence, not an action."""

    REQUEST_PHC = 1
    SKIP_PHC = 2
    ENGAGE_SOCIAL = 3
    STAY_DISENGAGED = 4

    @property
    def label(self) -> str:
        return _ACTION_LABELS[self]


_ACTION_LABELS = {
    Action.REQUEST_PHC: "request_phc",
    Action.SKIP_PHC: "skip_phc",
    Action.ENGAGE_SOCIAL: "engage_social",
    Action.STAY_DISENGAGED: "stay_disengaged",
}

ACTIONS: tuple[Action, ...] = tuple(Action)
ACTION_BY_LABEL = {label: action for action, label in _ACTION_LABELS.items()}

# Choosing not to seek care or engagement is always open to the agent.
ALWAYS_POSSIBLE = frozenset({Action.SKIP_PHC, Action.STAY_DISENGAGED})


class Capability(str, Enum):
    LIFE = "life"
    BODILY_HEALTH = "bodily_health"
    BODILY_INTEGRITY = "bodily_integrity"
    PRACTICAL_REASON = "practical_reason"
    AFFILIATION = "affiliation"


class Polarity(str, Enum):
    RESTORES = "restores"
    DEPRIVES = "deprives"


@dataclass(frozen=True)
class CapabilityLink:
    """One edge of the action<->capability relation with its rewards and weight."""

    action: Action
    capability: Capability
    reward_possible: float
    reward_impossible: float
    eval_weight: Optional[Fraction] = None
    polarity: Polarity = Polarity.RESTORES
    # In the alternate, state-dependent weighting mode this link only counts
    # toward the capability score while its action is actually able to restore.
    weight_when_restoring_only: bool = False


@dataclass(frozen=True)
class CapabilityCatalog:
    """Ranked capabilities, action links, and the terminal deprivation penalty.

    The rank order is carried for reporting but nothing in the dynamics
    consumes it.
    """

    capabilities: tuple[Capability, ...]
    links: tuple[CapabilityLink, ...]
    terminal_penalty: float = 100.0

    def __post_init__(self) -> None:
        seen: set[tuple[Action, Capability]] = set()
        max_reward = 0.0
        for link in self.links:
            pair = (link.action, link.capability)
            if pair in seen:
                raise ValueError(f"duplicate capability link {link.action.label}->{link.capability.value}")
            seen.add(pair)
            if link.capability not in self.capabilities:
                raise ValueError(f"link references unknown capability {link.capability.value}")
            if link.eval_weight is not None and link.eval_weight == 0:
                raise ValueError(f"evaluation weight on {link.action.label}->{link.capability.value} must be nonzero")
            max_reward = max(max_reward, link.reward_possible, link.reward_impossible)
        if self.terminal_penalty <= max_reward:
            raise ValueError(
                f"terminal penalty {self.terminal_penalty} must strictly dominate "
                f"the largest link reward {max_reward}"
            )
        by_action: dict[Action, tuple[CapabilityLink, ...]] = {a: () for a in ACTIONS}
        for link in self.links:
            by_action[link.action] = by_action[link.action] + (link,)
        object.__setattr__(self, "_by_action", by_action)

    def links_for(self, action: Action) -> tuple[CapabilityLink, ...]:
        return self._by_action[action]  # type: ignore[attr-defined]

    def evaluated_capabilities(self) -> tuple[Capability, ...]:
        weighted = {link.capability for link in self.links if link.eval_weight is not None}
        return tuple(c for c in self.capabilities if c in weighted)

    def evaluation_links(self, capability: Capability) -> tuple[CapabilityLink, ...]:
        return tuple(
            link for link in self.links if link.capability is capability and link.eval_weight is not None
        )


def default_catalog(registration_required: bool = True, terminal_penalty: float = 100.0) -> CapabilityCatalog:
    """Catalog for the access-to-care scenario.

    Social engagement carries its payoff as the path to registration; when no
    rule demands registration for care, engaging confers no reward (it stays
    feasible and still counts toward the capability score).
    """
    engage_reward = 10.0 if registration_required else 0.0
    return CapabilityCatalog(
        capabilities=(
            Capability.LIFE,
            Capability.BODILY_HEALTH,
            Capability.BODILY_INTEGRITY,
            Capability.PRACTICAL_REASON,
            Capability.AFFILIATION,
        ),
        links=(
            CapabilityLink(Action.REQUEST_PHC, Capability.BODILY_HEALTH, 10.0, -5.0, Fraction(1)),
            CapabilityLink(
                Action.REQUEST_PHC, Capability.AFFILIATION, 0.0, 0.0, Fraction("0.2"),
                weight_when_restoring_only=True,
            ),
            CapabilityLink(Action.REQUEST_PHC, Capability.LIFE, 0.0, 0.0),
            CapabilityLink(Action.REQUEST_PHC, Capability.BODILY_INTEGRITY, 0.0, 0.0),
            CapabilityLink(
                Action.SKIP_PHC, Capability.PRACTICAL_REASON, -5.0, -5.0, polarity=Polarity.DEPRIVES
            ),
            CapabilityLink(Action.ENGAGE_SOCIAL, Capability.AFFILIATION, engage_reward, -5.0, Fraction("0.8")),
            CapabilityLink(
                Action.STAY_DISENGAGED, Capability.PRACTICAL_REASON, -5.0, -5.0, polarity=Polarity.DEPRIVES
            ),
        ),
        terminal_penalty=terminal_penalty,
    )


def with_eval_weights(
    catalog: CapabilityCatalog, weights: dict[Capability, dict[Action, Fraction]]
) -> CapabilityCatalog:
    """Return a copy of the catalog with evaluation weights replaced per (capability, action)."""
    for capability, per_action in weights.items():
        for action in per_action:
            if not any(l.action is action and l.capability is capability for l in catalog.links):
                raise ValueError(f"no link {action.label}->{capability.value} to weight")
    new_links = []
    for link in catalog.links:
        override = weights.get(link.capability, {}).get(link.action)
        if override is not None:
            link = replace(link, eval_weight=override)
        new_links.append(link)
    return replace(catalog, links=tuple(new_links))


@dataclass(frozen=True)
class FeasibilityPartition:
    """Split of the full action set into currently possible and impossible actions."""

    possible: frozenset[Action]
    impossible: frozenset[Action]

    def __post_init__(self) -> None:
        if self.possible | self.impossible != frozenset(ACTIONS) or self.possible & self.impossible:
            raise ValueError("possible/impossible must partition the full action set")
        if not ALWAYS_POSSIBLE <= self.possible:
            raise ValueError("skip_phc and stay_disengaged are always possible")


def make_partition(request_phc: bool, engage_social: bool) -> FeasibilityPartition:
    possible = set(ALWAYS_POSSIBLE)
    if request_phc:
        possible.add(Action.REQUEST_PHC)
    if engage_social:
        possible.add(Action.ENGAGE_SOCIAL)
    return FeasibilityPartition(
        possible=frozenset(possible),
        impossible=frozenset(ACTIONS) - frozenset(possible),
    )


@dataclass(frozen=True)
class SimState:
    """Everything the system knows at one timestep."""

    timestep: int
    agents: tuple[AgentProfile, ...]
    ledger: BudgetLedger
    scale: HealthScale
    phc_used: int = 0        # per-timestep capacity counters
    street_used: int = 0


@dataclass(frozen=True)
class TransitionRecord:
    agent_id: int
    action: Action
    feasible: bool
    health_before: int
    health_after: int
    registered_after: bool
    engagements_after: int
    position_after: tuple[int, int]
    billed: tuple[tuple[Facility, int], ...]
    terminal: TerminalKind


def initial_state(profiles: Sequence[AgentProfile], policy: PolicyRules, scale: HealthScale) -> SimState:
    agents = []
    for profile in profiles:
        terminal = starting_terminal(profile, scale)
        if terminal is not TerminalKind.NONE:
            profile = replace(profile, done=True, terminal=terminal)
        agents.append(profile)
    return SimState(
        timestep=0,
        agents=tuple(agents),
        ledger=BudgetLedger(initial_cents=policy.initial_budget_cents),
        scale=scale,
    )


def advance_timestep(state: SimState) -> SimState:
    return replace(state, timestep=state.timestep + 1, phc_used=0, street_used=0)


def feasible_actions(
    state: SimState, agent_index: int, world: WorldModel, policy: PolicyRules
) -> FeasibilityPartition:
    """Apply the registration gate, worker adjacency, and capacity limits."""
    if not 0 <= agent_index < len(state.agents):
        raise IndexError(f"agent index {agent_index} out of range")
    profile = state.agents[agent_index]
    if profile.done:
        raise ContractViolation(f"agent {profile.id} has already reached a terminal state")

    phc_open = (not policy.phc_requires_registration) or profile.registered
    if world.phc_capacity is not None and state.phc_used >= world.phc_capacity:
        phc_open = False
    if policy.budget_gates_phc and state.ledger.remaining_cents < policy.cost_phc_cents:
        phc_open = False

    engage_open = world.social_worker_nearby(profile.position)
    if world.street_team_capacity is not None and state.street_used >= world.street_team_capacity:
        engage_open = False

    return make_partition(request_phc=phc_open, engage_social=engage_open)


def _shift_health(profile: AgentProfile, steps: int, scale: HealthScale) -> AgentProfile:
    level = scale.clamp(profile.health_level + steps)
    return replace(profile, health_level=level, peak_health_level=max(profile.peak_health_level, level))


def apply_action(
    state: SimState,
    agent_index: int,
    action: Action,
    partition: FeasibilityPartition,
    world: WorldModel,
    policy: PolicyRules,
) -> tuple[SimState, TransitionRecord]:
    """Transition core, reusing an already-computed feasibility partition."""
    profile = state.agents[agent_index]
    if profile.done:
        raise ContractViolation(f"agent {profile.id} has already reached a terminal state")
    scale = state.scale
    feasible = action in partition.possible
    ledger = state.ledger
    phc_used, street_used = state.phc_used, state.street_used
    billed: list[tuple[Facility, int]] = []

    if action is Action.REQUEST_PHC:
        if feasible:
            profile = _shift_health(profile, +1, scale)
            profile = replace(profile, position=world.facilities[Facility.PHC])
            ledger = bill(ledger, state.timestep, profile.id, Facility.PHC, policy)
            billed.append((Facility.PHC, policy.cost_phc_cents))
            phc_used += 1
        else:
            profile = _shift_health(profile, -1, scale)
    elif action is Action.ENGAGE_SOCIAL:
        if feasible:
            street_used += 1
            engagements = min(profile.engagements + 1, policy.engagement_threshold)
            profile = replace(profile, engagements=engagements)
            if not profile.registered and engagements >= policy.engagement_threshold:
                profile = replace(
                    profile, registered=True, position=world.facilities[Facility.SOCIAL_SERVICES]
                )
            cost_steps = round(policy.engagement_health_cost / scale.delta)
            if cost_steps:
                profile = _shift_health(profile, -cost_steps, scale)
        else:
            profile = _shift_health(profile, -1, scale)
    else:  # SKIP_PHC and STAY_DISENGAGED: neglect erodes health
        profile = _shift_health(profile, -1, scale)

    if profile.health_level <= 0:
        profile = replace(
            profile, position=world.facilities[Facility.ICU], done=True, terminal=TerminalKind.DEPRIVED
        )
        ledger = bill(ledger, state.timestep, profile.id, Facility.ICU, policy)
        billed.append((Facility.ICU, policy.cost_icu_cents))
    elif profile.health_level >= scale.max_level:
        profile = replace(profile, done=True, terminal=TerminalKind.HEALTHY)

    agents = list(state.agents)
    agents[agent_index] = profile
    next_state = replace(
        state, agents=tuple(agents), ledger=ledger, phc_used=phc_used, street_used=street_used
    )
    record = TransitionRecord(
        agent_id=profile.id,
        action=action,
        feasible=feasible,
        health_before=state.agents[agent_index].health_level,
        health_after=profile.health_level,
        registered_after=profile.registered,
        engagements_after=profile.engagements,
        position_after=profile.position,
        billed=tuple(billed),
        terminal=profile.terminal,
    )
    return next_state, record


def transition(
    state: SimState, agent_index: int, action: Action, world: WorldModel, policy: PolicyRules
) -> tuple[SimState, TransitionRecord]:
    partition = feasible_actions(state, agent_index, world, policy)
    return apply_action(state, agent_index, action, partition, world, policy)


def _progress_advanced(capability: Capability, before: AgentProfile, after: AgentProfile) -> bool:
    """Whether the transition pushed the capability's progress measure forward.

    Restoration only pays while it gains new ground: regaining health the agent
    already had (and then forfeited) or engaging once registered earns nothing.
    """
    if capability is Capability.BODILY_HEALTH:
        return after.peak_health_level > before.peak_health_level
    if capability is Capability.AFFILIATION:
        return not before.registered and (after.engagements > before.engagements or after.registered)
    return True


def reward(
    state: SimState,
    agent_index: int,
    action: Action,
    next_state: SimState,
    feasibility: FeasibilityPartition,
    catalog: CapabilityCatalog,
) -> float:
    """Capability-sum reward; a transition into deprivation overrides everything."""
    before = state.agents[agent_index]
    after = next_state.agents[agent_index]
    if after.terminal is TerminalKind.DEPRIVED:
        return -catalog.terminal_penalty
    feasible = action in feasibility.possible
    total = 0.0
    for link in catalog.links_for(action):
        if not feasible:
            total += link.reward_impossible
        elif link.polarity is Polarity.DEPRIVES or _progress_advanced(link.capability, before, after):
            total += link.reward_possible
    return total


def is_terminal(state: SimState, agent_index: int) -> TerminalKind:
    if not 0 <= agent_index < len(state.agents):
        raise IndexError(f"agent index {agent_index} out of range")
    profile = state.agents[agent_index]
    if profile.health_level <= 0:
        return TerminalKind.DEPRIVED
    if profile.health_level >= state.scale.max_level:
        return TerminalKind.HEALTHY
    return TerminalKind.NONE
