"""Exact single-agent solver used to verify learned policies.

Enumerates the states one agent can actually reach (positions only change via
facility relocations, so the reachable set is tiny), runs synchronous value
iteration to convergence, and exposes the optimal policy keyed the same way as
the Q-tables so the two can be compared state by state.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from .agents import AgentProfile, HealthScale, TerminalKind
from .errors import OracleUnavailableError
from .learning import (
    POSITION_CLASS,
    Controller,
    EpisodeTrace,
    Hyperparameters,
    StateKey,
    policy_controller,
    run_episode,
    state_key,
)
from .mdp import ACTIONS, Action, CapabilityCatalog, apply_action, feasible_actions, initial_state, reward
from .world import Facility, PolicyRules, WorldModel

ORACLE_STATE_LIMIT = 10_000

# Concrete single-agent node: everything the dynamics read from the profile.
Node = tuple[tuple[int, int], int, int, bool, int]  # (position, health, peak, registered, engagements)


def _node_of(profile: AgentProfile) -> Node:
    return (
        profile.position,
        profile.health_level,
        profile.peak_health_level,
        profile.registered,
        profile.engagements,
    )


def _profile_at(node: Node, agent_id: int) -> AgentProfile:
    position, health, peak, registered, engagements = node
    return AgentProfile(
        id=agent_id,
        health_level=health,
        registered=registered,
        engagements=engagements,
        position=position,
        peak_health_level=peak,
    )


@dataclass
class OracleResult:
    values: dict[StateKey, float]
    policy: dict[StateKey, Action]
    sweeps: int
    states_explored: int


def keyspace_size(
    world: WorldModel, policy: PolicyRules, scale: HealthScale, state_key_mode: str
) -> int:
    if state_key_mode == POSITION_CLASS:
        places = len(Facility) + 1  # each facility plus "street"
    else:
        places = world.width * world.height
    return scale.levels * 2 * (policy.engagement_threshold + 1) * places


def value_iteration_oracle(
    world: WorldModel,
    policy: PolicyRules,
    start: AgentProfile,
    scale: HealthScale,
    catalog: CapabilityCatalog,
    gamma: float,
    state_key_mode: str = POSITION_CLASS,
    tolerance: float = 1e-10,
    max_states: int = ORACLE_STATE_LIMIT,
) -> OracleResult:
    """Bellman-optimal values and greedy policy for one agent's MDP."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    size = keyspace_size(world, policy, scale, state_key_mode)
    if size > max_states:
        raise OracleUnavailableError(
            f"state space of {size} keys exceeds the exact-solver limit of {max_states}"
        )
    if policy.budget_gates_phc:
        raise OracleUnavailableError(
            "budget-gated feasibility makes values depend on the ledger, which the state key omits"
        )

    start = replace(start, done=False, terminal=TerminalKind.NONE)
    root = _node_of(start)

    def is_terminal_node(node: Node) -> bool:
        return node[1] <= 0 or node[1] >= scale.max_level

    # Expand every (node, action) edge reachable from the start.
    edges: dict[Node, dict[Action, tuple[float, Node, bool]]] = {}
    frontier = [root]
    seen = {root}
    while frontier:
        node = frontier.pop()
        if is_terminal_node(node):
            continue
        state = initial_state([_profile_at(node, start.id)], policy, scale)
        partition = feasible_actions(state, 0, world, policy)
        per_action: dict[Action, tuple[float, Node, bool]] = {}
        for action in ACTIONS:
            next_state, record = apply_action(state, 0, action, partition, world, policy)
            r = reward(state, 0, action, next_state, partition, catalog)
            next_node = _node_of(next_state.agents[0])
            terminal = record.terminal is not TerminalKind.NONE
            per_action[action] = (r, next_node, terminal)
            if next_node not in seen:
                seen.add(next_node)
                frontier.append(next_node)
        edges[node] = per_action

    # Synchronous sweeps to the fixed point.
    values: dict[Node, float] = {node: 0.0 for node in seen}
    sweeps = 0
    while True:
        sweeps += 1
        delta = 0.0
        updated = {}
        for node in seen:
            if node not in edges:
                updated[node] = 0.0
                continue
            best = max(
                r + (0.0 if terminal else gamma * values[nxt])
                for r, nxt, terminal in edges[node].values()
            )
            updated[node] = best
            delta = max(delta, abs(best - values[node]))
        values = updated
        if delta < tolerance:
            break

    # Greedy extraction with the same tie-break order as action selection.
    node_policy: dict[Node, Action] = {}
    for node, per_action in edges.items():
        best_action, best_value = None, None
        for action in ACTIONS:
            r, nxt, terminal = per_action[action]
            q = r + (0.0 if terminal else gamma * values[nxt])
            if best_value is None or q > best_value:
                best_action, best_value = action, q
        node_policy[node] = best_action

    # Project onto the learner's state keys; refuse silently aliased policies.
    key_policy: dict[StateKey, Action] = {}
    key_values: dict[StateKey, float] = {}
    for node, action in node_policy.items():
        key = state_key(_profile_at(node, start.id), world, state_key_mode)
        if key in key_policy and key_policy[key] is not action:
            raise OracleUnavailableError(
                f"state key {key} aliases states with different optimal actions; "
                "use full-coordinate keys or a finer key"
            )
        key_policy[key] = action
        key_values[key] = values[node]
    return OracleResult(
        values=key_values, policy=key_policy, sweeps=sweeps, states_explored=len(seen)
    )


def oracle_controller(result: OracleResult) -> Controller:
    return policy_controller(result.policy)


def oracle_rollout(
    world: WorldModel,
    policy: PolicyRules,
    start: AgentProfile,
    scale: HealthScale,
    catalog: CapabilityCatalog,
    hyper: Hyperparameters,
    result: OracleResult,
) -> EpisodeTrace:
    """Deterministic playout of the oracle policy from the agent's start state."""
    return run_episode(
        world, policy, [start], scale, qtables={}, catalog=catalog, hyper=hyper,
        rngs={}, epsilon=0.0, learn=False, scripted={start.id: oracle_controller(result)},
    )
