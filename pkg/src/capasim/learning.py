"""Independent tabular Q-learning: one table, one RNG stream per agent.

Each agent learns from its own history only. Infeasible actions stay
selectable by default; their penalties are how agents learn the constraints.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .agents import AgentProfile, HealthScale, PopulationSpec, TerminalKind, init_population
from .errors import ConfigError
from .mdp import (
    ACTIONS,
    Action,
    CapabilityCatalog,
    FeasibilityPartition,
    TransitionRecord,
    advance_timestep,
    apply_action,
    feasible_actions,
    initial_state,
    reward,
)
from .world import BudgetLedger, PolicyRules, WorldModel

StateKey = tuple
POSITION_CLASS = "position_class"
FULL_COORDINATES = "full_coordinates"


@dataclass(frozen=True)
class Hyperparameters:
    gamma: float = 0.99
    learning_rate: float = 0.2
    epsilon_init: float = 0.1
    epsilon_decay: float = 0.995
    epsilon_floor: float = 0.01
    episodes: int = 300
    max_steps: int = 50
    seed: int = 0
    mask_infeasible: bool = False
    state_key_mode: str = POSITION_CLASS

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("learning.gamma", f"must be in [0, 1), got {self.gamma}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("learning.learning_rate", f"must be in (0, 1], got {self.learning_rate}")
        if not 0.0 < self.epsilon_floor <= self.epsilon_init <= 1.0:
            raise ConfigError(
                "learning.epsilon_floor",
                f"need 0 < floor <= initial <= 1, got floor={self.epsilon_floor} init={self.epsilon_init}",
            )
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ConfigError("learning.epsilon_decay", f"must be in (0, 1], got {self.epsilon_decay}")
        if self.episodes < 0:
            raise ConfigError("learning.episodes", f"must be >= 0, got {self.episodes}")
        if self.max_steps < 1:
            raise ConfigError("learning.max_steps", f"must be >= 1, got {self.max_steps}")
        if self.state_key_mode not in (POSITION_CLASS, FULL_COORDINATES):
            raise ConfigError("learning.state_key", f"unknown mode {self.state_key_mode!r}")


@dataclass(frozen=True)
class Scenario:
    """Everything a training run needs, fully resolved."""

    world: WorldModel
    policy: PolicyRules
    population: PopulationSpec
    catalog: CapabilityCatalog
    hyper: Hyperparameters


def state_key(profile: AgentProfile, world: WorldModel, mode: str = POSITION_CLASS) -> StateKey:
    """Local view of the agent's own state; other agents are deliberately excluded."""
    place = profile.position if mode == FULL_COORDINATES else world.position_class(profile.position)
    return (profile.health_level, profile.registered, profile.engagements, place)


class QTable:
    """Sparse action-value table; missing entries read as 0."""

    def __init__(self) -> None:
        self.values: dict[tuple[StateKey, Action], float] = {}

    def get(self, key: StateKey, action: Action) -> float:
        return self.values.get((key, action), 0.0)

    def set(self, key: StateKey, action: Action, value: float) -> None:
        self.values[(key, action)] = value

    def best_action(self, key: StateKey, candidates: Sequence[Action] = ACTIONS) -> Action:
        """Argmax with ties broken by fixed action order."""
        best = None
        best_value = -np.inf
        for action in sorted(candidates):
            value = self.get(key, action)
            if value > best_value:
                best, best_value = action, value
        assert best is not None
        return best

    def max_value(self, key: StateKey) -> float:
        return max(self.get(key, action) for action in ACTIONS)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, QTable) and self.values == other.values


def epsilon_schedule(episode: int, hyper: Hyperparameters) -> float:
    """Geometric decay clipped at the exploration floor."""
    if episode < 0:
        raise ValueError(f"episode must be >= 0, got {episode}")
    return max(hyper.epsilon_floor, hyper.epsilon_init * hyper.epsilon_decay**episode)


def select_action(
    qtable: QTable,
    key: StateKey,
    epsilon: float,
    rng: np.random.Generator,
    partition: Optional[FeasibilityPartition] = None,
    mask_infeasible: bool = False,
) -> Action:
    """Epsilon-greedy over the full action set (or the possible set when masking)."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    if mask_infeasible and partition is not None:
        candidates: Sequence[Action] = sorted(partition.possible)
    else:
        candidates = ACTIONS
    if epsilon > 0.0 and rng.random() < epsilon:
        return candidates[int(rng.integers(len(candidates)))]
    return qtable.best_action(key, candidates)


def q_update(
    qtable: QTable,
    key: StateKey,
    action: Action,
    r: float,
    next_key: StateKey,
    terminal: bool,
    hyper: Hyperparameters,
) -> QTable:
    """One-step backup: Q(s,a) += lr * (r + gamma * max_a' Q(s',a') * [not terminal] - Q(s,a))."""
    bootstrap = 0.0 if terminal else hyper.gamma * qtable.max_value(next_key)
    current = qtable.get(key, action)
    qtable.set(key, action, current + hyper.learning_rate * (r + bootstrap - current))
    return qtable


@dataclass(frozen=True)
class TraceStep:
    timestep: int
    agent_id: int
    key: StateKey
    partition: FeasibilityPartition
    action: Action
    reward: float
    next_key: StateKey
    terminal: TerminalKind
    record: TransitionRecord


@dataclass
class EpisodeTrace:
    steps: list[TraceStep] = field(default_factory=list)
    returns: dict[int, float] = field(default_factory=dict)
    length: int = 0
    ledger: Optional[BudgetLedger] = None
    truncated: bool = False
    final_agents: tuple[AgentProfile, ...] = ()

    def agent_steps(self, agent_id: int) -> list[TraceStep]:
        return [s for s in self.steps if s.agent_id == agent_id]


# A scripted controller replaces learning/exploration for one agent (used for
# greedy rollouts and frozen-behavior peers). It never touches an RNG stream.
Controller = Callable[[StateKey, FeasibilityPartition], Action]


def run_episode(
    world: WorldModel,
    policy: PolicyRules,
    profiles: Sequence[AgentProfile],
    scale: HealthScale,
    qtables: Mapping[int, QTable],
    catalog: CapabilityCatalog,
    hyper: Hyperparameters,
    rngs: Mapping[int, np.random.Generator],
    epsilon: float,
    learn: bool = True,
    scripted: Optional[Mapping[int, Controller]] = None,
) -> EpisodeTrace:
    """Play one episode; agents act in fixed id order within each timestep."""
    scripted = scripted or {}
    state = initial_state(profiles, policy, scale)
    trace = EpisodeTrace(returns={p.id: 0.0 for p in state.agents})
    for _ in range(hyper.max_steps):
        if all(p.done for p in state.agents):
            break
        for i, profile in enumerate(state.agents):
            if profile.done:
                continue
            partition = feasible_actions(state, i, world, policy)
            key = state_key(profile, world, hyper.state_key_mode)
            controller = scripted.get(profile.id)
            if controller is not None:
                action = controller(key, partition)
            else:
                action = select_action(
                    qtables[profile.id], key, epsilon, rngs[profile.id],
                    partition, hyper.mask_infeasible,
                )
            next_state, record = apply_action(state, i, action, partition, world, policy)
            step_reward = reward(state, i, action, next_state, partition, catalog)
            next_key = state_key(next_state.agents[i], world, hyper.state_key_mode)
            if learn and controller is None:
                q_update(
                    qtables[profile.id], key, action, step_reward, next_key,
                    terminal=record.terminal is not TerminalKind.NONE, hyper=hyper,
                )
            trace.steps.append(
                TraceStep(
                    timestep=state.timestep, agent_id=profile.id, key=key, partition=partition,
                    action=action, reward=step_reward, next_key=next_key,
                    terminal=record.terminal, record=record,
                )
            )
            trace.returns[profile.id] += step_reward
            state = next_state
        state = advance_timestep(state)
        trace.length += 1
    trace.truncated = not all(p.done for p in state.agents)
    trace.ledger = state.ledger
    trace.final_agents = state.agents
    return trace


def agent_rngs(profiles: Sequence[AgentProfile], seed: int) -> dict[int, np.random.Generator]:
    """One independent, reproducible stream per agent id."""
    children = np.random.SeedSequence(seed).spawn(len(profiles))
    return {p.id: np.random.default_rng(children[i]) for i, p in enumerate(profiles)}


@dataclass
class TrainResult:
    qtables: dict[int, QTable]
    curves: dict[int, list[float]]
    epsilons: list[float]
    profiles: list[AgentProfile]


def train(
    scenario: Scenario,
    scripted: Optional[Mapping[int, Controller]] = None,
) -> TrainResult:
    """Run the full training schedule; a pure function of the scenario (incl. seed)."""
    profiles = init_population(scenario.population, scenario.world)
    hyper = scenario.hyper
    qtables = {p.id: QTable() for p in profiles}
    rngs = agent_rngs(profiles, hyper.seed)
    curves: dict[int, list[float]] = {p.id: [] for p in profiles}
    epsilons: list[float] = []
    for episode in range(hyper.episodes):
        epsilon = epsilon_schedule(episode, hyper)
        trace = run_episode(
            scenario.world, scenario.policy, profiles, scenario.population.scale,
            qtables, scenario.catalog, hyper, rngs, epsilon, learn=True, scripted=scripted,
        )
        for p in profiles:
            curves[p.id].append(trace.returns[p.id])
        epsilons.append(epsilon)
    return TrainResult(qtables=qtables, curves=curves, epsilons=epsilons, profiles=profiles)


def greedy_controller(qtable: QTable) -> Controller:
    return lambda key, partition: qtable.best_action(key)


def policy_controller(policy_map: Mapping[StateKey, Action]) -> Controller:
    def control(key: StateKey, partition: FeasibilityPartition) -> Action:
        if key not in policy_map:
            raise KeyError(f"no action for state {key}")
        return policy_map[key]
    return control


def greedy_rollout(
    scenario: Scenario,
    controllers: Mapping[int, Controller],
    profiles: Optional[Sequence[AgentProfile]] = None,
) -> EpisodeTrace:
    """Deterministic rollout (no exploration, no learning) for the given controllers."""
    if profiles is None:
        profiles = init_population(scenario.population, scenario.world)
    missing = [p.id for p in profiles if p.id not in controllers]
    if missing:
        raise ValueError(f"no controller for agents {missing}")
    return run_episode(
        scenario.world, scenario.policy, profiles, scenario.population.scale,
        qtables={}, catalog=scenario.catalog, hyper=scenario.hyper,
        rngs={}, epsilon=0.0, learn=False, scripted=controllers,
    )
