"""Scenario configuration: strict parsing, defaults, serialization, assembly.

The canonical format is JSON. Unknown keys are rejected with their full path;
every value is range-checked. An empty config resolves to the default
two-agent access-to-care scenario.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Any, Optional

from .agents import HealthScale, PopulationGroup, PopulationSpec, init_population
from .errors import ConfigError
from .learning import FULL_COORDINATES, POSITION_CLASS, Hyperparameters, Scenario
from .mdp import ACTION_BY_LABEL, Capability, default_catalog, with_eval_weights
from .world import Cell, Facility, PolicyRules, WorldModel, build_world, default_facilities, euros_to_cents


@dataclass(frozen=True)
class WorldSection:
    width: int = 6
    height: int = 6
    facilities: Optional[dict[str, Cell]] = None  # None = default edge layout
    social_workers: Optional[tuple[Cell, ...]] = None  # None = auto, one per start cell
    phc_capacity: Optional[int] = None
    street_team_capacity: Optional[int] = None

    def __eq__(self, other):  # dict field needs explicit eq for round-trip checks
        return isinstance(other, WorldSection) and asdict(self) == asdict(other)


@dataclass(frozen=True)
class PolicySection:
    phc_requires_registration: bool = True
    engagement_threshold: int = 2
    cost_phc: float = 30.0
    cost_icu: float = 1000.0
    initial_budget: float = 5000.0
    engagement_health_cost: float = 0.0
    budget_gates_phc: bool = False


@dataclass(frozen=True)
class AgentGroup:
    count: int = 1
    health: float = 0.5
    registered: bool = False
    start: Optional[Cell] = None


@dataclass(frozen=True)
class PopulationSection:
    health_levels: int = 4
    health_delta: float = 0.5
    agents: tuple[AgentGroup, ...] = (
        AgentGroup(count=1, health=0.5, registered=True),
        AgentGroup(count=1, health=0.5, registered=False),
    )


@dataclass(frozen=True)
class LearningSection:
    gamma: float = 0.99
    learning_rate: float = 0.2
    epsilon_init: float = 0.1
    epsilon_decay: float = 0.995
    epsilon_floor: float = 0.01
    episodes: int = 300
    max_steps: int = 50
    seed: int = 0
    mask_infeasible: bool = False
    state_key: str = POSITION_CLASS


@dataclass(frozen=True)
class EvaluationSection:
    capability_weights: Optional[dict[str, dict[str, float]]] = None  # None = defaults
    low_capability_threshold: float = 0.5
    low_functioning_threshold: float = 1.0
    state_dependent_weights: bool = False

    def __eq__(self, other):
        return isinstance(other, EvaluationSection) and asdict(self) == asdict(other)


@dataclass(frozen=True)
class OutputSection:
    directory: Optional[str] = None
    formats: tuple[str, ...] = ("csv", "json")
    plots: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    world: WorldSection = field(default_factory=WorldSection)
    policy: PolicySection = field(default_factory=PolicySection)
    population: PopulationSection = field(default_factory=PopulationSection)
    learning: LearningSection = field(default_factory=LearningSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    output: OutputSection = field(default_factory=OutputSection)


# ---------------------------------------------------------------------------
# parsing helpers

def _check_unknown(raw: dict, path: str, known: set[str]) -> None:
    for key in raw:
        if key not in known:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown key")


def _get(raw: dict, key: str, default: Any) -> Any:
    return raw.get(key, default)


def _as_bool(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(path, f"expected true/false, got {value!r}")
    return value


def _as_int(value: Any, path: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value}")
    return value


def _as_number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def _as_cell(value: Any, path: str) -> Cell:
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        raise ConfigError(path, f"expected [x, y], got {value!r}")
    return (_as_int(value[0], f"{path}[0]"), _as_int(value[1], f"{path}[1]"))


def _as_range(value: Any, path: str, low: float, high: float, *, open_high: bool = False) -> float:
    number = _as_number(value, path)
    if number < low or number > high or (open_high and number == high):
        bound = f"[{low}, {high})" if open_high else f"[{low}, {high}]"
        raise ConfigError(path, f"must be in {bound}, got {number}")
    return number


def _parse_world(raw: Any) -> WorldSection:
    if not isinstance(raw, dict):
        raise ConfigError("world", "expected an object")
    _check_unknown(raw, "world", {
        "width", "height", "facilities", "social_workers", "phc_capacity", "street_team_capacity",
    })
    facilities = None
    if raw.get("facilities") is not None:
        if not isinstance(raw["facilities"], dict):
            raise ConfigError("world.facilities", "expected an object")
        known = {f.value for f in Facility}
        _check_unknown(raw["facilities"], "world.facilities", known)
        facilities = {
            name: _as_cell(cell, f"world.facilities.{name}") for name, cell in raw["facilities"].items()
        }
    workers = None
    if raw.get("social_workers") is not None:
        if not isinstance(raw["social_workers"], list):
            raise ConfigError("world.social_workers", "expected a list of cells")
        workers = tuple(
            _as_cell(w, f"world.social_workers[{i}]") for i, w in enumerate(raw["social_workers"])
        )
    capacity = {}
    for key in ("phc_capacity", "street_team_capacity"):
        value = raw.get(key)
        capacity[key] = None if value is None else _as_int(value, f"world.{key}", minimum=1)
    return WorldSection(
        width=_as_int(_get(raw, "width", 6), "world.width", minimum=2),
        height=_as_int(_get(raw, "height", 6), "world.height", minimum=2),
        facilities=facilities,
        social_workers=workers,
        **capacity,
    )


def _parse_policy(raw: Any) -> PolicySection:
    if not isinstance(raw, dict):
        raise ConfigError("policy", "expected an object")
    _check_unknown(raw, "policy", {
        "phc_requires_registration", "engagement_threshold", "cost_phc", "cost_icu",
        "initial_budget", "engagement_health_cost", "budget_gates_phc",
    })
    return PolicySection(
        phc_requires_registration=_as_bool(
            _get(raw, "phc_requires_registration", True), "policy.phc_requires_registration"
        ),
        engagement_threshold=_as_int(
            _get(raw, "engagement_threshold", 2), "policy.engagement_threshold", minimum=1
        ),
        cost_phc=_as_number(_get(raw, "cost_phc", 30.0), "policy.cost_phc"),
        cost_icu=_as_number(_get(raw, "cost_icu", 1000.0), "policy.cost_icu"),
        initial_budget=_as_number(_get(raw, "initial_budget", 5000.0), "policy.initial_budget"),
        engagement_health_cost=_as_number(
            _get(raw, "engagement_health_cost", 0.0), "policy.engagement_health_cost"
        ),
        budget_gates_phc=_as_bool(_get(raw, "budget_gates_phc", False), "policy.budget_gates_phc"),
    )


def _parse_population(raw: Any) -> PopulationSection:
    if not isinstance(raw, dict):
        raise ConfigError("population", "expected an object")
    _check_unknown(raw, "population", {"health_levels", "health_delta", "agents"})
    defaults = PopulationSection()
    groups = defaults.agents
    if "agents" in raw:
        if not isinstance(raw["agents"], list) or not raw["agents"]:
            raise ConfigError("population.agents", "expected a non-empty list")
        parsed = []
        for i, entry in enumerate(raw["agents"]):
            path = f"population.agents[{i}]"
            if not isinstance(entry, dict):
                raise ConfigError(path, "expected an object")
            _check_unknown(entry, path, {"count", "health", "registered", "start"})
            start = entry.get("start")
            if start is not None and start != "auto":
                start = _as_cell(start, f"{path}.start")
            else:
                start = None
            parsed.append(
                AgentGroup(
                    count=_as_int(_get(entry, "count", 1), f"{path}.count", minimum=1),
                    health=_as_number(_get(entry, "health", 0.5), f"{path}.health"),
                    registered=_as_bool(_get(entry, "registered", False), f"{path}.registered"),
                    start=start,
                )
            )
        groups = tuple(parsed)
    return PopulationSection(
        health_levels=_as_int(_get(raw, "health_levels", 4), "population.health_levels", minimum=2),
        health_delta=_as_number(_get(raw, "health_delta", 0.5), "population.health_delta"),
        agents=groups,
    )


def _parse_learning(raw: Any) -> LearningSection:
    if not isinstance(raw, dict):
        raise ConfigError("learning", "expected an object")
    _check_unknown(raw, "learning", {
        "gamma", "learning_rate", "epsilon_init", "epsilon_decay", "epsilon_floor",
        "episodes", "max_steps", "seed", "mask_infeasible", "state_key",
    })
    state_key = _get(raw, "state_key", POSITION_CLASS)
    if state_key not in (POSITION_CLASS, FULL_COORDINATES):
        raise ConfigError("learning.state_key", f"expected one of {POSITION_CLASS!r}, {FULL_COORDINATES!r}")
    return LearningSection(
        gamma=_as_range(_get(raw, "gamma", 0.99), "learning.gamma", 0.0, 1.0, open_high=True),
        learning_rate=_as_range(_get(raw, "learning_rate", 0.2), "learning.learning_rate", 1e-12, 1.0),
        epsilon_init=_as_range(_get(raw, "epsilon_init", 0.1), "learning.epsilon_init", 0.0, 1.0),
        epsilon_decay=_as_range(_get(raw, "epsilon_decay", 0.995), "learning.epsilon_decay", 1e-12, 1.0),
        epsilon_floor=_as_range(_get(raw, "epsilon_floor", 0.01), "learning.epsilon_floor", 0.0, 1.0),
        episodes=_as_int(_get(raw, "episodes", 300), "learning.episodes", minimum=0),
        max_steps=_as_int(_get(raw, "max_steps", 50), "learning.max_steps", minimum=1),
        seed=_as_int(_get(raw, "seed", 0), "learning.seed", minimum=0),
        mask_infeasible=_as_bool(_get(raw, "mask_infeasible", False), "learning.mask_infeasible"),
        state_key=state_key,
    )


def _parse_evaluation(raw: Any) -> EvaluationSection:
    if not isinstance(raw, dict):
        raise ConfigError("evaluation", "expected an object")
    _check_unknown(raw, "evaluation", {
        "capability_weights", "low_capability_threshold", "low_functioning_threshold",
        "state_dependent_weights",
    })
    weights = None
    if raw.get("capability_weights") is not None:
        if not isinstance(raw["capability_weights"], dict):
            raise ConfigError("evaluation.capability_weights", "expected an object")
        weights = {}
        capability_names = {c.value for c in Capability}
        for cap_name, per_action in raw["capability_weights"].items():
            cap_path = f"evaluation.capability_weights.{cap_name}"
            if cap_name not in capability_names:
                raise ConfigError(cap_path, "unknown capability")
            if not isinstance(per_action, dict):
                raise ConfigError(cap_path, "expected an object mapping actions to weights")
            weights[cap_name] = {}
            for action_name, weight in per_action.items():
                action_path = f"{cap_path}.{action_name}"
                if action_name not in ACTION_BY_LABEL:
                    raise ConfigError(action_path, "unknown action")
                value = _as_number(weight, action_path)
                if value == 0:
                    raise ConfigError(action_path, "evaluation weights must be nonzero")
                weights[cap_name][action_name] = value
    return EvaluationSection(
        capability_weights=weights,
        low_capability_threshold=_as_number(
            _get(raw, "low_capability_threshold", 0.5), "evaluation.low_capability_threshold"
        ),
        low_functioning_threshold=_as_number(
            _get(raw, "low_functioning_threshold", 1.0), "evaluation.low_functioning_threshold"
        ),
        state_dependent_weights=_as_bool(
            _get(raw, "state_dependent_weights", False), "evaluation.state_dependent_weights"
        ),
    )


def _parse_output(raw: Any) -> OutputSection:
    if not isinstance(raw, dict):
        raise ConfigError("output", "expected an object")
    _check_unknown(raw, "output", {"directory", "formats", "plots"})
    directory = raw.get("directory")
    if directory is not None and not isinstance(directory, str):
        raise ConfigError("output.directory", f"expected a string, got {directory!r}")
    formats = _get(raw, "formats", ["csv", "json"])
    if not isinstance(formats, list) or not formats:
        raise ConfigError("output.formats", "expected a non-empty list")
    for i, fmt in enumerate(formats):
        if fmt not in ("csv", "json"):
            raise ConfigError(f"output.formats[{i}]", f"unknown format {fmt!r}")
    return OutputSection(
        directory=directory,
        formats=tuple(formats),
        plots=_as_bool(_get(raw, "plots", True), "output.plots"),
    )


def parse_config_dict(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("", "top-level config must be an object")
    _check_unknown(raw, "", {"world", "policy", "population", "learning", "evaluation", "output"})
    config = ScenarioConfig(
        world=_parse_world(raw.get("world", {})),
        policy=_parse_policy(raw.get("policy", {})),
        population=_parse_population(raw.get("population", {})),
        learning=_parse_learning(raw.get("learning", {})),
        evaluation=_parse_evaluation(raw.get("evaluation", {})),
        output=_parse_output(raw.get("output", {})),
    )
    build_scenario(config)  # surface semantic problems (placement, scales) at parse time
    return config


def parse_config(text: str) -> ScenarioConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config_dict(raw)


def default_config() -> ScenarioConfig:
    return ScenarioConfig()


# ---------------------------------------------------------------------------
# serialization

def config_to_dict(config: ScenarioConfig) -> dict:
    world = {
        "width": config.world.width,
        "height": config.world.height,
        "facilities": None if config.world.facilities is None else {
            name: list(cell) for name, cell in config.world.facilities.items()
        },
        "social_workers": None if config.world.social_workers is None else [
            list(w) for w in config.world.social_workers
        ],
        "phc_capacity": config.world.phc_capacity,
        "street_team_capacity": config.world.street_team_capacity,
    }
    policy = asdict(config.policy)
    population = {
        "health_levels": config.population.health_levels,
        "health_delta": config.population.health_delta,
        "agents": [
            {
                "count": g.count,
                "health": g.health,
                "registered": g.registered,
                "start": None if g.start is None else list(g.start),
            }
            for g in config.population.agents
        ],
    }
    learning = asdict(config.learning)
    evaluation = asdict(config.evaluation)
    output = {
        "directory": config.output.directory,
        "formats": list(config.output.formats),
        "plots": config.output.plots,
    }
    return {
        "world": world, "policy": policy, "population": population,
        "learning": learning, "evaluation": evaluation, "output": output,
    }


def serialize_config(config: ScenarioConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2, sort_keys=True)


def config_hash(config: ScenarioConfig) -> str:
    canonical = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# assembly

def _auto_workers(world: WorldModel, starts: list[Cell]) -> tuple[Cell, ...]:
    """Place one outreach worker next to each start cell, off facility cells."""
    facility_cells = set(world.facilities.values())
    workers: list[Cell] = []
    for x, y in starts:
        candidates = [(x, y + 1), (x, y - 1), (x + 1, y), (x - 1, y)]
        placed = next(
            (c for c in candidates if world.in_bounds(c) and c not in facility_cells),
            None,
        )
        if placed is None:
            raise ConfigError("world.social_workers", f"no free cell next to start {(x, y)}")
        if placed not in workers:
            workers.append(placed)
    return tuple(workers)


def build_scenario(config: ScenarioConfig) -> Scenario:
    """Resolve the config into validated runtime components."""
    scale = HealthScale(levels=config.population.health_levels, delta=config.population.health_delta)

    if config.world.facilities is None:
        facilities = default_facilities(config.world.width, config.world.height)
    else:
        facilities = {Facility(name): cell for name, cell in config.world.facilities.items()}

    world = build_world(
        width=config.world.width,
        height=config.world.height,
        facilities=facilities,
        social_workers=config.world.social_workers or (),
        phc_capacity=config.world.phc_capacity,
        street_team_capacity=config.world.street_team_capacity,
    )

    policy = PolicyRules(
        phc_requires_registration=config.policy.phc_requires_registration,
        engagement_threshold=config.policy.engagement_threshold,
        cost_phc_cents=euros_to_cents(config.policy.cost_phc, "policy.cost_phc"),
        cost_icu_cents=euros_to_cents(config.policy.cost_icu, "policy.cost_icu"),
        initial_budget_cents=euros_to_cents(config.policy.initial_budget, "policy.initial_budget"),
        engagement_health_cost=config.policy.engagement_health_cost,
        budget_gates_phc=config.policy.budget_gates_phc,
    )
    steps = policy.engagement_health_cost / scale.delta
    if abs(steps - round(steps)) > 1e-9:
        raise ConfigError(
            "policy.engagement_health_cost",
            f"{policy.engagement_health_cost} is not a multiple of the health step {scale.delta}",
        )

    population = PopulationSpec(
        groups=tuple(
            PopulationGroup(count=g.count, health=g.health, registered=g.registered, start=g.start)
            for g in config.population.agents
        ),
        scale=scale,
    )

    if config.world.social_workers is None:
        profiles = init_population(population, world)
        world = replace(world, social_workers=_auto_workers(world, [p.position for p in profiles]))

    init_population(population, world)  # validates start cells against the final world

    catalog = default_catalog(registration_required=policy.phc_requires_registration)
    if config.evaluation.capability_weights is not None:
        overrides = {
            Capability(cap): {
                ACTION_BY_LABEL[action]: Fraction(str(weight)) for action, weight in per_action.items()
            }
            for cap, per_action in config.evaluation.capability_weights.items()
        }
        try:
            catalog = with_eval_weights(catalog, overrides)
        except ValueError as exc:
            raise ConfigError("evaluation.capability_weights", str(exc)) from None

    hyper = Hyperparameters(
        gamma=config.learning.gamma,
        learning_rate=config.learning.learning_rate,
        epsilon_init=config.learning.epsilon_init,
        epsilon_decay=config.learning.epsilon_decay,
        epsilon_floor=config.learning.epsilon_floor,
        episodes=config.learning.episodes,
        max_steps=config.learning.max_steps,
        seed=config.learning.seed,
        mask_infeasible=config.learning.mask_infeasible,
        state_key_mode=config.learning.state_key,
    )

    return Scenario(world=world, policy=policy, population=population, catalog=catalog, hyper=hyper)


def with_overrides(
    config: ScenarioConfig,
    seed: Optional[int] = None,
    episodes: Optional[int] = None,
    policy_on: Optional[bool] = None,
    out_dir: Optional[str] = None,
) -> ScenarioConfig:
    if seed is not None:
        config = replace(config, learning=replace(config.learning, seed=seed))
    if episodes is not None:
        config = replace(config, learning=replace(config.learning, episodes=episodes))
    if policy_on is not None:
        config = replace(config, policy=replace(config.policy, phc_requires_registration=policy_on))
    if out_dir is not None:
        config = replace(config, output=replace(config.output, directory=out_dir))
    return config
