"""Agent profiles, the discrete health scale, and population initialization."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping, Optional, Sequence

from .errors import ConfigError
from .world import Cell, WorldModel


class TerminalKind(str, Enum):
    NONE = "none"
    DEPRIVED = "deprived"  # health hit zero; hospitalized
    HEALTHY = "healthy"    # health reached the top level


@dataclass(frozen=True)
class HealthScale:
    """Discrete health levels 0, delta, 2*delta, ... (levels-1)*delta."""

    levels: int = 4
    delta: float = 0.5

    def __post_init__(self) -> None:
        if self.levels < 2:
            raise ConfigError("population.health_levels", f"need at least 2 levels, got {self.levels}")
        if self.delta <= 0:
            raise ConfigError("population.health_delta", f"step must be positive, got {self.delta}")

    @property
    def max_level(self) -> int:
        return self.levels - 1

    def value(self, level: int) -> float:
        return level * self.delta

    def level_of(self, value: float, path: str = "health") -> int:
        """Map a health value back to its level index; must be an exact multiple of delta."""
        level = value / self.delta
        if abs(level - round(level)) > 1e-9:
            raise ConfigError(path, f"{value} is not a multiple of the health step {self.delta}")
        level = round(level)
        if not 0 <= level <= self.max_level:
            raise ConfigError(path, f"{value} outside the 0..{self.value(self.max_level)} health range")
        return level

    def clamp(self, level: int) -> int:
        return max(0, min(self.max_level, level))


@dataclass(frozen=True)
class AgentProfile:
    """One simulated person: conversion-factor state plus episode bookkeeping.

    `peak_health_level` tracks the best health attained in the current episode;
    care only counts as restorative while it pushes this peak upward.
    """

    id: int
    health_level: int
    registered: bool
    engagements: int
    position: Cell
    peak_health_level: int
    done: bool = False
    terminal: TerminalKind = TerminalKind.NONE
    attributes: Mapping[str, Any] = field(default_factory=dict)

    def health_value(self, scale: HealthScale) -> float:
        return scale.value(self.health_level)


def apply_health_delta(profile: AgentProfile, delta: float, scale: HealthScale) -> AgentProfile:
    """Shift health by a (signed) multiple of the scale step, clamped to [0, max]."""
    steps = delta / scale.delta
    if abs(steps - round(steps)) > 1e-9:
        raise ValueError(f"delta {delta} is not a multiple of the health step {scale.delta}")
    new_level = scale.clamp(profile.health_level + round(steps))
    return replace(
        profile,
        health_level=new_level,
        peak_health_level=max(profile.peak_health_level, new_level),
    )


@dataclass(frozen=True)
class PopulationGroup:
    count: int
    health: float
    registered: bool
    start: Optional[Cell] = None  # None = auto-placed


@dataclass(frozen=True)
class PopulationSpec:
    groups: tuple[PopulationGroup, ...]
    scale: HealthScale = HealthScale()

    @property
    def total(self) -> int:
        return sum(g.count for g in self.groups)


def _auto_start_cells(world: WorldModel, taken: set[Cell], needed: int) -> list[Cell]:
    """Row-major scan over interior cells, skipping cells already in use."""
    cells: list[Cell] = []
    for y in range(1, world.height - 1):
        for x in range(1, world.width - 1):
            cell = (x, y)
            if cell in taken:
                continue
            cells.append(cell)
            taken.add(cell)
            if len(cells) == needed:
                return cells
    raise ConfigError("population", f"not enough free interior cells for {needed} auto-placed agents")


def init_population(spec: PopulationSpec, world: WorldModel) -> list[AgentProfile]:
    """Expand the population spec into concrete profiles in deterministic id order."""
    if spec.total < 1:
        raise ConfigError("population.agents", "population must contain at least one agent")
    taken: set[Cell] = set(world.facilities.values())
    explicit = [g.start for g in spec.groups for _ in range(g.count) if g.start is not None]
    for cell in explicit:
        if not world.in_bounds(cell):
            raise ConfigError("population.agents.start", f"cell {cell} out of bounds")
        if cell in taken:
            raise ConfigError("population.agents.start", f"cell {cell} already occupied")
        taken.add(cell)

    profiles: list[AgentProfile] = []
    auto_needed = sum(g.count for g in spec.groups if g.start is None)
    auto_cells = iter(_auto_start_cells(world, taken, auto_needed)) if auto_needed else iter(())
    agent_id = 0
    for group_index, group in enumerate(spec.groups):
        if group.count < 1:
            raise ConfigError(f"population.agents[{group_index}].count", "must be >= 1")
        level = spec.scale.level_of(group.health, path=f"population.agents[{group_index}].health")
        for _ in range(group.count):
            start = group.start if group.start is not None else next(auto_cells)
            profiles.append(
                AgentProfile(
                    id=agent_id,
                    health_level=level,
                    registered=group.registered,
                    engagements=0,
                    position=start,
                    peak_health_level=level,
                )
            )
            agent_id += 1
    return profiles


def starting_terminal(profile: AgentProfile, scale: HealthScale) -> TerminalKind:
    """Terminal kind an agent would have at episode start (edge configs only)."""
    if profile.health_level <= 0:
        return TerminalKind.DEPRIVED
    if profile.health_level >= scale.max_level:
        return TerminalKind.HEALTHY
    return TerminalKind.NONE


def population_signature(profiles: Sequence[AgentProfile]) -> tuple:
    """Hashable snapshot used by determinism tests."""
    return tuple((p.id, p.health_level, p.registered, p.engagements, p.position) for p in profiles)
