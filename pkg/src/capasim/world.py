"""Physical environment (grid, facilities, outreach workers) and regulatory rules.

Money is carried as integer euro-cents everywhere so that the budget ledger
stays bit-exact under any sequence of bills.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Iterable, Mapping, Optional

from .errors import ConfigError

Cell = tuple[int, int]


class Facility(str, Enum):
    PHC = "phc"
    SOCIAL_SERVICES = "social_services"
    ICU = "icu"


def euros_to_cents(amount: float | int | str, path: str = "amount") -> int:
    """Convert a euro amount to integer cents, rejecting sub-cent values."""
    try:
        value = Decimal(str(amount))
    except InvalidOperation:
        raise ConfigError(path, f"not a valid currency amount: {amount!r}") from None
    cents = value * 100
    if cents != cents.to_integral_value():
        raise ConfigError(path, f"sub-cent currency amount: {amount!r}")
    return int(cents)


def cents_to_euros(cents: int) -> float:
    return cents / 100.0


@dataclass(frozen=True)
class WorldModel:
    """Discrete grid with facility cells on the boundary and static outreach workers."""

    width: int
    height: int
    facilities: Mapping[Facility, Cell]
    social_workers: tuple[Cell, ...] = ()
    phc_capacity: Optional[int] = None  # None = unlimited, per timestep
    street_team_capacity: Optional[int] = None

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def is_edge(self, cell: Cell) -> bool:
        x, y = cell
        return x in (0, self.width - 1) or y in (0, self.height - 1)

    def is_adjacent(self, a: Cell, b: Cell) -> bool:
        """Chebyshev distance <= 1; a cell is adjacent to itself."""
        for cell in (a, b):
            if not self.in_bounds(cell):
                raise ValueError(f"cell {cell} out of bounds for {self.width}x{self.height} grid")
        return max(abs(a[0] - b[0]), abs(a[1] - b[1])) <= 1

    def social_worker_nearby(self, agent_pos: Cell) -> bool:
        """True iff any outreach worker stands on or next to the given cell."""
        return any(self.is_adjacent(agent_pos, w) for w in self.social_workers)

    def position_class(self, cell: Cell) -> str:
        for facility, location in self.facilities.items():
            if location == cell:
                return facility.value
        return "street"


def build_world(
    width: int,
    height: int,
    facilities: Mapping[Facility, Cell],
    social_workers: Iterable[Cell] = (),
    phc_capacity: Optional[int] = None,
    street_team_capacity: Optional[int] = None,
) -> WorldModel:
    """Validate and construct a WorldModel.

    Facility cells must be distinct boundary cells; workers must be in bounds.
    """
    if width < 2 or height < 2:
        raise ConfigError("world.width", f"grid must be at least 2x2, got {width}x{height}")
    world = WorldModel(
        width=width,
        height=height,
        facilities=dict(facilities),
        social_workers=tuple(tuple(w) for w in social_workers),
        phc_capacity=phc_capacity,
        street_team_capacity=street_team_capacity,
    )
    for facility in Facility:
        if facility not in world.facilities:
            raise ConfigError(f"world.facilities.{facility.value}", "missing facility location")
    seen: dict[Cell, Facility] = {}
    for facility, cell in world.facilities.items():
        key = f"world.facilities.{facility.value}"
        if not world.in_bounds(cell):
            raise ConfigError(key, f"cell {cell} out of bounds")
        if not world.is_edge(cell):
            raise ConfigError(key, f"cell {cell} is an interior cell; facilities must sit on the grid edge")
        if cell in seen:
            raise ConfigError(key, f"cell {cell} already used by {seen[cell].value}")
        seen[cell] = facility
    for i, worker in enumerate(world.social_workers):
        if not world.in_bounds(worker):
            raise ConfigError(f"world.social_workers[{i}]", f"cell {worker} out of bounds")
    for name, capacity in (("phc_capacity", phc_capacity), ("street_team_capacity", street_team_capacity)):
        if capacity is not None and capacity < 1:
            raise ConfigError(f"world.{name}", f"capacity must be positive or null, got {capacity}")
    return world


def default_facilities(width: int, height: int) -> dict[Facility, Cell]:
    """Spread the three facilities over distinct edge midpoints."""
    return {
        Facility.PHC: (width - 1, height // 2 - 1),
        Facility.SOCIAL_SERVICES: (0, height - 2),
        Facility.ICU: (width // 2 - 1, height - 1),
    }


@dataclass(frozen=True)
class PolicyRules:
    """Regulatory environment: the access gate, engagement rule, prices and budget."""

    phc_requires_registration: bool = True
    engagement_threshold: int = 2
    cost_phc_cents: int = 3000
    cost_icu_cents: int = 100_000
    initial_budget_cents: int = 500_000
    engagement_health_cost: float = 0.0  # health units removed per successful engagement
    budget_gates_phc: bool = False

    def __post_init__(self) -> None:
        if self.cost_icu_cents <= self.cost_phc_cents:
            raise ConfigError("policy.cost_icu", "emergency care must cost more than a regular visit")
        if self.engagement_threshold < 1:
            raise ConfigError("policy.engagement_threshold", "must be >= 1")
        if self.engagement_health_cost < 0:
            raise ConfigError("policy.engagement_health_cost", "must be >= 0")


@dataclass(frozen=True)
class LedgerEntry:
    timestep: int
    agent_id: int
    service: Facility
    amount_cents: int


@dataclass(frozen=True)
class BudgetLedger:
    """Append-only record of billed services against the initial budget."""

    initial_cents: int
    entries: tuple[LedgerEntry, ...] = field(default_factory=tuple)

    @property
    def total_billed_cents(self) -> int:
        return sum(e.amount_cents for e in self.entries)

    @property
    def remaining_cents(self) -> int:
        return self.initial_cents - self.total_billed_cents

    @property
    def exhausted(self) -> bool:
        return self.remaining_cents < 0


def bill(
    ledger: BudgetLedger,
    timestep: int,
    agent_id: int,
    service: Facility,
    policy: PolicyRules,
) -> BudgetLedger:
    """Append a bill for the given service; never fails, even past the budget."""
    if service is Facility.PHC:
        amount = policy.cost_phc_cents
    elif service is Facility.ICU:
        amount = policy.cost_icu_cents
    else:
        raise ValueError(f"service {service} is not billable")
    if ledger.entries and timestep < ledger.entries[-1].timestep:
        raise ValueError("ledger entries must be timestep-monotone")
    entry = LedgerEntry(timestep=timestep, agent_id=agent_id, service=service, amount_cents=amount)
    return replace(ledger, entries=ledger.entries + (entry,))
