"""World model: grid geometry, facility placement rules, ledger arithmetic."""

import random

import pytest

from capasim.errors import ConfigError
from capasim.world import (
    BudgetLedger,
    Facility,
    PolicyRules,
    bill,
    build_world,
    cents_to_euros,
    default_facilities,
    euros_to_cents,
)


def make_world(**kwargs):
    defaults = dict(
        width=6,
        height=6,
        facilities=default_facilities(6, 6),
        social_workers=((1, 2), (2, 2)),
    )
    defaults.update(kwargs)
    return build_world(**defaults)


class TestAdjacency:
    def test_orthogonal_neighbor(self):
        assert make_world().is_adjacent((2, 2), (2, 3))

    def test_diagonal_neighbor(self):
        # Chebyshev metric: the full 8-neighborhood counts as adjacent.
        assert make_world().is_adjacent((2, 2), (3, 3))

    def test_same_cell(self):
        assert make_world().is_adjacent((2, 2), (2, 2))

    def test_distant_cells(self):
        assert not make_world().is_adjacent((0, 0), (5, 5))

    def test_exhaustive_neighborhood(self):
        # Independent enumeration: adjacency must equal the 3x3 block around a cell.
        world = make_world()
        center = (3, 3)
        block = {(3 + dx, 3 + dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)}
        for x in range(6):
            for y in range(6):
                assert world.is_adjacent(center, (x, y)) == ((x, y) in block)

    def test_symmetry_exhaustive(self):
        world = make_world()
        cells = [(x, y) for x in range(6) for y in range(6)]
        for a in cells:
            for b in cells:
                assert world.is_adjacent(a, b) == world.is_adjacent(b, a)

    def test_out_of_bounds_raises(self):
        with pytest.raises(ValueError):
            make_world().is_adjacent((0, 0), (6, 0))


class TestSocialWorkerNearby:
    def test_worker_on_same_cell(self):
        assert make_world(social_workers=((2, 2),)).social_worker_nearby((2, 2))

    def test_no_workers(self):
        assert not make_world(social_workers=()).social_worker_nearby((2, 2))

    def test_worker_three_cells_away(self):
        assert not make_world(social_workers=((5, 5),)).social_worker_nearby((2, 2))


class TestBuildWorld:
    def test_default_layout_on_edges(self):
        world = make_world()
        assert world.width == world.height == 6
        assert len(world.facilities) == 3
        for cell in world.facilities.values():
            assert world.is_edge(cell)

    def test_smallest_legal_world(self):
        # On a 2x2 grid every cell is an edge cell.
        world = build_world(
            width=2,
            height=2,
            facilities={Facility.PHC: (0, 0), Facility.SOCIAL_SERVICES: (0, 1), Facility.ICU: (1, 0)},
        )
        assert world.position_class((0, 0)) == "phc"

    def test_interior_facility_rejected(self):
        facilities = default_facilities(6, 6)
        facilities[Facility.PHC] = (3, 3)
        with pytest.raises(ConfigError) as excinfo:
            make_world(facilities=facilities)
        assert "world.facilities.phc" in str(excinfo.value)

    def test_out_of_bounds_facility_rejected(self):
        facilities = default_facilities(6, 6)
        facilities[Facility.ICU] = (7, 0)
        with pytest.raises(ConfigError) as excinfo:
            make_world(facilities=facilities)
        assert "icu" in str(excinfo.value)

    def test_duplicate_facility_cells_rejected(self):
        facilities = default_facilities(6, 6)
        facilities[Facility.ICU] = facilities[Facility.PHC]
        with pytest.raises(ConfigError):
            make_world(facilities=facilities)

    def test_missing_facility_rejected(self):
        facilities = default_facilities(6, 6)
        del facilities[Facility.ICU]
        with pytest.raises(ConfigError):
            make_world(facilities=facilities)

    def test_position_class(self):
        world = make_world()
        assert world.position_class(world.facilities[Facility.SOCIAL_SERVICES]) == "social_services"
        assert world.position_class((1, 1)) == "street"


class TestCurrency:
    def test_euro_conversion_exact(self):
        assert euros_to_cents(30) == 3000
        assert euros_to_cents(30.0) == 3000
        assert euros_to_cents("0.01") == 1
        assert cents_to_euros(488000) == 4880.0

    def test_sub_cent_rejected(self):
        with pytest.raises(ConfigError):
            euros_to_cents(0.001)


class TestLedger:
    def test_empty_ledger(self):
        ledger = BudgetLedger(initial_cents=500_000)
        assert ledger.total_billed_cents == 0
        assert ledger.remaining_cents == 500_000
        assert not ledger.exhausted

    def test_four_phc_bills(self):
        # 5000 - 4 * 30 = 4880 euros, exactly.
        policy = PolicyRules()
        ledger = BudgetLedger(initial_cents=500_000)
        for t in range(4):
            ledger = bill(ledger, t, 0, Facility.PHC, policy)
        assert ledger.remaining_cents == 488_000

    def test_one_icu_bill(self):
        policy = PolicyRules()
        ledger = bill(BudgetLedger(initial_cents=500_000), 0, 1, Facility.ICU, policy)
        assert ledger.remaining_cents == 400_000

    def test_exhaustion_flag_and_negative_balance(self):
        policy = PolicyRules()
        ledger = BudgetLedger(initial_cents=150_000)
        for t in range(2):
            ledger = bill(ledger, t, 0, Facility.ICU, policy)
        assert ledger.remaining_cents == -50_000
        assert ledger.exhausted

    def test_conservation_over_random_sequences(self):
        # remaining + sum(entries) == initial after any billing sequence.
        policy = PolicyRules()
        rng = random.Random(42)
        for _ in range(100):
            ledger = BudgetLedger(initial_cents=rng.randrange(0, 1_000_000))
            for t in range(rng.randrange(0, 100)):
                service = Facility.PHC if rng.random() < 0.8 else Facility.ICU
                ledger = bill(ledger, t, rng.randrange(3), service, policy)
            assert ledger.remaining_cents + ledger.total_billed_cents == ledger.initial_cents

    def test_entries_append_only_and_monotone(self):
        policy = PolicyRules()
        ledger = BudgetLedger(initial_cents=10_000)
        ledger = bill(ledger, 5, 0, Facility.PHC, policy)
        with pytest.raises(ValueError):
            bill(ledger, 4, 0, Facility.PHC, policy)


class TestPolicyRules:
    def test_icu_must_cost_more_than_phc(self):
        with pytest.raises(ConfigError):
            PolicyRules(cost_phc_cents=1000, cost_icu_cents=1000)

    def test_threshold_must_be_positive(self):
        with pytest.raises(ConfigError):
            PolicyRules(engagement_threshold=0)
