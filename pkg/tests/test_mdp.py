"""MDP core: feasibility gating, action effects, reward table, terminal rules."""

from fractions import Fraction

import pytest

from capasim.agents import TerminalKind
from capasim.errors import ContractViolation
from capasim.mdp import (
    ACTIONS,
    Action,
    Capability,
    CapabilityCatalog,
    CapabilityLink,
    advance_timestep,
    apply_action,
    default_catalog,
    feasible_actions,
    is_terminal,
    make_partition,
    reward,
    transition,
)
from capasim.world import Facility
from conftest import make_profile, make_state

A1, A2, A3, A4 = Action.REQUEST_PHC, Action.SKIP_PHC, Action.ENGAGE_SOCIAL, Action.STAY_DISENGAGED

STREET = (1, 1)          # default layout: outreach worker adjacent at (1, 2)
LONELY_STREET = (4, 4)   # no worker in reach


class TestFeasibility:
    def test_registered_agent_may_request_care(self, world, policy, scale):
        state = make_state([make_profile(registered=True, position=STREET)], policy, scale)
        assert A1 in feasible_actions(state, 0, world, policy).possible

    def test_unregistered_agent_blocked_by_gate(self, world, policy, scale):
        state = make_state([make_profile(registered=False, position=STREET)], policy, scale)
        assert A1 in feasible_actions(state, 0, world, policy).impossible

    def test_gate_disabled_no_worker_nearby(self, world, scale, policy):
        from dataclasses import replace

        open_policy = replace(policy, phc_requires_registration=False)
        state = make_state([make_profile(registered=False, position=LONELY_STREET)], open_policy, scale)
        partition = feasible_actions(state, 0, world, open_policy)
        assert partition.possible == frozenset({A1, A2, A4})
        assert partition.impossible == frozenset({A3})

    def test_gate_soundness_when_disabled(self, world, policy, scale):
        # With the gate off, a1 feasibility never depends on the registration flag.
        from dataclasses import replace

        open_policy = replace(policy, phc_requires_registration=False)
        for registered in (False, True):
            for position in (STREET, LONELY_STREET):
                state = make_state(
                    [make_profile(registered=registered, position=position)], open_policy, scale
                )
                assert A1 in feasible_actions(state, 0, world, open_policy).possible

    def test_engagement_needs_adjacent_worker(self, world, policy, scale):
        near = make_state([make_profile(registered=False, position=STREET)], policy, scale)
        far = make_state([make_profile(registered=False, position=LONELY_STREET)], policy, scale)
        assert A3 in feasible_actions(near, 0, world, policy).possible
        assert A3 in feasible_actions(far, 0, world, policy).impossible

    def test_skip_and_disengage_always_possible(self, world, policy, scale):
        for registered in (False, True):
            for position in (STREET, LONELY_STREET):
                state = make_state([make_profile(registered=registered, position=position)], policy, scale)
                partition = feasible_actions(state, 0, world, policy)
                assert {A2, A4} <= partition.possible

    def test_street_team_capacity_consumed_within_timestep(self, scenario, scale):
        from dataclasses import replace

        world = replace(scenario.world, street_team_capacity=1)
        policy = scenario.policy
        state = make_state(
            [make_profile(0, registered=False, position=STREET),
             make_profile(1, registered=False, position=(2, 1))],
            policy, scale,
        )
        assert A3 in feasible_actions(state, 0, world, policy).possible
        state, _ = transition(state, 0, A3, world, policy)
        assert A3 in feasible_actions(state, 1, world, policy).impossible
        # Counter resets with the timestep.
        assert A3 in feasible_actions(advance_timestep(state), 1, world, policy).possible

    def test_budget_gate_optional(self, scenario, scale):
        from dataclasses import replace

        policy = replace(scenario.policy, initial_budget_cents=1000, budget_gates_phc=True)
        state = make_state([make_profile(registered=True, position=STREET)], policy, scale)
        assert A1 in feasible_actions(state, 0, scenario.world, policy).impossible
        ungated = replace(policy, budget_gates_phc=False)
        state = make_state([make_profile(registered=True, position=STREET)], ungated, scale)
        assert A1 in feasible_actions(state, 0, scenario.world, ungated).possible

    def test_bad_agent_index(self, world, policy, scale):
        state = make_state([make_profile()], policy, scale)
        with pytest.raises(IndexError):
            feasible_actions(state, 5, world, policy)

    def test_done_agent_rejected(self, world, policy, scale):
        from dataclasses import replace as dc_replace

        profile = dc_replace(make_profile(), done=True, terminal=TerminalKind.HEALTHY)
        state = make_state([make_profile(1)], policy, scale)
        state = dc_replace(state, agents=(profile,))
        with pytest.raises(ContractViolation):
            feasible_actions(state, 0, world, policy)

    def test_partition_property_over_reachable_states(self, world, policy, scale):
        # Exhaustive walk of one agent's reachable states: the partition type
        # invariants (union, disjointness, always-possible pair) must hold everywhere.
        seen = set()
        frontier = [make_profile(registered=False, position=STREET)]
        while frontier:
            profile = frontier.pop()
            key = (profile.position, profile.health_level, profile.registered, profile.engagements)
            if key in seen:
                continue
            seen.add(key)
            state = make_state([profile], policy, scale)
            if state.agents[0].done:
                continue
            partition = feasible_actions(state, 0, world, policy)
            assert partition.possible | partition.impossible == frozenset(ACTIONS)
            assert not partition.possible & partition.impossible
            for action in ACTIONS:
                next_state, _ = transition(state, 0, action, world, policy)
                frontier.append(next_state.agents[0])
        assert len(seen) > 5


class TestTransition:
    def test_successful_phc_visit(self, world, policy, scale):
        state = make_state([make_profile(registered=True, health_level=1, position=STREET)], policy, scale)
        next_state, record = transition(state, 0, A1, world, policy)
        agent = next_state.agents[0]
        assert agent.health_level == 2
        assert agent.position == world.facilities[Facility.PHC]
        assert next_state.ledger.remaining_cents == policy.initial_budget_cents - policy.cost_phc_cents
        assert record.feasible and record.terminal is TerminalKind.NONE

    def test_denied_phc_attempt_only_costs_health(self, world, policy, scale):
        state = make_state([make_profile(registered=False, health_level=2, position=STREET)], policy, scale)
        next_state, record = transition(state, 0, A1, world, policy)
        agent = next_state.agents[0]
        assert agent.health_level == 1
        assert agent.position == STREET
        assert agent.registered is False
        assert next_state.ledger.total_billed_cents == 0
        assert not record.feasible

    def test_impossible_actions_never_move_or_register(self, world, policy, scale):
        # Attempting anything infeasible applies the health penalty and nothing else.
        state = make_state(
            [make_profile(registered=False, health_level=2, position=LONELY_STREET)], policy, scale
        )
        for action in (A1, A3):
            next_state, record = transition(state, 0, action, world, policy)
            agent = next_state.agents[0]
            assert not record.feasible
            assert agent.position == LONELY_STREET
            assert agent.registered is False
            assert agent.engagements == 0
            assert agent.health_level == 1

    def test_skipping_care_erodes_health(self, world, policy, scale):
        state = make_state([make_profile(health_level=2, position=STREET)], policy, scale)
        for action in (A2, A4):
            next_state, _ = transition(state, 0, action, world, policy)
            assert next_state.agents[0].health_level == 1

    def test_engagement_chain_to_registration(self, world, policy, scale):
        state = make_state(
            [make_profile(registered=False, engagements=1, health_level=1, position=STREET)], policy, scale
        )
        next_state, record = transition(state, 0, A3, world, policy)
        agent = next_state.agents[0]
        assert agent.engagements == 2
        assert agent.registered is True
        assert agent.position == world.facilities[Facility.SOCIAL_SERVICES]
        assert agent.health_level == 1  # default engagement has no health cost
        assert record.feasible

    def test_first_engagement_does_not_relocate(self, world, policy, scale):
        state = make_state([make_profile(registered=False, health_level=1, position=STREET)], policy, scale)
        next_state, _ = transition(state, 0, A3, world, policy)
        agent = next_state.agents[0]
        assert agent.engagements == 1
        assert not agent.registered
        assert agent.position == STREET

    def test_health_zero_means_hospitalization(self, world, policy, scale):
        state = make_state([make_profile(health_level=1, position=STREET)], policy, scale)
        next_state, record = transition(state, 0, A2, world, policy)
        agent = next_state.agents[0]
        assert agent.done and agent.terminal is TerminalKind.DEPRIVED
        assert agent.position == world.facilities[Facility.ICU]
        assert next_state.ledger.remaining_cents == policy.initial_budget_cents - policy.cost_icu_cents
        assert record.billed == ((Facility.ICU, policy.cost_icu_cents),)

    def test_reaching_top_health_ends_episode(self, world, policy, scale):
        state = make_state([make_profile(registered=True, health_level=2, position=STREET)], policy, scale)
        next_state, record = transition(state, 0, A1, world, policy)
        agent = next_state.agents[0]
        assert agent.done and agent.terminal is TerminalKind.HEALTHY
        assert record.terminal is TerminalKind.HEALTHY

    def test_health_stays_in_range_everywhere(self, world, policy, scale):
        for level in (1, 2):
            for action in ACTIONS:
                state = make_state(
                    [make_profile(registered=True, health_level=level, position=STREET)], policy, scale
                )
                next_state, _ = transition(state, 0, action, world, policy)
                assert 0 <= next_state.agents[0].health_level <= scale.max_level

    def test_transition_is_pure(self, world, policy, scale):
        state = make_state([make_profile(registered=False, health_level=1, position=STREET)], policy, scale)
        first = transition(state, 0, A3, world, policy)
        second = transition(state, 0, A3, world, policy)
        assert first == second
        assert state.agents[0].engagements == 0  # input untouched

    def test_done_agent_is_immutable(self, world, policy, scale):
        state = make_state([make_profile(health_level=1)], policy, scale)
        next_state, _ = transition(state, 0, A2, world, policy)  # dies
        with pytest.raises(ContractViolation):
            transition(next_state, 0, A1, world, policy)

    def test_engagement_health_cost_knob(self, scenario, scale):
        from dataclasses import replace

        policy = replace(scenario.policy, engagement_health_cost=0.5)
        state = make_state([make_profile(registered=False, health_level=2, position=STREET)], policy, scale)
        next_state, _ = transition(state, 0, A3, scenario.world, policy)
        assert next_state.agents[0].health_level == 1
        assert next_state.agents[0].engagements == 1


class TestReward:
    def expected(self, action: Action, feasible: bool, deprived_next: bool) -> float:
        if deprived_next:
            return -100.0
        if action in (A2, A4):
            return -5.0
        return 10.0 if feasible else -5.0

    def test_exhaustive_reward_table(self, world, policy, catalog, scale):
        """Every (action x feasibility x terminal-kind) cell matches the scalar table.

        States are fresh (no forfeited progress), which is where the scalar
        table is defined; re-restoration cells are covered separately below.
        """
        checked = 0
        for action in ACTIONS:
            feasibility_cases = (True,) if action in (A2, A4) else (True, False)
            for feasible in feasibility_cases:
                partition = make_partition(
                    request_phc=feasible if action is A1 else False,
                    engage_social=feasible if action is A3 else False,
                )
                for start_level in (1, 2):
                    profile = make_profile(
                        registered=False, health_level=start_level, engagements=0, position=STREET
                    )
                    state = make_state([profile], policy, scale)
                    next_state, record = apply_action(state, 0, action, partition, world, policy)
                    value = reward(state, 0, action, next_state, partition, catalog)
                    deprived = record.terminal is TerminalKind.DEPRIVED
                    assert value == self.expected(action, feasible, deprived), (
                        f"action={action.label} feasible={feasible} "
                        f"start={start_level} terminal={record.terminal}"
                    )
                    checked += 1
        assert checked == 12  # 4 actions x their feasibility cases x 2 start levels

    def test_reward_on_healthy_terminal_is_plain_scalar(self, world, policy, catalog, scale):
        state = make_state([make_profile(registered=True, health_level=2, position=STREET)], policy, scale)
        partition = feasible_actions(state, 0, world, policy)
        next_state, record = apply_action(state, 0, A1, partition, world, policy)
        assert record.terminal is TerminalKind.HEALTHY
        assert reward(state, 0, A1, next_state, partition, catalog) == 10.0

    def test_any_route_to_health_zero_pays_the_penalty(self, world, policy, catalog, scale):
        for action in (A1, A2, A3, A4):
            profile = make_profile(registered=False, health_level=1, position=LONELY_STREET)
            state = make_state([profile], policy, scale)
            partition = feasible_actions(state, 0, world, policy)
            next_state, record = apply_action(state, 0, action, partition, world, policy)
            assert record.terminal is TerminalKind.DEPRIVED
            assert reward(state, 0, action, next_state, partition, catalog) == -100.0

    def test_regained_health_is_not_paid_twice(self, world, policy, catalog, scale):
        # Heal to 1.0, deliberately slip back, then re-heal: the repeat visit
        # still heals and bills but earns no reward, so milking care never pays.
        state = make_state([make_profile(registered=True, health_level=1, position=STREET)], policy, scale)
        state, _ = transition(state, 0, A1, world, policy)     # 0.5 -> 1.0, peak 1.0
        partition = feasible_actions(state, 0, world, policy)
        dipped, _ = apply_action(state, 0, A2, partition, world, policy)  # back to 0.5
        partition = feasible_actions(dipped, 0, world, policy)
        reheal, record = apply_action(dipped, 0, A1, partition, world, policy)
        assert record.feasible and reheal.agents[0].health_level == 2
        assert reheal.ledger.total_billed_cents == 2 * policy.cost_phc_cents
        assert reward(dipped, 0, A1, reheal, partition, catalog) == 0.0
        # Progress above the old peak pays again.
        partition = feasible_actions(reheal, 0, world, policy)
        top, record = apply_action(reheal, 0, A1, partition, world, policy)
        assert record.terminal is TerminalKind.HEALTHY
        assert reward(reheal, 0, A1, top, partition, catalog) == 10.0

    def test_engagement_stops_paying_once_registered(self, world, policy, catalog, scale):
        state = make_state(
            [make_profile(registered=True, engagements=0, health_level=1, position=STREET)], policy, scale
        )
        partition = feasible_actions(state, 0, world, policy)
        assert A3 in partition.possible
        next_state, _ = apply_action(state, 0, A3, partition, world, policy)
        assert reward(state, 0, A3, next_state, partition, catalog) == 0.0

    def test_engagement_pays_nothing_when_gate_is_off(self, world, scenario, scale):
        from dataclasses import replace

        open_policy = replace(scenario.policy, phc_requires_registration=False)
        open_catalog = default_catalog(registration_required=False)
        state = make_state([make_profile(registered=False, health_level=1, position=STREET)], open_policy, scale)
        partition = feasible_actions(state, 0, world, open_policy)
        next_state, _ = apply_action(state, 0, A3, partition, world, open_policy)
        assert reward(state, 0, A3, next_state, partition, open_catalog) == 0.0


class TestTerminalKind:
    def test_classification(self, policy, scale):
        for level, expected in ((0, TerminalKind.DEPRIVED), (3, TerminalKind.HEALTHY),
                                (1, TerminalKind.NONE), (2, TerminalKind.NONE)):
            state = make_state([make_profile(2)], policy, scale)
            from dataclasses import replace as dc_replace

            state = dc_replace(
                state, agents=(dc_replace(state.agents[0], health_level=level),)
            )
            assert is_terminal(state, 0) is expected

    def test_bad_index(self, policy, scale):
        state = make_state([make_profile()], policy, scale)
        with pytest.raises(IndexError):
            is_terminal(state, 2)


class TestCatalog:
    def test_default_catalog_shape(self, catalog):
        assert len(catalog.capabilities) == 5
        assert catalog.terminal_penalty == 100.0
        assert catalog.evaluated_capabilities() == (Capability.BODILY_HEALTH, Capability.AFFILIATION)

    def test_duplicate_link_rejected(self):
        link = CapabilityLink(A1, Capability.BODILY_HEALTH, 10.0, -5.0)
        with pytest.raises(ValueError):
            CapabilityCatalog(capabilities=(Capability.BODILY_HEALTH,), links=(link, link))

    def test_unknown_capability_rejected(self):
        link = CapabilityLink(A1, Capability.AFFILIATION, 10.0, -5.0)
        with pytest.raises(ValueError):
            CapabilityCatalog(capabilities=(Capability.BODILY_HEALTH,), links=(link,))

    def test_zero_weight_rejected(self):
        link = CapabilityLink(A1, Capability.BODILY_HEALTH, 10.0, -5.0, eval_weight=Fraction(0))
        with pytest.raises(ValueError):
            CapabilityCatalog(capabilities=(Capability.BODILY_HEALTH,), links=(link,))

    def test_penalty_must_dominate_link_rewards(self):
        link = CapabilityLink(A1, Capability.BODILY_HEALTH, 10.0, -5.0)
        with pytest.raises(ValueError):
            CapabilityCatalog(
                capabilities=(Capability.BODILY_HEALTH,), links=(link,), terminal_penalty=10.0
            )

    def test_gate_off_catalog_zeroes_engagement_payoff(self):
        on = default_catalog(registration_required=True)
        off = default_catalog(registration_required=False)

        def engage_reward(cat):
            return next(l.reward_possible for l in cat.links_for(A3))

        assert engage_reward(on) == 10.0
        assert engage_reward(off) == 0.0
