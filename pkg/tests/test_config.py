"""Scenario configuration: defaults, strict validation, round-trips, hashing."""

from fractions import Fraction

import pytest

from capasim.config import (
    build_scenario,
    config_hash,
    default_config,
    parse_config,
    parse_config_dict,
    serialize_config,
    with_overrides,
)
from capasim.errors import ConfigError
from capasim.mdp import Action, Capability


class TestDefaults:
    def test_empty_config_is_the_default_scenario(self):
        assert parse_config("{}") == default_config()

    def test_default_values(self):
        cfg = default_config()
        assert (cfg.world.width, cfg.world.height) == (6, 6)
        assert cfg.policy.initial_budget == 5000.0
        assert (cfg.policy.cost_phc, cfg.policy.cost_icu) == (30.0, 1000.0)
        assert cfg.policy.engagement_threshold == 2
        assert (cfg.learning.gamma, cfg.learning.learning_rate) == (0.99, 0.2)
        assert (cfg.learning.epsilon_init, cfg.learning.episodes) == (0.1, 300)
        assert len(cfg.population.agents) == 2
        assert cfg.population.agents[0].registered and not cfg.population.agents[1].registered

    def test_default_scenario_assembles(self):
        scenario = build_scenario(default_config())
        assert scenario.policy.initial_budget_cents == 500_000
        assert scenario.policy.cost_phc_cents == 3000
        assert len(scenario.world.social_workers) == 2


class TestRoundTrip:
    def test_default_round_trips(self):
        cfg = default_config()
        assert parse_config(serialize_config(cfg)) == cfg

    def test_custom_round_trips(self):
        cfg = parse_config_dict(
            {
                "world": {"width": 8, "height": 7, "phc_capacity": 3,
                          "social_workers": [[2, 2], [4, 4]]},
                "policy": {"engagement_threshold": 3, "cost_phc": 25.5},
                "population": {"agents": [
                    {"count": 2, "health": 1.0, "registered": False, "start": "auto"},
                    {"count": 1, "health": 0.5, "registered": True, "start": [3, 3]},
                ]},
                "learning": {"seed": 42, "episodes": 10, "mask_infeasible": True},
                "evaluation": {"capability_weights": {"affiliation": {"engage_social": 0.5}}},
                "output": {"directory": "out", "plots": False},
            }
        )
        assert parse_config(serialize_config(cfg)) == cfg


class TestStrictness:
    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config_dict({"wrld": {}})
        assert "wrld" in str(excinfo.value)

    def test_typo_in_section_names_offending_path(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config_dict({"world": {"grdi_size": 6}})
        assert "world.grdi_size" in str(excinfo.value)

    def test_gamma_out_of_range(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config_dict({"learning": {"gamma": 1.5}})
        assert "learning.gamma" in str(excinfo.value)

    def test_invalid_json_reports_position(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config("{, nope}")
        message = str(excinfo.value)
        assert "line" in message and "column" in message

    def test_interior_facility_rejected_at_parse(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config_dict({"world": {"facilities": {"phc": [3, 3]}}})
        assert "facilities" in str(excinfo.value)

    def test_missing_facilities_filled_when_section_partial(self):
        # Supplying only some facilities is an error: the mapping replaces the default.
        with pytest.raises(ConfigError):
            parse_config_dict({"world": {"facilities": {"phc": [5, 2], "icu": [0, 0]}}})

    def test_sub_cent_money_rejected(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config_dict({"policy": {"cost_phc": 0.001}})
        assert "cost_phc" in str(excinfo.value)

    def test_off_grid_health_rejected(self):
        with pytest.raises(ConfigError):
            parse_config_dict({"population": {"agents": [{"count": 1, "health": 0.3}]}})

    def test_engagement_cost_must_match_the_scale(self):
        with pytest.raises(ConfigError):
            parse_config_dict({"policy": {"engagement_health_cost": 0.25}})

    def test_unknown_capability_in_weights(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config_dict({"evaluation": {"capability_weights": {"playfulness": {"request_phc": 1}}}})
        assert "playfulness" in str(excinfo.value)

    def test_unknown_action_in_weights(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config_dict({"evaluation": {"capability_weights": {"affiliation": {"fly": 1}}}})
        assert "fly" in str(excinfo.value)

    def test_weight_on_missing_link_rejected(self):
        with pytest.raises(ConfigError):
            parse_config_dict({"evaluation": {"capability_weights": {"life": {"skip_phc": 1}}}})

    def test_zero_weight_rejected(self):
        with pytest.raises(ConfigError):
            parse_config_dict({"evaluation": {"capability_weights": {"affiliation": {"engage_social": 0}}}})

    def test_bool_is_not_a_number(self):
        with pytest.raises(ConfigError):
            parse_config_dict({"policy": {"cost_phc": True}})

    def test_unknown_output_format(self):
        with pytest.raises(ConfigError):
            parse_config_dict({"output": {"formats": ["xml"]}})


class TestAssembly:
    def test_weight_overrides_reach_the_catalog(self):
        cfg = parse_config_dict(
            {"evaluation": {"capability_weights": {"affiliation": {"engage_social": 0.6, "request_phc": 0.4}}}}
        )
        scenario = build_scenario(cfg)
        weights = {
            link.action: link.eval_weight
            for link in scenario.catalog.evaluation_links(Capability.AFFILIATION)
        }
        assert weights[Action.ENGAGE_SOCIAL] == Fraction("0.6")
        assert weights[Action.REQUEST_PHC] == Fraction("0.4")

    def test_explicit_workers_respected(self):
        cfg = parse_config_dict({"world": {"social_workers": [[3, 3]]}})
        scenario = build_scenario(cfg)
        assert scenario.world.social_workers == ((3, 3),)

    def test_auto_workers_sit_next_to_starts(self):
        scenario = build_scenario(default_config())
        starts = [(1, 1), (2, 1)]
        for start, worker in zip(starts, scenario.world.social_workers):
            assert scenario.world.is_adjacent(start, worker)

    def test_policy_flag_flows_into_the_catalog(self):
        on = build_scenario(with_overrides(default_config(), policy_on=True))
        off = build_scenario(with_overrides(default_config(), policy_on=False))
        engage = lambda sc: next(
            l.reward_possible for l in sc.catalog.links_for(Action.ENGAGE_SOCIAL)
        )
        assert engage(on) == 10.0 and engage(off) == 0.0


class TestHashing:
    def test_hash_is_stable(self):
        assert config_hash(default_config()) == config_hash(default_config())

    def test_hash_tracks_content(self):
        changed = with_overrides(default_config(), seed=99)
        assert config_hash(changed) != config_hash(default_config())

    def test_overrides(self):
        cfg = with_overrides(default_config(), seed=5, episodes=10, policy_on=False, out_dir="d")
        assert cfg.learning.seed == 5
        assert cfg.learning.episodes == 10
        assert cfg.policy.phc_requires_registration is False
        assert cfg.output.directory == "d"
