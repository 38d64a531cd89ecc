"""Shared fixtures and state-construction helpers."""

from __future__ import annotations

import pytest

from capasim.agents import AgentProfile, HealthScale
from capasim.config import build_scenario, default_config, with_overrides
from capasim.learning import Scenario
from capasim.mdp import SimState, initial_state
from capasim.world import PolicyRules, WorldModel


@pytest.fixture(scope="session")
def default_cfg():
    return default_config()


@pytest.fixture(scope="session")
def scenario(default_cfg) -> Scenario:
    return build_scenario(default_cfg)


@pytest.fixture()
def world(scenario) -> WorldModel:
    return scenario.world


@pytest.fixture()
def policy(scenario) -> PolicyRules:
    return scenario.policy


@pytest.fixture()
def catalog(scenario):
    return scenario.catalog


@pytest.fixture()
def scale(scenario) -> HealthScale:
    return scenario.population.scale


def make_profile(
    agent_id: int = 0,
    health_level: int = 1,
    registered: bool = True,
    engagements: int = 0,
    position: tuple[int, int] = (1, 1),
    peak: int | None = None,
) -> AgentProfile:
    return AgentProfile(
        id=agent_id,
        health_level=health_level,
        registered=registered,
        engagements=engagements,
        position=position,
        peak_health_level=health_level if peak is None else peak,
    )


def make_state(profiles, policy: PolicyRules, scale: HealthScale) -> SimState:
    return initial_state(profiles, policy, scale)


def fast_scenario(seed: int = 0, policy_on: bool = True, episodes: int = 300) -> Scenario:
    cfg = with_overrides(default_config(), seed=seed, episodes=episodes, policy_on=policy_on)
    return build_scenario(cfg)
