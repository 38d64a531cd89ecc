"""capasim: capability-centred gridworld simulator for access-to-care policies.

Agents learn behaviour with independent tabular Q-learning under configurable
regulatory constraints; scenarios are evaluated by what agents are able to do
(capability scores), what they achieve (functionings), and what it costs.
"""

from .agents import AgentProfile, HealthScale, PopulationGroup, PopulationSpec, TerminalKind, init_population
from .config import (
    ScenarioConfig,
    build_scenario,
    config_hash,
    default_config,
    parse_config,
    serialize_config,
    with_overrides,
)
from .errors import (
    CapasimError,
    ConfigError,
    ContractViolation,
    OracleUnavailableError,
    UndefinedMetricError,
)
from .evaluation import (
    CapabilityReport,
    CostReport,
    FunctioningReport,
    capability_report,
    central_capability,
    cost_report,
    functioning_report,
    population_aggregate,
    time_to_max,
)
from .learning import (
    EpisodeTrace,
    Hyperparameters,
    QTable,
    Scenario,
    TrainResult,
    epsilon_schedule,
    greedy_controller,
    greedy_rollout,
    q_update,
    run_episode,
    select_action,
    state_key,
    train,
)
from .mdp import (
    Action,
    Capability,
    CapabilityCatalog,
    CapabilityLink,
    FeasibilityPartition,
    Polarity,
    SimState,
    default_catalog,
    feasible_actions,
    initial_state,
    is_terminal,
    make_partition,
    reward,
    transition,
)
from .oracle import OracleResult, oracle_rollout, value_iteration_oracle
from .runner import ComparisonArtifacts, RunArtifacts, compare_runs, execute_run, oracle_comparison
from .world import (
    BudgetLedger,
    Facility,
    PolicyRules,
    WorldModel,
    bill,
    build_world,
    cents_to_euros,
    default_facilities,
    euros_to_cents,
)

__version__ = "0.1.0"
