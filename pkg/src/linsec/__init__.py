"""Stochastic security games on linear influence networks.

A naive independent-Q-learning defender protects interdependent assets while
an omniscient attacker, who knows the game and the defender's learning rule,
solves the joint (network state, defender Q-table) decision process by fitted
value iteration with a small neural value model.
"""

from .attacker import (
    AttackerMdp,
    AttackerState,
    BoundInputs,
    SamplerConfig,
    asymptotic_bound,
    epsilon_bound,
    estimate_covering_radius,
    fitted_value_iteration,
    value_spec,
)
from .baselines import ATTACKER_KINDS, IqlAttacker, OmniscientAttacker, fi_greedy_act, iql_attacker_step, make_attacker
from .config import ExperimentConfig, experiment_from_mapping, load_experiment
from .exact import (
    FiniteMdp,
    exact_policy_value,
    exact_vi,
    exact_vi_static_defender,
    mc_truncated_return,
    policy_value,
    q_from_values,
    static_defender_mdp,
    two_state_chain,
)
from .game import (
    ActionSet,
    GameConfig,
    GameKernel,
    TransitionSupport,
    build_kernel,
    enumerate_states,
    sample_next_index,
    sample_transition,
    state_index,
    transition_support,
)
from .harness import (
    EpisodeRecord,
    RunResult,
    aggregate,
    emit_outputs,
    read_episodes,
    run_experiment,
    run_trial,
    train_model,
)
from .iql import IqlParams, QTable, boltzmann, new_table, q_update, sample_action, softmax_policy
from .kvfile import ConfigError
from .mlp import (
    MlpModel,
    MlpSpec,
    TrainConfig,
    forward,
    grad_check,
    init_model,
    load_model,
    save_model,
    train,
)
from .network import (
    InfluenceNetwork,
    NetworkError,
    NetworkState,
    attacker_reward,
    compromise_prob,
    default_network,
    defender_reward,
    effective_influence,
    effective_values,
    load_network,
    parse_network,
    support,
)

__version__ = "0.1.0"
