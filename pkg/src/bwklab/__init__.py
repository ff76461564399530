"""Budgeted bandit algorithms, environments, and a regret benchmarking harness."""

from .core import (
    ExactSum,
    InstanceParams,
    Outcome,
    RngStream,
    RoundRecord,
    RunTrace,
    TerminationReason,
    log_sum_exp,
    normalized_probs_from_log_weights,
    require_simplex,
)
from .environments import (
    AdversarialMatrixSpec,
    PointMass,
    ScaledBernoulli,
    StochasticEnvSpec,
    UniformOn,
    adversarial_step,
    big_cost_trap_matrix,
    hidden_best_arm_instance,
    load_matrix_csv,
    random_matrix_spec,
    save_matrix_csv,
    stochastic_step,
    true_efficiency,
)
from .evaluation import (
    HindsightReport,
    RegretMode,
    RegretReport,
    adversarial_regret,
    aggregate_regret,
    brute_force_optimal_gain,
    greedy_oracle_gain,
    hindsight_fixed_arms,
    stochastic_pseudo_regret,
    stochastic_regret_report,
)
from .harness import (
    EnvironmentConfig,
    ExperimentConfig,
    PolicyConfig,
    SummaryRow,
    emit_results,
    fit_loglog_slope,
    load_config,
    parse_config,
    parse_summary_csv,
    run_episode,
    run_experiment,
)
from .policies import (
    Exp3Bwk,
    Exp3PPBwk,
    FixedArmPolicy,
    Phase,
    UniformPolicy,
    exploration_gamma,
    gap_estimates,
    loss_mixing_rate,
)

__version__ = "0.1.0"

__all__ = [
    "AdversarialMatrixSpec",
    "EnvironmentConfig",
    "ExactSum",
    "Exp3Bwk",
    "Exp3PPBwk",
    "ExperimentConfig",
    "FixedArmPolicy",
    "HindsightReport",
    "InstanceParams",
    "Outcome",
    "Phase",
    "PointMass",
    "PolicyConfig",
    "RegretMode",
    "RegretReport",
    "RngStream",
    "RoundRecord",
    "RunTrace",
    "ScaledBernoulli",
    "StochasticEnvSpec",
    "SummaryRow",
    "TerminationReason",
    "UniformOn",
    "UniformPolicy",
    "adversarial_regret",
    "adversarial_step",
    "aggregate_regret",
    "big_cost_trap_matrix",
    "brute_force_optimal_gain",
    "emit_results",
    "exploration_gamma",
    "fit_loglog_slope",
    "gap_estimates",
    "greedy_oracle_gain",
    "hidden_best_arm_instance",
    "hindsight_fixed_arms",
    "load_config",
    "load_matrix_csv",
    "log_sum_exp",
    "loss_mixing_rate",
    "normalized_probs_from_log_weights",
    "parse_config",
    "parse_summary_csv",
    "random_matrix_spec",
    "require_simplex",
    "run_episode",
    "run_experiment",
    "save_matrix_csv",
    "stochastic_pseudo_regret",
    "stochastic_regret_report",
    "stochastic_step",
    "true_efficiency",
]
