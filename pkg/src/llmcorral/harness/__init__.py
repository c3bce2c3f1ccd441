from .config import (
    BackendConfig,
    BudgetConfig,
    CBPolicyConfig,
    EmbedderConfig,
    EnvironmentConfig,
    ExperimentConfig,
    LLMPolicyConfig,
    SmoothingConfig,
    StrategyConfig,
    load_config,
)
from .counterfactual import CounterfactualTracker, make_shadow, track_counterfactual, train_shadow_bandit
from .metrics import CSV_COLUMNS, MetricsSeries, aggregate_seeds, emit_csv, read_csv, running_mean
from .runner import RunResult, aggregate_dir, build_environment, build_policies, run_experiment, run_seeds
