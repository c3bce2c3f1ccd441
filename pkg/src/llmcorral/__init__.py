"""Online model selection between contextual bandit learners and LLM-powered policies."""

from .core import CB, LLM, Action, ActionSpace, BasePolicy, Context, InteractionRecord, SamplingDistribution
from .exceptions import (
    BackendError,
    ConfigurationError,
    ConvergenceError,
    DataError,
    LLMCorralError,
    SolverError,
    TrainingError,
)

__version__ = "0.1.0"
