"""Shared domain types and the base-policy abstraction."""

from __future__ import annotations

import abc
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import ConfigurationError

CB = "CB"
LLM = "LLM"

SUM_TOL = 1e-9


@dataclass(frozen=True)
class Context:
    id: int
    text: str
    embedding: np.ndarray = field(repr=False)

    def __post_init__(self):
        emb = np.asarray(self.embedding, dtype=float)
        if emb.ndim != 1:
            raise ConfigurationError(f"context {self.id}: embedding must be 1-d, got shape {emb.shape}")
        emb.setflags(write=False)
        object.__setattr__(self, "embedding", emb)

    @property
    def dim(self) -> int:
        return self.embedding.shape[0]


@dataclass(frozen=True)
class Action:
    id: int
    text: str
    embedding: np.ndarray = field(repr=False)


class ActionSpace:
    """Ordered, immutable set of actions with ids ``0..n-1``.

    Embeddings are kept as one ``(n_actions, dim)`` matrix so scoring is a
    single matrix product.
    """

    def __init__(self, texts: Sequence[str], embeddings):
        emb = np.array(embeddings, dtype=float)
        if emb.ndim != 2:
            raise ConfigurationError(f"action embeddings must be 2-d, got shape {emb.shape}")
        if len(texts) != emb.shape[0]:
            raise ConfigurationError(f"{len(texts)} action texts but {emb.shape[0]} embeddings")
        if emb.shape[0] < 1:
            raise ConfigurationError("action space is empty")
        if not np.all(np.isfinite(emb)):
            raise ConfigurationError("action embeddings contain non-finite values")
        emb.setflags(write=False)
        self.texts = tuple(str(t) for t in texts)
        self.embeddings = emb

    def __len__(self):
        return self.embeddings.shape[0]

    def __getitem__(self, i) -> Action:
        i = self.check_id(i)
        return Action(i, self.texts[i], self.embeddings[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def __eq__(self, other):
        if not isinstance(other, ActionSpace):
            return NotImplemented
        return self.texts == other.texts and np.array_equal(self.embeddings, other.embeddings)

    def __repr__(self):
        return f"ActionSpace(n_actions={len(self)}, dim={self.dim})"

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(len(self))

    def check_id(self, i) -> int:
        i = int(i)
        if not 0 <= i < len(self):
            raise ConfigurationError(f"action id {i} outside [0, {len(self)})")
        return i

    def with_embeddings(self, embeddings) -> "ActionSpace":
        return ActionSpace(self.texts, embeddings)


class SamplingDistribution:
    """Probability vector over base policies, each tagged CB or LLM."""

    def __init__(self, probs, groups: Sequence[str], validate: bool = True):
        self.probs = np.array(probs, dtype=float)
        self.groups = tuple(groups)
        if validate:
            self.validate()

    def validate(self):
        p = self.probs
        if p.ndim != 1 or len(p) != len(self.groups):
            raise ConfigurationError("probs and groups must be 1-d and of equal length")
        if any(g not in (CB, LLM) for g in self.groups):
            raise ConfigurationError(f"unknown group tag in {self.groups}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ConfigurationError(f"probabilities must be finite and non-negative: {p}")
        if abs(p.sum() - 1.0) > SUM_TOL:
            raise ConfigurationError(f"probabilities sum to {p.sum()!r}, not 1")
        return self

    @classmethod
    def uniform(cls, groups: Sequence[str]) -> "SamplingDistribution":
        m = len(groups)
        return cls(np.full(m, 1.0 / m), groups)

    def __len__(self):
        return len(self.probs)

    def __repr__(self):
        return f"SamplingDistribution({np.round(self.probs, 6).tolist()}, groups={list(self.groups)})"

    @property
    def cb_mask(self) -> np.ndarray:
        return np.array([g == CB for g in self.groups])

    @property
    def llm_mask(self) -> np.ndarray:
        return np.array([g == LLM for g in self.groups])

    @property
    def cb_total(self) -> float:
        return float(self.probs[self.cb_mask].sum())

    @property
    def llm_total(self) -> float:
        return float(self.probs[self.llm_mask].sum())

    def copy(self) -> "SamplingDistribution":
        return SamplingDistribution(self.probs.copy(), self.groups, validate=False)


@dataclass
class InteractionRecord:
    t: int
    context_id: int
    policy_index: int
    action_id: int
    loss: float
    dist_snapshot: np.ndarray
    group: str = CB
    cf_cb_reward: Optional[float] = None
    cf_llm_reward: Optional[float] = None
    cf_shadow_reward: Optional[float] = None

    @property
    def reward(self) -> float:
        return loss_to_reward(self.loss)

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "context_id": self.context_id,
            "policy_index": self.policy_index,
            "group": self.group,
            "action_id": self.action_id,
            "loss": self.loss,
            "dist": [float(p) for p in self.dist_snapshot],
            "cf_cb_reward": self.cf_cb_reward,
            "cf_llm_reward": self.cf_llm_reward,
            "cf_shadow_reward": self.cf_shadow_reward,
        }


def loss_to_reward(loss: float) -> float:
    return 1.0 - loss


def reward_to_loss(reward: float) -> float:
    return 1.0 - reward


def argmin_lowest(values) -> int:
    """Index of the smallest entry; ties go to the lowest index."""
    # np.argmin already returns the first occurrence
    return int(np.argmin(values))


def argmax_lowest(values) -> int:
    return int(np.argmax(values))


class BasePolicy(abc.ABC):
    """Anything Algorithm-2 style orchestration can sample and follow.

    ``group`` is either ``CB`` (learns from feedback) or ``LLM`` (static).
    """

    group = CB
    context_dim: Optional[int] = None
    n_actions: Optional[int] = None

    @abc.abstractmethod
    def act(self, context: Context, rng: np.random.Generator) -> int:
        ...

    def update(self, contexts, actions, losses):
        """Consume a batch of feedback. Static policies ignore it."""
        return self


class ConstantPolicy(BasePolicy):
    """Always plays the same action. Mostly useful in tests."""

    def __init__(self, action_id: int = 0, group: str = CB, n_actions: Optional[int] = None):
        self.action_id = action_id
        self.group = group
        self.n_actions = n_actions

    def act(self, context, rng):
        return self.action_id


def policy_act(policy: BasePolicy, context: Context, rng: np.random.Generator) -> int:
    expected = getattr(policy, "context_dim", None)
    if expected is not None and context.dim != expected:
        raise ConfigurationError(
            f"context {context.id} has dimension {context.dim}, policy expects {expected}"
        )
    a = int(policy.act(context, rng))
    n = getattr(policy, "n_actions", None)
    if n is not None and not 0 <= a < n:
        raise ConfigurationError(f"policy returned action {a} outside [0, {n})")
    return a
