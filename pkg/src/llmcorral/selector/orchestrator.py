"""Model selection over CB learners and LLM-powered policies, one frozen batch at a time."""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator

from ..core import CB, LLM, BasePolicy, InteractionRecord, SamplingDistribution, policy_act
from ..env import DatasetRecord, step
from ..exceptions import BackendError, ConfigurationError
from .omd import CorralStrategy
from .smoothing import BudgetState, apply_budget, sample_index, smooth


class RngStreams:
    """Independent named generators derived from one master seed.

    A stream depends only on ``(seed, name)``, so adding or removing a
    consumer never shifts another consumer's draws.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams = {}

    def get(self, name: str) -> np.random.Generator:
        g = self._streams.get(name)
        if g is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=(zlib.crc32(name.encode("utf-8")),))
            g = self._streams[name] = np.random.default_rng(ss)
        return g

    def integer(self, name: str) -> int:
        return int(self.get(name).integers(2 ** 63 - 1))


@dataclass
class Pick:
    """Selection for one example of a batch."""

    index: int
    sampled_prob: float
    dist: np.ndarray
    action: int = -1
    loss: float = float("nan")


class DecisionMaker(BaseEstimator):
    """Sample a base policy per round, follow it, and adapt the sampling law.

    Parameters
    ----------
    policies : list of (name, policy)
        Fitted base policies. Their ``group`` attribute (``"CB"`` or
        ``"LLM"``) decides how they are treated.
    strategy : CorralStrategy or DecaySchedule
        Produces the (unsmoothed) distribution over policies.
    smoothing : {"clip", "mix", "none"}
    smoothing_param : float
        ``p_min`` for clipping, ``gamma`` for mixing.
    budget : int or None
        Maximum number of LLM-policy rounds.
    budget_mode : {"scale", "early-stop"}
    """

    def __init__(self, policies, strategy=None, smoothing="clip", smoothing_param=0.2,
                 budget=None, budget_mode="scale"):
        self.policies = policies
        self.strategy = strategy
        self.smoothing = smoothing
        self.smoothing_param = smoothing_param
        self.budget = budget
        self.budget_mode = budget_mode

    def fit(self, X=None, y=None):
        if not self.policies:
            raise ConfigurationError("at least one base policy is required")
        names = [n for n, _ in self.policies]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"policy names must be unique: {names}")
        self.groups_ = tuple(getattr(p, "group", CB) for _, p in self.policies)
        if self.budget is not None and LLM in self.groups_ and CB not in self.groups_:
            raise ConfigurationError("an LLM budget needs at least one CB policy to fall back on")
        self.strategy_ = self.strategy if self.strategy is not None else CorralStrategy()
        self.strategy_.reset(self.groups_)
        self.budget_ = BudgetState(self.budget, 0, self.budget_mode)
        self.t_ = 0
        return self

    @property
    def n_policies(self):
        return len(self.policies)

    def base_distribution(self, t) -> SamplingDistribution:
        return self.strategy_.distribution(t)

    def smoothed_distribution(self, t) -> SamplingDistribution:
        return smooth(self.base_distribution(t), self.smoothing, self.smoothing_param)

    def _fallback_cb(self, dist: SamplingDistribution, rng):
        mask = dist.cb_mask
        p = np.where(mask, dist.probs, 0.0)
        if p.sum() <= 0:
            p = mask / mask.sum()
        else:
            p = p / p.sum()
        i = sample_index(p, rng)
        return i, float(dist.probs[i]) if dist.probs[i] > 0 else float(p[i])

    def select_batch(self, batch: Sequence[DatasetRecord], streams: RngStreams) -> List[Pick]:
        """Sample policy indices under the batch-frozen law and play the actions.

        Nothing is learned here; call ``learn_batch`` afterwards.
        """
        smoothed = self.smoothed_distribution(self.t_ + 1)
        sampling_rng = streams.get("sampling")
        picks = []
        reserved = self.budget_.used
        for _ in batch:
            gate = BudgetState(self.budget_.limit, reserved, self.budget_.mode)
            law = apply_budget(smoothed, gate)
            i = sample_index(law, sampling_rng)
            if self.groups_[i] == LLM:
                reserved += 1
            picks.append(Pick(i, float(law.probs[i]), law.probs))

        contexts = [r.context for r in batch]
        by_policy = {}
        for j, pk in enumerate(picks):
            by_policy.setdefault(pk.index, []).append(j)

        # LLM generations first (they may run concurrently), in example order
        failed = []
        for i, rows in sorted(by_policy.items()):
            name, policy = self.policies[i]
            if self.groups_[i] != LLM:
                continue
            rng = streams.get(f"policy:{name}")
            if hasattr(policy, "generate_many"):
                outputs = policy.generate_many([contexts[j] for j in rows])
                for j, out in zip(rows, outputs):
                    if isinstance(out, Exception):
                        failed.append(j)
                    else:
                        picks[j].action = policy.act_on(out, rng)
            else:
                for j in rows:
                    try:
                        picks[j].action = policy_act(policy, contexts[j], rng)
                    except BackendError:
                        failed.append(j)

        # a failed generation is resampled from the CB group
        for j in sorted(failed):
            i, q = self._fallback_cb(SamplingDistribution(picks[j].dist, self.groups_, validate=False),
                                     sampling_rng)
            picks[j].index, picks[j].sampled_prob = i, q
            by_policy.setdefault(i, []).append(j)
        for i in by_policy:
            by_policy[i].sort()

        for i, rows in sorted(by_policy.items()):
            name, policy = self.policies[i]
            if self.groups_[i] == LLM:
                continue
            rng = streams.get(f"policy:{name}")
            if hasattr(policy, "select"):
                X = np.array([contexts[j].embedding for j in rows])
                for j, a in zip(rows, policy.select(X, rng)):
                    picks[j].action = int(a)
            else:
                for j in rows:
                    picks[j].action = policy_act(policy, contexts[j], rng)
        return picks

    def learn_batch(self, batch: Sequence[DatasetRecord], picks: Sequence[Pick]):
        """Feed the batch to every CB learner, update the strategy, charge the budget."""
        contexts = [r.context for r in batch]
        actions = [pk.action for pk in picks]
        losses = [pk.loss for pk in picks]
        for (_, policy), g in zip(self.policies, self.groups_):
            if g == CB:
                policy.update(contexts, actions, losses)
        if getattr(self.strategy_, "learns", False) and self.n_policies > 1:
            for pk in picks:
                self.strategy_.update(pk.index, pk.loss, pk.sampled_prob)
        n_llm = sum(self.groups_[pk.index] == LLM for pk in picks)
        if n_llm:
            self.budget_.charge(n_llm)
        self.t_ += len(picks)
        return self

    def run_batch(self, batch, streams, loss_fn=step) -> List[InteractionRecord]:
        t0 = self.t_
        picks = self.select_batch(batch, streams)
        for r, pk in zip(batch, picks):
            pk.loss = loss_fn(r, pk.action)
        self.learn_batch(batch, picks)
        return [
            InteractionRecord(t0 + j + 1, r.context.id, pk.index, pk.action, pk.loss, pk.dist,
                              self.groups_[pk.index])
            for j, (r, pk) in enumerate(zip(batch, picks))
        ]

    def run_round(self, record, streams, loss_fn=step) -> InteractionRecord:
        return self.run_batch([record], streams, loss_fn)[0]
