"""Hypothetical (non-invasive) evaluation of base policies during a run."""

from __future__ import annotations

import copy
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from ..core import LLM, InteractionRecord, loss_to_reward
from ..env import DatasetRecord, step
from ..exceptions import BackendError
from .metrics import MetricsSeries, running_mean


def greedy_rewards(cb_policy, batch: Sequence[DatasetRecord]) -> np.ndarray:
    """Reward each record would give the CB policy's greedy action."""
    if not batch:
        return np.zeros(0)
    X = np.array([r.context.embedding for r in batch])
    return np.array([loss_to_reward(step(r, a)) for r, a in zip(batch, cb_policy.predict(X))])


def llm_rewards(llm_policy, batch: Sequence[DatasetRecord], rng) -> np.ndarray:
    """Reward of the LLM policy's action on each record; NaN where generation failed."""
    out = np.full(len(batch), np.nan)
    outputs = llm_policy.generate_many([r.context for r in batch])
    for j, (r, o) in enumerate(zip(batch, outputs)):
        if not isinstance(o, Exception):
            out[j] = loss_to_reward(step(r, llm_policy.act_on(o, rng)))
    return out


def track_counterfactual(record: DatasetRecord, cb_policy, llm_policy=None, rng=None) -> Tuple[float, Optional[float]]:
    """Rewards the CB greedy action and the LLM policy's action would get on ``record``.

    Nothing is updated. ``rng`` is only consumed by a top-k LLM draw; pass a
    dedicated generator so the main run is unaffected.
    """
    cb = float(greedy_rewards(cb_policy, [record])[0])
    if llm_policy is None:
        return cb, None
    try:
        llm = loss_to_reward(step(record, llm_policy.act(record.context, rng)))
    except BackendError:
        llm = None
    return cb, llm


def make_shadow(cb_policy):
    """Untrained copy of a fitted CB policy (same spanner and features, zero model)."""
    shadow = copy.deepcopy(cb_policy)
    shadow.W_ = np.zeros_like(cb_policy.W_)
    shadow.n_updates_ = 0
    return shadow


def llm_rows(records: Sequence[InteractionRecord]):
    return [j for j, r in enumerate(records) if r.group == LLM]


class CounterfactualTracker:
    """Greedy-reward tracking for the main CB policy and a shadow learner.

    The shadow learner sees only the rounds in which an LLM policy was
    sampled. ``evaluate`` must be called on a batch before the batch is
    learned from, ``learn`` afterwards.
    """

    def __init__(self, cb_policy, llm_policy=None, shadow=True, rng=None):
        self.cb_policy = cb_policy
        self.llm_policy = llm_policy
        self.shadow = make_shadow(cb_policy) if shadow is True else (shadow or None)
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def evaluate(self, batch):
        cb = greedy_rewards(self.cb_policy, batch)
        sh = greedy_rewards(self.shadow, batch) if self.shadow is not None else None
        llm = llm_rewards(self.llm_policy, batch, self.rng) if self.llm_policy is not None else None
        return cb, llm, sh

    def learn(self, batch, records: Sequence[InteractionRecord]):
        if self.shadow is None:
            return
        rows = llm_rows(records)
        if rows:
            self.shadow.update([batch[j].context for j in rows], [records[j].action_id for j in rows],
                               [records[j].loss for j in rows])

    def annotate(self, records, cb, llm, sh):
        for j, r in enumerate(records):
            r.cf_cb_reward = float(cb[j])
            if sh is not None:
                r.cf_shadow_reward = float(sh[j])
            if llm is not None and np.isfinite(llm[j]):
                r.cf_llm_reward = float(llm[j])


def train_shadow_bandit(shadow, stream: Iterable[Tuple[Sequence[DatasetRecord], Sequence[InteractionRecord]]],
                        groups) -> MetricsSeries:
    """Replay ``(batch, interaction records)`` pairs into a shadow learner.

    Before each batch is learned from, the shadow's greedy reward is
    recorded; then it is updated on the LLM-sampled rows only. The returned
    series has the shadow's hypothetical reward as ``reward`` and its
    running average in ``cf_shadow``.
    """
    rewards, recs = [], []
    for batch, records in stream:
        rewards.extend(greedy_rewards(shadow, batch))
        rows = llm_rows(records)
        if rows:
            shadow.update([batch[j].context for j in rows], [records[j].action_id for j in rows],
                          [records[j].loss for j in rows])
        recs.extend(records)
    base = MetricsSeries.from_records(recs, groups)
    return MetricsSeries(np.asarray(rewards, dtype=float), base.p_cb, base.llm_calls_cum,
                         cf_shadow=running_mean(rewards))
