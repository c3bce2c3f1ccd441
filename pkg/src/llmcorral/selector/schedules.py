"""Pre-determined decay schedules for the total LLM sampling probability."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import CB, LLM, SamplingDistribution
from ..exceptions import ConfigurationError
from .smoothing import allocate_group

POLY = "poly"
EXP = "exp"


@dataclass(frozen=True)
class ScheduleParams:
    kind: str = POLY
    C: float = 10.0
    rate: float = 1.0  # alpha for poly, beta for exp
    p_min: float = 0.0
    p_max: float = 0.8

    def __post_init__(self):
        if self.kind not in (POLY, EXP):
            raise ConfigurationError(f"unknown schedule kind {self.kind!r}")
        if not 0.0 <= self.p_min <= self.p_max <= 1.0:
            raise ConfigurationError(f"need 0 <= p_min <= p_max <= 1, got ({self.p_min}, {self.p_max})")
        if self.C <= 0 or self.rate <= 0:
            raise ConfigurationError("C and rate must be positive")

    @classmethod
    def constant(cls, p):
        return cls(POLY, 1.0, 1.0, p, p)


def schedule_prob(params: ScheduleParams, t: int) -> float:
    """Total LLM probability at step ``t`` (1-based), clipped to ``[p_min, p_max]``."""
    if t < 1:
        raise ConfigurationError(f"t must be >= 1, got {t}")
    if params.kind == POLY:
        raw = params.C / t ** params.rate
    else:
        raw = params.C * math.exp(-params.rate * t)
    return min(params.p_max, max(params.p_min, raw))


def expected_llm_calls(params: ScheduleParams, horizon: int) -> float:
    if horizon < 1:
        raise ConfigurationError("horizon must be >= 1")
    return math.fsum(schedule_prob(params, t) for t in range(1, horizon + 1))


class DecaySchedule:
    """Feedback-free strategy: LLM total follows the schedule, uniform within groups."""

    learns = False

    def __init__(self, params: ScheduleParams):
        self.params = params
        self.groups = None

    def reset(self, groups):
        self.groups = tuple(groups)
        return self

    def distribution(self, t) -> SamplingDistribution:
        groups = np.array(self.groups)
        n_llm = int((groups == LLM).sum())
        n_cb = int((groups == CB).sum())
        p = np.zeros(len(groups))
        if n_llm == 0:
            p[:] = allocate_group(1.0, n_cb)
        elif n_cb == 0:
            p[:] = allocate_group(1.0, n_llm)
        else:
            p_llm = schedule_prob(self.params, t)
            p[groups == LLM] = allocate_group(p_llm, n_llm)
            p[groups == CB] = allocate_group(1.0 - p_llm, n_cb)
        return SamplingDistribution(p, self.groups)

    def update(self, index, loss, sampled_prob=None):
        return self
