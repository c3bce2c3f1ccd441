"""Post-processing of the selection distribution: smoothing and LLM budget gating."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core import SamplingDistribution
from ..exceptions import ConfigurationError

SCALE = "scale"
EARLY_STOP = "early-stop"


def allocate_group(total, group_size):
    """Spread ``total`` uniformly over ``group_size`` members."""
    if group_size < 1:
        raise ConfigurationError("group_size must be at least 1")
    return np.full(group_size, total / group_size)


def set_group_totals(dist: SamplingDistribution, llm_total: float) -> SamplingDistribution:
    """Rescale each group proportionally so the LLM group carries ``llm_total``.

    A group with zero current mass that must receive mass gets it uniformly.
    """
    p = dist.probs.copy()
    llm = dist.llm_mask
    cb = ~llm
    for mask, target in ((llm, llm_total), (cb, 1.0 - llm_total)):
        n = int(mask.sum())
        if n == 0:
            if target > 1e-15:
                raise ConfigurationError("cannot move probability onto an empty policy group")
            continue
        current = p[mask].sum()
        if current > 0:
            p[mask] *= target / current
        else:
            p[mask] = allocate_group(target, n)
    return SamplingDistribution(p, dist.groups)


def smooth_clip(dist: SamplingDistribution, p_min: float) -> SamplingDistribution:
    """Guarantee the CB group at least ``p_min`` total probability."""
    if not 0.0 <= p_min <= 1.0:
        raise ConfigurationError(f"p_min must lie in [0, 1], got {p_min}")
    if not dist.cb_mask.any() or not dist.llm_mask.any():
        return dist.copy()
    if dist.cb_total >= p_min:
        return dist.copy()
    return set_group_totals(dist, 1.0 - p_min)


def smooth_mix(dist: SamplingDistribution, gamma: float) -> SamplingDistribution:
    """Affine mixture with the uniform distribution."""
    if not 0.0 <= gamma <= 1.0:
        raise ConfigurationError(f"gamma must lie in [0, 1], got {gamma}")
    m = len(dist)
    return SamplingDistribution((1.0 - gamma) * dist.probs + gamma / m, dist.groups)


def smooth(dist: SamplingDistribution, kind: str = "none", param: float = 0.0) -> SamplingDistribution:
    if kind == "clip":
        return smooth_clip(dist, param)
    if kind == "mix":
        return smooth_mix(dist, param)
    if kind == "none":
        return dist.copy()
    raise ConfigurationError(f"unknown smoothing kind {kind!r}")


@dataclass
class BudgetState:
    """LLM call budget. ``limit=None`` means unlimited."""

    limit: Optional[int] = None
    used: int = 0
    mode: str = SCALE

    def __post_init__(self):
        if self.mode not in (SCALE, EARLY_STOP):
            raise ConfigurationError(f"unknown budget mode {self.mode!r}")
        if self.limit is not None and self.limit < 0:
            raise ConfigurationError("budget must be non-negative")

    @property
    def remaining(self):
        return math.inf if self.limit is None else self.limit - self.used

    @property
    def exhausted(self) -> bool:
        return self.limit is not None and self.used >= self.limit

    def charge(self, n=1):
        self.used += n
        if self.limit is not None and self.used > self.limit:
            raise ConfigurationError(f"LLM budget exceeded: {self.used} > {self.limit}")


def budget_gate(p_llm: float, budget: BudgetState) -> float:
    """Total LLM probability allowed given the calls already spent."""
    if budget.limit is None:
        return p_llm
    if budget.mode == EARLY_STOP:
        return p_llm if budget.used < budget.limit else 0.0
    if budget.limit == 0:
        return 0.0
    return p_llm * max(budget.limit - budget.used, 0) / budget.limit


def apply_budget(dist: SamplingDistribution, budget: BudgetState) -> SamplingDistribution:
    if budget.limit is None or not dist.llm_mask.any():
        return dist.copy()
    gated = budget_gate(dist.llm_total, budget)
    if gated == dist.llm_total:
        return dist.copy()
    return set_group_totals(dist, gated)


def sample_index(dist, rng: np.random.Generator) -> int:
    """Inverse-CDF draw over the ordered probability vector."""
    p = dist.probs if isinstance(dist, SamplingDistribution) else np.asarray(dist, dtype=float)
    cdf = np.cumsum(p)
    u = rng.random() * cdf[-1]
    i = int(np.searchsorted(cdf, u, side="right"))
    # guard against u landing on the total because of rounding, and
    # against zero-probability tails
    i = min(i, len(p) - 1)
    while p[i] == 0 and i > 0:
        i -= 1
    return i
