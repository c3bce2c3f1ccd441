from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

from ..exceptions import ConfigurationError


@dataclass(frozen=True)
class GeneratorOutput:
    """Top-k generations as ``(text, likelihood)`` pairs, most likely first."""

    entries: Tuple[Tuple[str, float], ...]

    def __init__(self, entries):
        entries = tuple((str(t), float(q)) for t, q in entries)
        if not entries:
            raise ConfigurationError("generator output must contain at least one entry")
        for t, q in entries:
            if not (q > 0 and math.isfinite(q)):
                raise ConfigurationError(f"likelihood of {t!r} must be positive and finite, got {q}")
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    @property
    def texts(self) -> List[str]:
        return [t for t, _ in self.entries]

    @property
    def likelihoods(self) -> List[float]:
        return [q for _, q in self.entries]


@dataclass(frozen=True)
class MatchedDistribution:
    """Multiset of ``(action_id, probability)`` pairs."""

    pairs: Tuple[Tuple[int, float], ...]

    @property
    def action_ids(self):
        return [a for a, _ in self.pairs]

    @property
    def probs(self):
        return [p for _, p in self.pairs]

    def action_probs(self, n_actions):
        """Collapse repeated ids into a dense probability vector."""
        out = [0.0] * n_actions
        for a, p in self.pairs:
            out[a] += p
        return out
