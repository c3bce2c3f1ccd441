"""Turn a text generator into a stationary decision-making policy."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..core import LLM, ActionSpace, BasePolicy, Context
from ..exceptions import BackendError, ConfigurationError
from .embed import HashEmbedder, cosine_matrix
from .prompts import build_prompt
from .types import GeneratorOutput, MatchedDistribution

logger = logging.getLogger(__name__)


def build_distribution(output: GeneratorOutput, matched_ids) -> MatchedDistribution:
    """Attach normalized likelihoods to the matched action ids."""
    if len(matched_ids) != len(output):
        raise ConfigurationError(f"{len(matched_ids)} matched ids for {len(output)} outputs")
    if len(output) == 1:
        # a single generation needs no likelihood
        return MatchedDistribution(((int(matched_ids[0]), 1.0),))
    q = np.asarray(output.likelihoods, dtype=float)
    total = q.sum()
    if not total > 0:
        raise ConfigurationError("likelihoods must have a positive sum")
    return MatchedDistribution(tuple((int(a), float(w)) for a, w in zip(matched_ids, q / total)))


class LLMPolicy(BaseEstimator, BasePolicy):
    """Top-k generation, embedding match to actions, likelihood-weighted draw.

    Parameters
    ----------
    backend : GeneratorBackend
    embedder : callable, text -> vector. Defaults to ``HashEmbedder()``.
    k : int
        Number of generations requested per context.
    prompt_style : str
        One of ``llmcorral.llm.prompts.STYLES``.
    max_in_flight : int
        Concurrent backend requests allowed by ``generate_many``.
    """

    group = LLM

    def __init__(self, backend=None, embedder=None, k=1, prompt_style="plain", max_in_flight=1):
        self.backend = backend
        self.embedder = embedder
        self.k = k
        self.prompt_style = prompt_style
        self.max_in_flight = max_in_flight

    def fit(self, actions: ActionSpace, y=None):
        """Embed every action text once; the policy never changes afterwards."""
        if self.backend is None:
            raise ConfigurationError("LLMPolicy needs a backend")
        if self.k < 1:
            raise ConfigurationError(f"k must be >= 1, got {self.k}")
        self.embedder_ = self.embedder if self.embedder is not None else HashEmbedder()
        self.action_vectors_ = np.array([self.embedder_(t) for t in actions.texts])
        self.n_actions = len(actions)
        self._output_vectors = {}
        return self

    def prompt(self, context: Context) -> str:
        return build_prompt(context.text, self.prompt_style)

    def generate(self, context: Context) -> GeneratorOutput:
        return self.backend.generate(self.prompt(context), self.k)

    def generate_many(self, contexts):
        """Outputs for several contexts, possibly concurrent; failures come back as exceptions."""

        def one(c):
            try:
                return self.generate(c)
            except BackendError as e:
                logger.warning("generator failed for context %s: %s", c.id, e)
                return e

        if self.max_in_flight > 1 and len(contexts) > 1:
            with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
                return list(pool.map(one, contexts))
        return [one(c) for c in contexts]

    def _embed_output(self, text):
        v = self._output_vectors.get(text)
        if v is None:
            v = self._output_vectors[text] = np.asarray(self.embedder_(text), dtype=float)
        return v

    def match(self, output: GeneratorOutput):
        check_is_fitted(self, "action_vectors_")
        Q = np.array([self._embed_output(t) for t in output.texts])
        # argmax picks the first maximum: lowest action id on ties
        return [int(i) for i in np.argmax(cosine_matrix(Q, self.action_vectors_), axis=1)]

    def distribution(self, output: GeneratorOutput) -> MatchedDistribution:
        return build_distribution(output, self.match(output))

    def act_on(self, output: GeneratorOutput, rng) -> int:
        dist = self.distribution(output)
        if len(dist.pairs) == 1:
            return dist.pairs[0][0]
        j = int(rng.choice(len(dist.pairs), p=np.asarray(dist.probs)))
        return dist.pairs[j][0]

    def act(self, context: Context, rng) -> int:
        return self.act_on(self.generate(context), rng)
