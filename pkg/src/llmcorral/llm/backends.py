"""Generator backends: synthetic oracle, replay from cache, and a remote chat-completions client."""

from __future__ import annotations

import abc
import logging
import math
import os
import time
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from ..exceptions import BackendError, ConfigurationError
from .cache import ResponseCache, cache_key
from .embed import _seed_from
from .prompts import build_messages
from .types import GeneratorOutput

logger = logging.getLogger(__name__)


class GeneratorBackend(abc.ABC):
    backend_id = "abstract"

    @abc.abstractmethod
    def generate(self, prompt: str, k: int) -> GeneratorOutput:
        ...


def popularity_weights(n, skew, seed):
    """Zipf weights ``(rank + 1) ** -skew`` over a seeded ranking of ``n`` actions."""
    ranks = np.random.default_rng(_seed_from("popularity", seed)).permutation(n)
    return (ranks + 1.0) ** (-skew)


def synthetic_generate(action_texts: Sequence[str], correct_ids, accuracy: float, k: int,
                       rng: np.random.Generator, top_likelihood=0.9, decay=0.5,
                       wrong_weights=None) -> GeneratorOutput:
    """Noisy-oracle generation.

    With probability ``accuracy`` rank 1 is a correct action's text;
    otherwise it is a wrong action, drawn proportionally to
    ``wrong_weights`` (uniform when None). Ranks 2..k are other action texts
    drawn uniformly without replacement while possible, with likelihoods
    ``top_likelihood * decay ** rank``.
    """
    if not 0.0 <= accuracy <= 1.0:
        raise ConfigurationError(f"accuracy must lie in [0, 1], got {accuracy}")
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    n = len(action_texts)
    correct = sorted(int(i) for i in correct_ids)
    wrong = [i for i in range(n) if i not in set(correct)]
    if rng.random() < accuracy or not wrong:
        first = correct[rng.integers(len(correct))]
        pool = wrong
    else:
        if wrong_weights is None:
            first = wrong[rng.integers(len(wrong))]
        else:
            w = np.asarray(wrong_weights, dtype=float)[wrong]
            first = wrong[int(rng.choice(len(wrong), p=w / w.sum()))]
        pool = [i for i in range(n) if i != first]
    rest = []
    if k > 1 and pool:
        rest = list(rng.choice(pool, size=k - 1, replace=len(pool) < k - 1))
    ids = [first] + [int(i) for i in rest]
    return GeneratorOutput((action_texts[i], top_likelihood * decay ** j) for j, i in enumerate(ids))


class SyntheticOracleBackend(GeneratorBackend):
    """Stand-in for a pretrained model with a known accuracy.

    ``answers`` maps a prompt to its correct action ids (a mapping or a
    callable). Output depends only on ``(seed, prompt, k)``, so the induced
    policy is stationary.

    ``distractor_skew`` > 0 makes wrong answers favour a few "popular"
    actions (Zipf over a seeded ranking), so the data such a policy
    collects covers the action space unevenly; 0 gives uniform mistakes.
    """

    def __init__(self, action_texts: Sequence[str], answers: Union[Mapping, Callable],
                 accuracy: float, seed: int = 0, top_likelihood=0.9, decay=0.5,
                 distractor_skew: float = 0.0):
        if not 0.0 <= accuracy <= 1.0:
            raise ConfigurationError(f"accuracy must lie in [0, 1], got {accuracy}")
        self.action_texts = list(action_texts)
        self.answers = answers
        self.accuracy = accuracy
        self.seed = seed
        self.top_likelihood = top_likelihood
        self.decay = decay
        self.distractor_skew = distractor_skew
        self._weights = (popularity_weights(len(self.action_texts), distractor_skew, seed)
                         if distractor_skew > 0 else None)
        self.backend_id = f"synthetic:acc={accuracy}:seed={seed}:skew={distractor_skew}"

    def correct_ids(self, prompt):
        ids = self.answers(prompt) if callable(self.answers) else self.answers.get(prompt)
        if not ids:
            raise BackendError(f"synthetic oracle has no answer for prompt {prompt[:60]!r}")
        return ids

    def generate(self, prompt, k):
        rng = np.random.default_rng(_seed_from("synthetic-oracle", self.seed, k, prompt))
        return synthetic_generate(self.action_texts, self.correct_ids(prompt), self.accuracy, k, rng,
                                  self.top_likelihood, self.decay, self._weights)


class ReplayBackend(GeneratorBackend):
    """Serve recorded outputs only; a miss is a backend failure."""

    def __init__(self, cache: ResponseCache, backend_id: str):
        self.cache = cache
        self.backend_id = backend_id

    def generate(self, prompt, k):
        out = self.cache.lookup(cache_key(self.backend_id, prompt, k))
        if out is None:
            raise BackendError(f"replay cache has no entry for prompt {prompt[:60]!r} (k={k})")
        return out


class CachedBackend(GeneratorBackend):
    """Read-through cache in front of another backend."""

    def __init__(self, inner: GeneratorBackend, cache: ResponseCache):
        self.inner = inner
        self.cache = cache
        self.backend_id = inner.backend_id
        self.misses = 0

    def generate(self, prompt, k):
        key = cache_key(self.backend_id, prompt, k)
        out = self.cache.lookup(key)
        if out is None:
            self.misses += 1
            out = self.inner.generate(prompt, k)
            self.cache.store(key, prompt, k, out)
        return out


def parse_chat_response(payload: dict) -> GeneratorOutput:
    """Choices of a chat-completions response as ``(text, likelihood)`` pairs.

    The likelihood is ``exp(sum of token logprobs)`` when the response
    carries logprobs, else 1.
    """
    choices = payload.get("choices") or []
    entries = []
    for ch in choices:
        text = ((ch.get("message") or {}).get("content") or "").strip()
        q = 1.0
        tokens = ((ch.get("logprobs") or {}).get("content")) or []
        if tokens:
            q = math.exp(sum(float(t["logprob"]) for t in tokens))
        entries.append((text, q if q > 0 else 1e-300))
    if not entries:
        raise BackendError("chat response contained no choices")
    entries.sort(key=lambda e: -e[1])
    return GeneratorOutput(entries)


class RemoteChatBackend(GeneratorBackend):
    """JSON-over-HTTP client for chat-completions style endpoints.

    Requests ``n=k`` choices with logprobs. Transport errors, 429 and 5xx
    responses are retried ``retries`` times with exponential backoff, then
    surface as ``BackendError``.
    """

    def __init__(self, url: str, model: str, token_env: str = "LLMCORRAL_API_TOKEN",
                 system: Optional[str] = None, retries: int = 2, backoff: float = 0.5,
                 timeout: float = 30.0, logprobs: bool = True, session=None):
        self.url = url
        self.model = model
        self.token_env = token_env
        self.system = system
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self.logprobs = logprobs
        self._session = session
        self.backend_id = f"remote:{url}:{model}:{system or ''}"

    @property
    def session(self):
        if self._session is None:
            import requests

            self._session = requests.Session()
        return self._session

    def request_body(self, prompt, k):
        return {
            "model": self.model,
            "messages": build_messages(prompt, self.system),
            "n": int(k),
            "logprobs": bool(self.logprobs),
        }

    def generate(self, prompt, k):
        import requests

        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = self.request_body(prompt, k)
        last = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self.session.post(self.url, json=body, headers=headers, timeout=self.timeout)
            except requests.RequestException as e:
                last = f"transport error: {e!r}"
                logger.warning("generator request failed (attempt %d): %s", attempt + 1, last)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                logger.warning("generator request failed (attempt %d): %s", attempt + 1, last)
                continue
            if resp.status_code >= 400:
                raise BackendError(f"HTTP {resp.status_code} from {self.url}: {resp.text[:200]}")
            try:
                return parse_chat_response(resp.json())
            except ValueError as e:
                raise BackendError(f"unparseable response from {self.url}: {e}") from None
        raise BackendError(f"giving up on {self.url} after {self.retries + 1} attempts ({last})")
