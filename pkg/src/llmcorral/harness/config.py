"""Versioned JSON experiment configuration. Unknown keys are rejected."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..exceptions import ConfigurationError
from ..llm.prompts import STYLES

SCHEMA_VERSION = "v1"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class EnvironmentConfig(_Strict):
    """Where contexts come from and how they are served.

    ``source="synthetic-bilinear"`` draws a hidden bilinear environment
    (``hidden_seed`` fixes it across run seeds); ``"jsonl"`` reads the
    ``records`` and ``actions`` files.
    """

    source: Literal["synthetic-bilinear", "jsonl"] = "synthetic-bilinear"
    horizon: int = Field(20000, ge=0)
    batch_size: int = Field(32, ge=1)
    epochs: int = Field(1, ge=1)
    shuffle: bool = True
    d_x: int = Field(16, ge=1)
    d_a: int = Field(16, ge=1)
    n_actions: int = Field(50, ge=2)
    n_records: Optional[int] = Field(None, ge=1)
    hidden_seed: int = 123
    records: Optional[str] = None
    actions: Optional[str] = None

    @model_validator(mode="after")
    def _paths(self):
        if self.source == "jsonl" and not (self.records and self.actions):
            raise ValueError("jsonl environments need both 'records' and 'actions' paths")
        return self


class CBPolicyConfig(_Strict):
    kind: Literal["cb"] = "cb"
    name: str = "cb"
    epsilon: float = Field(0.05, ge=0.0, le=1.0)
    C: float = Field(2.0, ge=1.0)
    learning_rate: float = Field(0.05, gt=0.0)
    fit_intercept: bool = True
    n_components: Optional[int] = Field(None, ge=1)


class BackendConfig(_Strict):
    type: Literal["synthetic", "replay", "remote"] = "synthetic"
    # synthetic oracle
    accuracy: float = Field(0.35, ge=0.0, le=1.0)
    seed: int = 7
    distractor_skew: float = Field(1.5, ge=0.0)
    top_likelihood: float = Field(0.9, gt=0.0)
    decay: float = Field(0.5, gt=0.0, le=1.0)
    # response cache; required for replay
    cache: Optional[str] = None
    backend_id: Optional[str] = None
    # remote
    url: Optional[str] = None
    model: Optional[str] = None
    token_env: str = "LLMCORRAL_API_TOKEN"
    retries: int = Field(2, ge=0)
    backoff: float = Field(0.5, ge=0.0)
    timeout: float = Field(30.0, gt=0.0)

    @model_validator(mode="after")
    def _required(self):
        if self.type == "replay" and not (self.cache and self.backend_id):
            raise ValueError("replay backends need 'cache' and 'backend_id'")
        if self.type == "remote" and not (self.url and self.model):
            raise ValueError("remote backends need 'url' and 'model'")
        return self


class EmbedderConfig(_Strict):
    type: Literal["hash", "ngram"] = "hash"
    dim: int = Field(64, ge=1)
    seed: int = 0
    n: int = Field(3, ge=1)


class LLMPolicyConfig(_Strict):
    kind: Literal["llm"] = "llm"
    name: str = "llm"
    k: int = Field(1, ge=1)
    prompt_style: str = "plain"
    max_in_flight: int = Field(1, ge=1)
    backend: BackendConfig = BackendConfig()
    embedder: EmbedderConfig = EmbedderConfig()

    @model_validator(mode="after")
    def _style(self):
        if self.prompt_style not in STYLES:
            raise ValueError(f"unknown prompt_style {self.prompt_style!r}; choose from {sorted(STYLES)}")
        return self


PolicyConfig = Annotated[Union[CBPolicyConfig, LLMPolicyConfig], Field(discriminator="kind")]


class StrategyConfig(_Strict):
    kind: Literal["corral", "poly", "exp"] = "corral"
    eta: float = Field(0.05, gt=0.0)
    C: float = Field(10.0, gt=0.0)
    alpha: float = Field(1.0, gt=0.0)
    beta: float = Field(0.001, gt=0.0)
    p_min: float = Field(0.0, ge=0.0, le=1.0)
    p_max: float = Field(0.8, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _range(self):
        if self.p_min > self.p_max:
            raise ValueError("p_min must not exceed p_max")
        return self


class SmoothingConfig(_Strict):
    kind: Literal["clip", "mix", "none"] = "clip"
    p_min: float = Field(0.2, ge=0.0, le=1.0)
    gamma: float = Field(0.1, ge=0.0, le=1.0)

    @property
    def param(self):
        return self.gamma if self.kind == "mix" else self.p_min


class BudgetConfig(_Strict):
    limit: Optional[int] = Field(None, ge=0)
    mode: Literal["scale", "early-stop"] = "scale"


class ExperimentConfig(_Strict):
    schema_version: Literal["v1"] = Field(SCHEMA_VERSION, alias="schema")
    name: str = "experiment"
    environment: EnvironmentConfig = EnvironmentConfig()
    policies: List[PolicyConfig] = Field(default_factory=lambda: [CBPolicyConfig(), LLMPolicyConfig()],
                                         min_length=1)
    strategy: StrategyConfig = StrategyConfig()
    smoothing: SmoothingConfig = SmoothingConfig()
    budget: BudgetConfig = BudgetConfig()
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_length=1)
    track_counterfactual: bool = True
    # re-queries the generator every step; off by default since remote calls cost money
    counterfactual_llm: bool = False
    log_every: int = Field(64, ge=1)
    output_dir: Optional[str] = None

    @model_validator(mode="after")
    def _roster(self):
        names = [p.name for p in self.policies]
        if len(set(names)) != len(names):
            raise ValueError(f"policy names must be unique, got {names}")
        kinds = {p.kind for p in self.policies}
        if self.budget.limit is not None and "llm" in kinds and "cb" not in kinds:
            raise ValueError("a budget needs at least one cb policy to fall back on")
        return self

    @property
    def is_full(self):
        """True when both groups are present (the complete selection setting)."""
        return {p.kind for p in self.policies} == {"cb", "llm"}

    def cb_policies(self):
        return [p for p in self.policies if p.kind == "cb"]

    def llm_policies(self):
        return [p for p in self.policies if p.kind == "llm"]

    def with_policies(self, names):
        """Copy keeping only the named policies, e.g. for stand-alone baselines."""
        keep = [p for p in self.policies if p.name in set(names)]
        if len(keep) != len(set(names)):
            raise ConfigurationError(f"unknown policy names in {list(names)}")
        return self.replace(policies=[p.model_dump() for p in keep])

    def replace(self, **sections):
        """Copy with whole sections swapped, re-validated."""
        data = self.to_dict()
        for k, v in sections.items():
            data[k] = v.model_dump(by_alias=True) if isinstance(v, BaseModel) else v
        return ExperimentConfig.from_dict(data)

    def to_dict(self):
        return self.model_dump(mode="json", by_alias=True)

    @classmethod
    def from_dict(cls, data):
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigurationError(f"invalid experiment config:\n{e}") from None

    @classmethod
    def from_json(cls, path):
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigurationError(f"cannot read config {path}: {e}") from None
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from None
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def dump(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_json(path)
