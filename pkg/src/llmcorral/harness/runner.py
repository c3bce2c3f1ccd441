"""Build everything a config describes and run the batched selection loop."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from ..bandit import SpannerGreedy
from ..core import CB, LLM
from ..env import EnvironmentSpec, batches, load_dataset, make_synthetic
from ..llm import (
    CachedBackend,
    HashEmbedder,
    LLMPolicy,
    NgramEmbedder,
    RemoteChatBackend,
    ReplayBackend,
    ResponseCache,
    SyntheticOracleBackend,
)
from ..llm.prompts import build_prompt, system_prompt
from ..selector import CorralStrategy, DecaySchedule, DecisionMaker, RngStreams, ScheduleParams
from .config import ExperimentConfig
from .counterfactual import CounterfactualTracker
from .metrics import MetricsSeries, aggregate_seeds, aggregate_summaries, emit_csv, read_csv, write_columns

logger = logging.getLogger(__name__)


def build_environment(env):
    if env.source == "jsonl":
        return load_dataset(env.records, env.actions)
    n = env.n_records if env.n_records is not None else env.horizon
    return make_synthetic(n, env.d_x, env.d_a, env.n_actions, seed=env.hidden_seed)


def build_backend(cfg, actions, records, prompt_style="plain"):
    if cfg.type == "replay":
        return ReplayBackend(ResponseCache(cfg.cache), cfg.backend_id)
    if cfg.type == "synthetic":
        answers = {}
        for r in records:
            key = build_prompt(r.context.text, prompt_style)
            answers[key] = answers.get(key, frozenset()) | r.correct_ids
        inner = SyntheticOracleBackend(actions.texts, answers, cfg.accuracy, cfg.seed, cfg.top_likelihood,
                                       cfg.decay, cfg.distractor_skew)
    else:
        inner = RemoteChatBackend(cfg.url, cfg.model, cfg.token_env, system_prompt(prompt_style),
                                  cfg.retries, cfg.backoff, cfg.timeout)
    return CachedBackend(inner, ResponseCache(cfg.cache)) if cfg.cache else inner


def build_embedder(cfg):
    if cfg.type == "ngram":
        return NgramEmbedder(cfg.dim, cfg.n)
    return HashEmbedder(cfg.dim, cfg.seed)


def build_policies(config: ExperimentConfig, actions, records):
    context_dim = records[0].context.dim if records else config.environment.d_x
    out = []
    for p in config.policies:
        if p.kind == "cb":
            pol = SpannerGreedy(p.epsilon, p.C, p.learning_rate, p.fit_intercept, p.n_components)
            out.append((p.name, pol.fit(actions.embeddings, context_dim)))
        else:
            pol = LLMPolicy(build_backend(p.backend, actions, records, p.prompt_style),
                            build_embedder(p.embedder), p.k, p.prompt_style, p.max_in_flight)
            out.append((p.name, pol.fit(actions)))
    return out


def build_strategy(cfg):
    if cfg.kind == "corral":
        return CorralStrategy(cfg.eta)
    rate = cfg.alpha if cfg.kind == "poly" else cfg.beta
    return DecaySchedule(ScheduleParams(cfg.kind, cfg.C, rate, cfg.p_min, cfg.p_max))


@dataclass
class RunResult:
    seed: int
    metrics: MetricsSeries
    records: list
    groups: tuple
    summary: dict = field(default_factory=dict)
    output_dir: Optional[Path] = None


def _summary(metrics, dm, names, status="ok", error=None):
    # untracked counterfactuals are NaN in the series but null in JSON
    s = {k: (None if isinstance(v, float) and v != v else v) for k, v in metrics.summary().items()}
    picks = np.bincount([r for r in metrics.extra.get("policy_index", [])], minlength=len(names))
    s["policy_counts"] = {n: int(c) for n, c in zip(names, picks)}
    s["budget"] = dm.budget_.limit if dm is not None else None
    s["status"] = status
    if error is not None:
        s["error"] = error
    return s


def _flush(out, metrics, summary, log_every):
    if out is None:
        return
    emit_csv(metrics, out / "metrics.csv", log_every)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")


def run_experiment(config: ExperimentConfig, seed: int, out_dir=None) -> RunResult:
    """One seed of the batched selection loop.

    Every interaction is kept (and written to ``interactions.jsonl`` when
    ``out_dir`` is given). If anything fails mid-run, the metrics gathered
    so far are flushed before the error propagates.
    """
    streams = RngStreams(seed)
    actions, records = build_environment(config.environment)
    policies = build_policies(config, actions, records)
    dm = DecisionMaker(policies, build_strategy(config.strategy), config.smoothing.kind,
                       config.smoothing.param, config.budget.limit, config.budget.mode).fit()
    names = [n for n, _ in policies]

    tracker = None
    if config.track_counterfactual:
        cb = next((p for p, g in zip(policies, dm.groups_) if g == CB), None)
        llm = next((p for p, g in zip(policies, dm.groups_) if g == LLM), None)
        if cb is not None:
            tracker = CounterfactualTracker(cb[1], llm[1] if (llm and config.counterfactual_llm) else None,
                                            shadow=True, rng=streams.get("counterfactual"))

    out = None
    if out_dir is not None:
        out = Path(out_dir) / f"seed-{seed}"
        out.mkdir(parents=True, exist_ok=True)
    log = open(out / "interactions.jsonl", "w", encoding="utf-8") if out is not None else None

    env = config.environment
    spec = EnvironmentSpec(env.horizon, env.batch_size, streams.integer("shuffle"), env.epochs, env.shuffle)
    done = []
    try:
        for batch in batches(records, spec):
            cf = tracker.evaluate(batch) if tracker is not None else None
            recs = dm.run_batch(batch, streams)
            if tracker is not None:
                tracker.annotate(recs, *cf)
                tracker.learn(batch, recs)
            done.extend(recs)
            if log is not None:
                log.writelines(json.dumps(r.to_dict()) + "\n" for r in recs)
    except Exception as e:
        metrics = _metrics(done, dm)
        _flush(out, metrics, _summary(metrics, dm, names, "failed", f"{type(e).__name__}: {e}"),
               config.log_every)
        raise
    finally:
        if log is not None:
            log.close()

    metrics = _metrics(done, dm)
    summary = _summary(metrics, dm, names)
    summary["seed"] = seed
    _flush(out, metrics, summary, config.log_every)
    return RunResult(seed, metrics, done, dm.groups_, summary, out)


def _metrics(records, dm):
    m = MetricsSeries.from_records(records, dm.groups_, dm.budget_.limit)
    m.extra["policy_index"] = [r.policy_index for r in records]
    return m


def _run_one(args):
    config, seed, out_dir = args
    return run_experiment(config, seed, out_dir)


def run_seeds(config: ExperimentConfig, seeds=None, out_dir=None, jobs=1) -> List[RunResult]:
    """Run several seeds (in worker processes when ``jobs > 1``) and aggregate."""
    seeds = list(config.seeds if seeds is None else seeds)
    out_dir = out_dir if out_dir is not None else config.output_dir
    tasks = [(config, s, out_dir) for s in seeds]
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    if out_dir is not None:
        out = Path(out_dir)
        config.dump(out / "config.json")
        write_aggregate([r.metrics.columns() for r in results], [r.summary for r in results], out)
    return results


def write_aggregate(columns, summaries, out_dir, csv_name="aggregate.csv", log_every=1):
    out_dir = Path(out_dir)
    agg = aggregate_seeds(columns)
    rows = np.arange(len(agg["step"]))
    if log_every > 1 and len(rows):
        rows = np.unique(np.append(rows[log_every - 1::log_every], len(rows) - 1))
    write_columns(agg, out_dir / csv_name, rows)
    summary = aggregate_summaries([_numeric(s) for s in summaries])
    (out_dir / "aggregate_summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return agg, summary


def _numeric(summary):
    return {k: v for k, v in summary.items()
            if isinstance(v, (int, float)) and not isinstance(v, bool) and k not in ("seed", "budget")}


def aggregate_dir(in_dir, out_file):
    """Aggregate every ``seed-*/metrics.csv`` below ``in_dir`` into ``out_file``."""
    in_dir = Path(in_dir)
    paths = sorted(in_dir.glob("seed-*/metrics.csv"))
    if not paths:
        raise FileNotFoundError(f"no seed-*/metrics.csv files under {in_dir}")
    runs = [read_csv(p) for p in paths]
    agg = aggregate_seeds(runs)
    write_columns(agg, out_file)
    summaries = []
    for p in paths:
        sp = p.parent / "summary.json"
        if sp.exists():
            summaries.append(_numeric(json.loads(sp.read_text(encoding="utf-8"))))
    return agg, aggregate_summaries(summaries)
