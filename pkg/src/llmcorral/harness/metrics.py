"""Per-step metric series, seed aggregation and CSV round-tripping."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..core import LLM, InteractionRecord

CSV_COLUMNS = ["step", "avg_reward", "p_cb", "llm_calls_cum", "cf_cb_reward", "cf_shadow_reward"]
INT_COLUMNS = {"step", "llm_calls_cum"}


def running_mean(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return x.copy()
    return np.cumsum(x) / np.arange(1, x.size + 1)


@dataclass
class MetricsSeries:
    """Aligned per-step arrays for one run.

    ``cf_*`` columns hold running averages of counterfactual rewards and
    are NaN when that tracking was off.
    """

    reward: np.ndarray
    p_cb: np.ndarray
    llm_calls_cum: np.ndarray
    cf_cb: np.ndarray = None
    cf_shadow: np.ndarray = None
    cf_llm: np.ndarray = None
    budget: Optional[int] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.reward)
        nan = np.full(n, np.nan)
        self.reward = np.asarray(self.reward, dtype=float)
        self.p_cb = np.asarray(self.p_cb, dtype=float)
        self.llm_calls_cum = np.asarray(self.llm_calls_cum, dtype=np.int64)
        self.cf_cb = nan.copy() if self.cf_cb is None else np.asarray(self.cf_cb, dtype=float)
        self.cf_shadow = nan.copy() if self.cf_shadow is None else np.asarray(self.cf_shadow, dtype=float)
        self.cf_llm = nan.copy() if self.cf_llm is None else np.asarray(self.cf_llm, dtype=float)

    @classmethod
    def from_records(cls, records: Sequence[InteractionRecord], groups, budget=None):
        """Build from interaction records; ``groups`` tags each policy index."""
        reward = np.array([r.reward for r in records], dtype=float)
        cb = np.array([g != LLM for g in groups], dtype=bool)
        p_cb = np.array([float(np.asarray(r.dist_snapshot)[cb].sum()) for r in records], dtype=float)
        calls = np.cumsum([r.group == LLM for r in records]).astype(np.int64)

        def cf(attr):
            vals = [getattr(r, attr) for r in records]
            if not vals or any(v is None for v in vals):
                return None
            return running_mean(vals)

        return cls(reward, p_cb, calls, cf("cf_cb_reward"), cf("cf_shadow_reward"), cf("cf_llm_reward"),
                   budget=budget)

    def __len__(self):
        return len(self.reward)

    @property
    def steps(self):
        return np.arange(1, len(self) + 1)

    @property
    def avg_reward(self):
        return running_mean(self.reward)

    def summary(self) -> Dict[str, float]:
        T = len(self)
        if T == 0:
            return {"horizon": 0, "avg_reward": 0.0, "regret": 0.0, "llm_calls": 0, "llm_call_fraction": 0.0,
                    "final_p_cb": 0.0, "cf_cb_reward": 0.0, "cf_shadow_reward": 0.0, "cf_llm_reward": 0.0}
        return {
            "horizon": T,
            "avg_reward": float(self.reward.mean()),
            # the optimal policy has zero loss in every shipped environment
            "regret": float(np.sum(1.0 - self.reward)),
            "llm_calls": int(self.llm_calls_cum[-1]),
            "llm_call_fraction": float(self.llm_calls_cum[-1] / T),
            "final_p_cb": float(self.p_cb[-1]),
            "cf_cb_reward": float(self.cf_cb[-1]),
            "cf_shadow_reward": float(self.cf_shadow[-1]),
            "cf_llm_reward": float(self.cf_llm[-1]),
        }

    def columns(self) -> Dict[str, np.ndarray]:
        return {
            "step": self.steps,
            "avg_reward": self.avg_reward,
            "p_cb": self.p_cb,
            "llm_calls_cum": self.llm_calls_cum,
            "cf_cb_reward": self.cf_cb,
            "cf_shadow_reward": self.cf_shadow,
        }


def logged_rows(n, every=1):
    """Indices written to disk: every ``every``-th step plus the last one."""
    if n == 0:
        return np.zeros(0, dtype=int)
    idx = np.arange(every - 1, n, every)
    if idx.size == 0 or idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    return idx


def _fmt(name, v):
    if name in INT_COLUMNS:
        return str(int(v))
    v = float(v)
    # repr round-trips exactly and never uses a locale decimal comma
    return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))


def write_columns(columns: Dict[str, Sequence], path, rows=None):
    path = Path(path)
    names = list(columns)
    n = len(next(iter(columns.values()))) if columns else 0
    rows = np.arange(n) if rows is None else rows
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for i in rows:
                w.writerow([_fmt(c, columns[c][i]) for c in names])
    except OSError as e:
        raise OSError(f"cannot write metrics to {path}: {e}") from e
    return path


def emit_csv(series, path, log_every=1):
    """Write a ``MetricsSeries`` (or a column dict) as CSV."""
    if isinstance(series, MetricsSeries):
        cols = series.columns()
        return write_columns(cols, path, logged_rows(len(series), log_every))
    return write_columns(series, path)


def read_csv(path) -> Dict[str, np.ndarray]:
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise OSError(f"cannot read metrics from {path}: {e}") from e
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(header):
        if name in INT_COLUMNS:
            out[name] = np.array([int(r[j]) for r in body], dtype=np.int64)
        else:
            out[name] = np.array([float(r[j]) for r in body], dtype=float)
    return out


def aggregate_seeds(runs: Sequence[Dict[str, np.ndarray]], key="step") -> Dict[str, np.ndarray]:
    """Per-step mean and standard error of the mean across seeds.

    Each run is a column dict (e.g. from ``read_csv`` or
    ``MetricsSeries.columns()``). Returns ``step`` plus ``<col>_mean`` and
    ``<col>_sem`` for every other column; sem uses the sample standard
    deviation and is 0 for a single seed.
    """
    if not runs:
        raise ValueError("need at least one run to aggregate")
    lengths = {len(r[key]) for r in runs}
    if len(lengths) != 1:
        raise ValueError(f"runs have different lengths: {sorted(lengths)}")
    steps = np.asarray(runs[0][key])
    for r in runs[1:]:
        if not np.array_equal(np.asarray(r[key]), steps):
            raise ValueError("runs are logged at different steps")
    n = len(runs)
    out = {key: steps}
    for col in runs[0]:
        if col == key:
            continue
        M = np.vstack([np.asarray(r[col], dtype=float) for r in runs])
        out[f"{col}_mean"] = M.mean(axis=0)
        out[f"{col}_sem"] = M.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(M.shape[1])
    return out


def aggregate_summaries(summaries: List[Dict[str, float]]) -> Dict[str, object]:
    """Mean and sem of every summary field, plus the per-seed values."""
    out = {"n_seeds": len(summaries)}
    if not summaries:
        return out
    n = len(summaries)
    for k in [k for k in summaries[0] if all(k in s for s in summaries)]:
        vals = np.array([s[k] for s in summaries], dtype=float)
        out[k] = {
            "mean": float(vals.mean()),
            "sem": float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
            "per_seed": vals.tolist(),
        }
    return out
