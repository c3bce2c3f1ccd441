"""Contextual bandit environments with binary loss, JSON-lines datasets and batching."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .core import ActionSpace, Context
from .exceptions import ConfigurationError, DataError

SCHEMA = "v1"


@dataclass(frozen=True)
class DatasetRecord:
    context: Context
    correct_ids: frozenset

    def __post_init__(self):
        ids = frozenset(int(i) for i in self.correct_ids)
        if not ids:
            raise ConfigurationError(f"record {self.context.id} has no correct action")
        object.__setattr__(self, "correct_ids", ids)

    def __eq__(self, other):
        if not isinstance(other, DatasetRecord):
            return NotImplemented
        c, o = self.context, other.context
        return (c.id == o.id and c.text == o.text and self.correct_ids == other.correct_ids
                and np.array_equal(c.embedding, o.embedding))

    __hash__ = None


def step(record: DatasetRecord, action_id: int) -> float:
    """Binary loss: 0 for any correct action, 1 otherwise."""
    return 0.0 if int(action_id) in record.correct_ids else 1.0


@dataclass(frozen=True)
class EnvironmentSpec:
    horizon: int
    batch_size: int = 32
    seed: int = 0
    epochs: int = 1
    shuffle: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.horizon < 0 or self.epochs < 1:
            raise ConfigurationError("horizon must be >= 0 and epochs >= 1")


def batches(records: Sequence[DatasetRecord], spec: EnvironmentSpec) -> Iterator[List[DatasetRecord]]:
    """Shuffle deterministically per epoch, then cut into ``batch_size`` chunks up to the horizon."""
    n = len(records)
    if spec.horizon > n * spec.epochs:
        raise ConfigurationError(
            f"horizon {spec.horizon} exceeds {n} records x {spec.epochs} epoch(s)"
        )
    rng = np.random.default_rng(spec.seed)
    order = []
    for _ in range(math.ceil(spec.horizon / n) if n else 0):
        order.extend(rng.permutation(n) if spec.shuffle else range(n))
    order = order[: spec.horizon]
    for start in range(0, len(order), spec.batch_size):
        yield [records[i] for i in order[start:start + spec.batch_size]]


def _unit_rows(M):
    return M / np.linalg.norm(M, axis=-1, keepdims=True)


def make_synthetic(n_records, d_x=16, d_a=16, n_actions=50, seed=0, action_embeddings=None,
                   hidden=None) -> Tuple[ActionSpace, List[DatasetRecord]]:
    """Realizable environment: correct action = argmax_a <phi(a), W* phi(x)>.

    ``W*`` (``d_a x d_x``) has unit-norm rows; actions and contexts are
    uniform on their unit spheres unless ``action_embeddings`` / ``hidden``
    are given. Deterministic in ``seed``.
    """
    if min(d_x, d_a, n_actions) < 1:
        raise ConfigurationError("dimensions and n_actions must be >= 1")
    rng = np.random.default_rng(seed)
    W = _unit_rows(rng.standard_normal((d_a, d_x))) if hidden is None else np.asarray(hidden, float)
    if action_embeddings is None:
        A = _unit_rows(rng.standard_normal((n_actions, d_a)))
    else:
        A = np.asarray(action_embeddings, dtype=float)
        if A.shape != (n_actions, d_a):
            raise ConfigurationError(f"action_embeddings must have shape {(n_actions, d_a)}")
    X = _unit_rows(rng.standard_normal((n_records, d_x)))
    correct = np.argmax(X @ W.T @ A.T, axis=1) if n_records else np.zeros(0, int)
    actions = ActionSpace([f"action-{i}" for i in range(n_actions)], A)
    records = [
        DatasetRecord(Context(i, f"context-{i}", X[i]), frozenset([int(correct[i])]))
        for i in range(n_records)
    ]
    return actions, records


def _floats(values):
    return [float(v) for v in values]


def write_actions(path, actions: ActionSpace):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema": SCHEMA, "dim": actions.dim}) + "\n")
        for a in actions:
            fh.write(json.dumps({"id": a.id, "text": a.text, "embedding": _floats(a.embedding)}) + "\n")


def write_records(path, records: Sequence[DatasetRecord], dim: Optional[int] = None):
    if dim is None:
        dim = records[0].context.dim if records else 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema": SCHEMA, "dim": dim}) + "\n")
        for r in records:
            c = r.context
            fh.write(json.dumps({"id": c.id, "text": c.text, "embedding": _floats(c.embedding),
                                 "correct_ids": sorted(r.correct_ids)}) + "\n")


def _read_jsonl(path, required, allow_empty=False):
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        if allow_empty:
            return None, []
        raise DataError("missing header line", path, 1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise DataError(f"malformed header: {e}", path, 1) from None
    if not isinstance(header, dict) or header.get("schema") != SCHEMA or not isinstance(header.get("dim"), int):
        raise DataError(f'header must be {{"schema": "{SCHEMA}", "dim": <int>}}', path, 1)
    dim = header["dim"]
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataError(f"malformed JSON: {e}", path, lineno) from None
        if not isinstance(obj, dict):
            raise DataError("entry must be a JSON object", path, lineno)
        missing = [k for k in required if k not in obj]
        if missing:
            raise DataError(f"missing field(s) {missing}", path, lineno)
        emb = obj["embedding"]
        if not isinstance(emb, list) or len(emb) != dim:
            raise DataError(f"embedding must be a list of {dim} numbers", path, lineno)
        try:
            emb = np.array(emb, dtype=float)
        except (TypeError, ValueError):
            raise DataError("embedding contains non-numeric values", path, lineno) from None
        if not np.all(np.isfinite(emb)):
            raise DataError("embedding contains non-finite values", path, lineno)
        obj["embedding"] = emb
        rows.append((lineno, obj))
    return dim, rows


def load_actions(path) -> ActionSpace:
    dim, rows = _read_jsonl(path, ("id", "text", "embedding"))
    for expected, (lineno, obj) in enumerate(rows):
        if obj["id"] != expected:
            raise DataError(f"action ids must be 0..n-1 in order; expected {expected}, got {obj['id']}",
                            path, lineno)
    if len(rows) < 2:
        raise DataError(f"action space needs at least 2 actions, found {len(rows)}", path)
    return ActionSpace([o["text"] for _, o in rows], np.array([o["embedding"] for _, o in rows]).reshape(-1, dim))


def load_records(path, n_actions: int) -> List[DatasetRecord]:
    _, rows = _read_jsonl(path, ("id", "text", "embedding", "correct_ids"), allow_empty=True)
    records, seen = [], set()
    for lineno, obj in rows:
        cid = obj["id"]
        if not isinstance(cid, int) or cid in seen:
            raise DataError(f"context id {cid!r} must be a unique integer", path, lineno)
        seen.add(cid)
        ids = obj["correct_ids"]
        if not isinstance(ids, list) or not ids or not all(isinstance(i, int) for i in ids):
            raise DataError("correct_ids must be a non-empty list of integers", path, lineno)
        bad = [i for i in ids if not 0 <= i < n_actions]
        if bad:
            raise DataError(f"unknown action id(s) {bad}; action space has {n_actions}", path, lineno)
        records.append(DatasetRecord(Context(cid, str(obj["text"]), obj["embedding"]), frozenset(ids)))
    return records


def load_dataset(records_path, actions_path) -> Tuple[ActionSpace, List[DatasetRecord]]:
    actions = load_actions(actions_path)
    return actions, load_records(records_path, len(actions))
