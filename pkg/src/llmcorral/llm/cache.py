"""Append-only JSON-lines cache of generator outputs, keyed by content hash."""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from pathlib import Path
from typing import Optional

from .types import GeneratorOutput

logger = logging.getLogger(__name__)


def cache_key(backend_id: str, prompt: str, k: int) -> str:
    payload = json.dumps([backend_id, int(k), prompt], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ResponseCache:
    """In-memory map mirrored to an optional JSON-lines file.

    Lines are ``{key_hash, prompt, k, entries}``. Unreadable lines are
    skipped with a warning, so a corrupt entry behaves as a miss. Reads are
    lock-free; writes are serialized.
    """

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self._data = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self):
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    out = GeneratorOutput([(str(t), float(q)) for t, q in obj["entries"]])
                    key = obj["key_hash"]
                    if not isinstance(key, str):
                        raise TypeError("key_hash must be a string")
                except (ValueError, KeyError, TypeError) as e:
                    logger.warning("%s:%d: ignoring corrupt cache entry (%s)", self.path, lineno, e)
                    continue
                self._data[key] = out

    def __len__(self):
        return len(self._data)

    def __contains__(self, key):
        return key in self._data

    def lookup(self, key: str) -> Optional[GeneratorOutput]:
        return self._data.get(key)

    def store(self, key: str, prompt: str, k: int, output: GeneratorOutput):
        with self._lock:
            self._data[key] = output
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                line = json.dumps({"key_hash": key, "prompt": prompt, "k": int(k),
                                   "entries": [[t, q] for t, q in output.entries]}, ensure_ascii=False)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
