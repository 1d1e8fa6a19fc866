"""Append-only memo store for smeared integrals.

Each record is one JSON line ``{"k": key, "re": .., "im": .., "err": .., "crc": ..}``
where ``key`` is the SHA-256 of the canonical JSON of ``(operation, inputs)``
and ``crc`` is a CRC-32 over the other fields.  Floats are written with
``repr`` precision, so a warm run reads back exactly the values a cold run
computed.  A file that fails to parse or verify is moved aside and ignored
with a :class:`~wightrec.errors.CacheCorruptWarning`; the cache can make a
run faster but never changes its values.
"""
from __future__ import annotations

import fcntl
import hashlib
import json
import logging
import threading
import warnings
import zlib
from pathlib import Path

import numpy as np

from .errors import CacheCorruptWarning
from .freefield import SmearedValue

log = logging.getLogger(__name__)

CACHE_FILENAME = "integrals.cache.jsonl"


def _canonical(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return [_canonical(x) for x in obj.tolist()]
    if isinstance(obj, (tuple, set, frozenset)):
        return [_canonical(x) for x in (sorted(obj) if isinstance(obj, (set, frozenset)) else obj)]
    raise TypeError(f"cannot canonicalise {type(obj).__name__}")


def canonical_json(obj) -> str:
    """Sorted-key, whitespace-free JSON; the basis of every content hash."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_canonical, allow_nan=True)


def content_key(operation: str, inputs) -> str:
    return hashlib.sha256(canonical_json({"op": operation, "inputs": inputs}).encode()).hexdigest()


def _crc(key, re, im, err) -> int:
    return zlib.crc32(f"{key}|{re!r}|{im!r}|{err!r}".encode())


class IntegralCache:
    """Memo callable ``cache(op, inputs, compute) -> SmearedValue`` backed by ``directory``."""

    def __init__(self, directory: str | Path):
        self.path = Path(directory) / CACHE_FILENAME
        self._lock = threading.Lock()
        self._store: dict[str, SmearedValue] = {}
        self.hits = 0
        self.misses = 0
        self._load()

    def __len__(self):
        return len(self._store)

    def _load(self):
        if not self.path.exists():
            return
        store = {}
        try:
            with open(self.path, "r", encoding="utf-8") as fh:
                fcntl.flock(fh, fcntl.LOCK_SH)
                try:
                    lines = fh.read().splitlines()
                finally:
                    fcntl.flock(fh, fcntl.LOCK_UN)
            for n, line in enumerate(lines, 1):
                rec = json.loads(line)
                key, re, im, err = rec["k"], float(rec["re"]), float(rec["im"]), float(rec["err"])
                if rec["crc"] != _crc(key, re, im, err):
                    raise ValueError(f"checksum mismatch on line {n}")
                store[key] = SmearedValue(complex(re, im), err)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            aside = self.path.with_name(self.path.name + ".corrupt")
            warnings.warn(f"integral cache {self.path} is unreadable ({exc}); ignoring it and moving it to {aside.name}",
                          CacheCorruptWarning, stacklevel=3)
            try:
                self.path.replace(aside)
            except OSError:
                pass
            return
        self._store = store

    def _append(self, key, value: SmearedValue):
        v = complex(value.value)
        re, im, err = float(v.real), float(v.imag), float(value.error)
        line = json.dumps({"k": key, "re": re, "im": im, "err": err, "crc": _crc(key, re, im, err)}, sort_keys=True)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                fh.write(line + "\n")
                fh.flush()
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    def __call__(self, operation: str, inputs, compute) -> SmearedValue:
        key = content_key(operation, inputs)
        with self._lock:
            hit = self._store.get(key)
            if hit is not None:
                self.hits += 1
                return hit
        value = compute()
        value = SmearedValue(complex(value.value), float(value.error))
        with self._lock:
            if key not in self._store:
                self._store[key] = value
                self.misses += 1
                self._append(key, value)
            return self._store[key]
