"""Seeding, hashing and serialization helpers."""

from __future__ import annotations

import hashlib
import json
from typing import Any

import numpy as np

_STREAMS = {"split": 1, "subsample": 2, "lowpass": 3, "synthetic": 4}


def derive_seed(seed: int, stream: str) -> np.random.SeedSequence:
    """Independent named sub-stream of a top-level seed."""
    return np.random.SeedSequence([int(seed), _STREAMS[stream]])


def make_rng(seed: int, stream: str | None = None) -> np.random.Generator:
    if stream is None:
        return np.random.default_rng(int(seed))
    return np.random.default_rng(derive_seed(seed, stream))


def stable_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_default)


def short_hash(obj: Any) -> str:
    return hashlib.sha256(stable_json(obj).encode("utf-8")).hexdigest()[:16]


def _default(o: Any) -> Any:
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
