"""
Seed hierarchy.

Every grid point and every Monte-Carlo chunk draws from its own
SeedSequence, derived from the master seed and a canonical string key, so the
numbers a unit sees do not depend on enumeration order or on --jobs.
"""

from __future__ import annotations

import hashlib
from typing import Any, Mapping

import numpy as np


def canonical_key(params: Mapping[str, Any]) -> str:
    """'a=1|b=x|...' with keys sorted."""
    return "|".join(f"{name}={_format(value)}" for name, value in sorted(params.items()))


def _format(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    if isinstance(value, (list, tuple)):
        return ",".join(_format(v) for v in value)
    return str(value)


def child_seed(master: int, key: str) -> np.random.SeedSequence:
    digest = hashlib.sha256(key.encode("utf-8")).hexdigest()
    return np.random.SeedSequence(entropy=master, spawn_key=(int(digest[:8], 16),))


def child_rng(master: int, key: str) -> np.random.Generator:
    return np.random.default_rng(child_seed(master, key))


def child_int(master: int, key: str) -> int:
    """A 32-bit integer seed, for APIs that want a plain int."""
    return int(child_seed(master, key).generate_state(1)[0])
