"""
Instances of the promise problem over subspace pairs.

An instance at size n (a multiple of 4) is a pair (A, B) with B inside the
dual of A. YES instances have dim A = dim B = n/2, which forces B = dual(A).
The two NO shapes swap which subspace is the small one (n/4).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from typing import Any

from src.core.errors import DimensionMismatchError, PreconditionError
from src.gf2.linear import (
    SeedLike,
    Subspace,
    dual,
    from_json,
    is_subspace_of,
    make_rng,
    sample_subspace,
    sample_subspace_of,
    to_json,
)


class InstanceKind(str, Enum):
    YES = "YES"
    NO_AB = "NO_AB"
    NO_BA = "NO_BA"

    def dims(self, n: int) -> tuple[int, int]:
        """(dim A, dim B) at size n."""
        half, quarter = n // 2, n // 4
        return {
            InstanceKind.YES: (half, half),
            InstanceKind.NO_AB: (half, quarter),
            InstanceKind.NO_BA: (quarter, half),
        }[self]


@dataclass(frozen=True)
class Instance:
    n: int
    A: Subspace
    B: Subspace
    kind: InstanceKind

    def __post_init__(self) -> None:
        if self.n <= 0 or self.n % 4:
            raise PreconditionError(f"instance size must be a positive multiple of 4, got {self.n}")
        if self.A.ambient_dim != self.n or self.B.ambient_dim != self.n:
            raise DimensionMismatchError(f"instance subspaces must live in F_2^{self.n}")
        expected = self.kind.dims(self.n)
        if (self.A.dim, self.B.dim) != expected:
            raise PreconditionError(
                f"{self.kind.value} at n={self.n} needs dims {expected}, got {(self.A.dim, self.B.dim)}"
            )
        if not is_subspace_of(self.B, dual(self.A)):
            raise PreconditionError("B is not contained in the dual of A")

    @property
    def is_yes(self) -> bool:
        return self.kind is InstanceKind.YES

    @property
    def instance_id(self) -> str:
        canonical = json.dumps(instance_to_json(self), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def make_instance(n: int, kind: InstanceKind | str, seed: SeedLike = None) -> Instance:
    """Sample A uniformly, then B uniformly inside dual(A) with the kind's dimensions."""
    kind = InstanceKind(kind)
    if n <= 0 or n % 4:
        raise PreconditionError(f"instance size must be a positive multiple of 4, got {n}")
    rng = make_rng(seed)
    dim_a, dim_b = kind.dims(n)
    a = sample_subspace(n, dim_a, rng)
    b = sample_subspace_of(dual(a), dim_b, rng)
    return Instance(n, a, b, kind)


def generator_G(n: int, seed: SeedLike = None) -> Instance | None:
    """YES instance with uniform A and B = dual(A); None when n is not a multiple of 4."""
    if n <= 0 or n % 4:
        return None
    return make_instance(n, InstanceKind.YES, seed)


def instance_to_json(inst: Instance) -> dict[str, Any]:
    return {"n": inst.n, "kind": inst.kind.value, "A": to_json(inst.A), "B": to_json(inst.B)}


def instance_from_json(payload: dict[str, Any] | str) -> Instance:
    data = json.loads(payload) if isinstance(payload, str) else payload
    return Instance(
        n=int(data["n"]),
        A=from_json(data["A"]),
        B=from_json(data["B"]),
        kind=InstanceKind(data["kind"]),
    )
