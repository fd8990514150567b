"""
Exact linear algebra over F_2.

- BitVector: an element of F_2^n, bits packed into one int (coordinate i = bit i)
- Subspace: a span in canonical reduced row-echelon form, so equal subspaces
  compare equal bit-for-bit
- canonicalize / member / dual / rank
- uniform sampling of subspaces (whole space or inside a parent subspace)
- enumeration of members as packed ints or BitVectors
- JSON round trip {"n": int, "basis": [little-endian bitstrings]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from src.core.config import get_settings
from src.core.errors import CapExceededError, DimensionMismatchError, PreconditionError

MAX_AMBIENT_DIM = 64

SeedLike = int | np.random.SeedSequence | np.random.Generator | None


def make_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _check_ambient(n: int) -> None:
    if not 0 < n <= MAX_AMBIENT_DIM:
        raise PreconditionError(f"ambient dimension must be in [1, {MAX_AMBIENT_DIM}], got {n}")


@dataclass(frozen=True)
class BitVector:
    """An element of F_2^n. Bit i of `bits` is coordinate i."""

    bits: int
    n: int

    def __post_init__(self) -> None:
        _check_ambient(self.n)
        if not 0 <= self.bits < (1 << self.n):
            raise DimensionMismatchError(f"bits {self.bits:#x} do not fit in {self.n} coordinates")

    @classmethod
    def from_bits(cls, values: Sequence[int]) -> "BitVector":
        packed = 0
        for i, value in enumerate(values):
            if value not in (0, 1):
                raise PreconditionError(f"coordinate {i} is not binary: {value!r}")
            packed |= value << i
        return cls(packed, len(values))

    @classmethod
    def from_string(cls, text: str) -> "BitVector":
        """Parse a little-endian bitstring: character i is coordinate i."""
        return cls.from_bits([int(ch) for ch in text])

    @classmethod
    def zero(cls, n: int) -> "BitVector":
        return cls(0, n)

    def to_bits(self) -> tuple[int, ...]:
        return tuple((self.bits >> i) & 1 for i in range(self.n))

    def to_string(self) -> str:
        return "".join(str(b) for b in self.to_bits())

    def is_zero(self) -> bool:
        return self.bits == 0

    def dot(self, other: "BitVector") -> int:
        if other.n != self.n:
            raise DimensionMismatchError(f"dot of F_2^{self.n} and F_2^{other.n}")
        return (self.bits & other.bits).bit_count() & 1

    def __xor__(self, other: "BitVector") -> "BitVector":
        if other.n != self.n:
            raise DimensionMismatchError(f"sum of F_2^{self.n} and F_2^{other.n}")
        return BitVector(self.bits ^ other.bits, self.n)

    def __repr__(self) -> str:
        return f"BitVector({self.to_string()!r})"


def _pivot(row: int) -> int:
    return (row & -row).bit_length() - 1


@dataclass(frozen=True)
class Subspace:
    """
    A linear subspace of F_2^n.

    `basis` holds packed rows in canonical RREF: the pivot of a row is its lowest
    set bit, every pivot column is zero in all other rows, and rows are sorted by
    pivot. Build instances through `canonicalize` or the samplers.
    """

    ambient_dim: int
    basis: tuple[int, ...]

    def __post_init__(self) -> None:
        _check_ambient(self.ambient_dim)

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def pivots(self) -> tuple[int, ...]:
        return tuple(_pivot(row) for row in self.basis)

    def basis_vectors(self) -> list[BitVector]:
        return [BitVector(row, self.ambient_dim) for row in self.basis]

    def __contains__(self, x: BitVector) -> bool:
        return member(self, x)

    def __repr__(self) -> str:
        rows = ", ".join(BitVector(r, self.ambient_dim).to_string() for r in self.basis)
        return f"Subspace(n={self.ambient_dim}, basis=[{rows}])"


def _reduce_rows(rows: Iterable[int], n: int) -> tuple[int, ...]:
    """Gaussian elimination column by column, low coordinate first."""
    pending = [r for r in rows if r]
    reduced: list[int] = []
    for column in range(n):
        bit = 1 << column
        pick = next((i for i, r in enumerate(pending) if r & bit), None)
        if pick is None:
            continue
        pivot_row = pending.pop(pick)
        pending = [r ^ pivot_row if r & bit else r for r in pending]
        reduced = [r ^ pivot_row if r & bit else r for r in reduced]
        reduced.append(pivot_row)
        pending = [r for r in pending if r]
        if not pending:
            break
    return tuple(sorted(reduced, key=_pivot))


def canonicalize(
    vectors: Iterable[BitVector],
    ambient_dim: int | None = None,
) -> Subspace:
    """Return the span of `vectors` in canonical RREF."""
    vectors = list(vectors)
    dims = {v.n for v in vectors}
    if ambient_dim is not None:
        dims.add(ambient_dim)
    if len(dims) > 1:
        raise DimensionMismatchError(f"vectors span mixed ambient dimensions {sorted(dims)}")
    if not dims:
        raise PreconditionError("ambient_dim is required to canonicalize an empty list")
    n = dims.pop()
    return Subspace(n, _reduce_rows((v.bits for v in vectors), n))


def span_rows(rows: Iterable[int], n: int) -> Subspace:
    """canonicalize for packed ints that are known to fit in n bits."""
    return Subspace(n, _reduce_rows(rows, n))


def zero_subspace(n: int) -> Subspace:
    return Subspace(n, ())


def full_space(n: int) -> Subspace:
    return Subspace(n, tuple(1 << i for i in range(n)))


def rank(vectors: Iterable[BitVector], ambient_dim: int | None = None) -> int:
    return canonicalize(vectors, ambient_dim).dim


def _residue(s: Subspace, bits: int) -> int:
    for row in s.basis:
        if bits & (row & -row):
            bits ^= row
    return bits


def member(s: Subspace, x: BitVector) -> bool:
    """True iff x lies in the span of s."""
    if x.n != s.ambient_dim:
        raise DimensionMismatchError(f"x in F_2^{x.n} tested against subspace of F_2^{s.ambient_dim}")
    return _residue(s, x.bits) == 0


def is_subspace_of(inner: Subspace, outer: Subspace) -> bool:
    if inner.ambient_dim != outer.ambient_dim:
        raise DimensionMismatchError(
            f"subspaces of F_2^{inner.ambient_dim} and F_2^{outer.ambient_dim}"
        )
    return all(_residue(outer, row) == 0 for row in inner.basis)


def dual(s: Subspace) -> Subspace:
    """{y : x.y = 0 for every x in s}."""
    n = s.ambient_dim
    pivots = s.pivots
    pivot_set = set(pivots)
    rows = []
    for free in range(n):
        if free in pivot_set:
            continue
        y = 1 << free
        for row, p in zip(s.basis, pivots):
            if row >> free & 1:
                y |= 1 << p
        rows.append(y)
    return span_rows(rows, n)


def gaussian_binomial(n: int, k: int) -> int:
    """Number of k-dimensional subspaces of F_2^n."""
    if not 0 <= k <= n:
        return 0
    numerator = 1
    denominator = 1
    for i in range(k):
        numerator *= (1 << (n - i)) - 1
        denominator *= (1 << (k - i)) - 1
    return numerator // denominator


def _pack_rows(matrix: np.ndarray) -> list[int]:
    weights = [1 << i for i in range(matrix.shape[1])]
    return [sum(w for w, b in zip(weights, row) if b) for row in matrix.tolist()]


def sample_subspace(n: int, d: int, seed: SeedLike = None) -> Subspace:
    """
    Uniform d-dimensional subspace of F_2^n.

    Draws d x n matrices until one has rank d; the row space of a uniform
    full-rank matrix is uniform over subspaces.
    """
    _check_ambient(n)
    if not 0 <= d <= n:
        raise PreconditionError(f"cannot sample a {d}-dimensional subspace of F_2^{n}")
    rng = make_rng(seed)
    if d == 0:
        return zero_subspace(n)
    while True:
        matrix = rng.integers(0, 2, size=(d, n), dtype=np.uint8)
        s = span_rows(_pack_rows(matrix), n)
        if s.dim == d:
            return s


def sample_subspace_of(parent: Subspace, d: int, seed: SeedLike = None) -> Subspace:
    """Uniform d-dimensional subspace contained in `parent`."""
    if not 0 <= d <= parent.dim:
        raise PreconditionError(f"cannot sample dim {d} inside a dim-{parent.dim} subspace")
    if d == parent.dim:
        return parent
    rng = make_rng(seed)
    if d == 0:
        return zero_subspace(parent.ambient_dim)
    while True:
        coefficients = rng.integers(0, 2, size=(d, parent.dim), dtype=np.uint8)
        rows = []
        for coeff_row in coefficients.tolist():
            value = 0
            for c, basis_row in zip(coeff_row, parent.basis):
                if c:
                    value ^= basis_row
            rows.append(value)
        s = span_rows(rows, parent.ambient_dim)
        if s.dim == d:
            return s


def random_vector(n: int, seed: SeedLike = None) -> BitVector:
    rng = make_rng(seed)
    bits = rng.integers(0, 2, size=n, dtype=np.uint8)
    return BitVector.from_bits(bits.tolist())


def _check_enumeration_cap(s: Subspace, cap_dim: int | None) -> None:
    limit = get_settings().enumeration_cap_dim if cap_dim is None else cap_dim
    if s.dim > limit:
        raise CapExceededError("enumeration dimension", s.dim, limit)


def member_indices(s: Subspace, cap_dim: int | None = None) -> np.ndarray:
    """All 2^dim members as packed ints (uint64), zero first."""
    _check_enumeration_cap(s, cap_dim)
    members = np.zeros(1, dtype=np.uint64)
    for row in s.basis:
        members = np.concatenate([members, members ^ np.uint64(row)])
    return members


def membership_mask(s: Subspace, cap_dim: int | None = None) -> np.ndarray:
    """Boolean mask of length 2^n marking members; n is bounded by the statevector cap."""
    limit = get_settings().statevector_cap_qubits
    if s.ambient_dim > limit:
        raise CapExceededError("membership mask qubits", s.ambient_dim, limit)
    mask = np.zeros(1 << s.ambient_dim, dtype=bool)
    mask[member_indices(s, cap_dim)] = True
    return mask


def enumerate_members(s: Subspace, cap_dim: int | None = None) -> list[BitVector]:
    return [BitVector(int(i), s.ambient_dim) for i in member_indices(s, cap_dim)]


def to_json(s: Subspace) -> dict[str, Any]:
    return {
        "n": s.ambient_dim,
        "basis": [BitVector(row, s.ambient_dim).to_string() for row in s.basis],
    }


def from_json(payload: dict[str, Any] | str) -> Subspace:
    """Parse the JSON form; the basis must already be canonical."""
    data = json.loads(payload) if isinstance(payload, str) else payload
    n = int(data["n"])
    vectors = [BitVector.from_string(text) for text in data["basis"]]
    if any(v.n != n for v in vectors):
        raise DimensionMismatchError(f"basis rows do not all have length {n}")
    s = canonicalize(vectors, n)
    if s.basis != tuple(v.bits for v in vectors):
        raise PreconditionError("subspace JSON basis is not in canonical form")
    return s
