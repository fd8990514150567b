"""
Exact pure-state simulation over n qubits.

Index convention: the amplitude at index i belongs to the basis state whose
qubit j is bit j of i. Packed BitVectors index amplitudes directly. In a tensor
product the first factor occupies the low qubits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from src.core.config import get_settings
from src.core.errors import CapExceededError, DimensionMismatchError, PreconditionError
from src.gf2.linear import Subspace, member_indices

NORM_TOLERANCE = 1e-9


def check_qubit_cap(n_qubits: int, *, joint: bool = False) -> None:
    settings = get_settings()
    limit = settings.joint_cap_qubits if joint else settings.statevector_cap_qubits
    if n_qubits > limit:
        raise CapExceededError("joint qubits" if joint else "statevector qubits", n_qubits, limit)


def n_qubits_of(length: int) -> int:
    n = length.bit_length() - 1
    if length <= 0 or 1 << n != length:
        raise DimensionMismatchError(f"amplitude length {length} is not a power of two")
    return n


@dataclass(frozen=True, eq=False)
class PureState:
    """A normalized amplitude vector. The array is stored read-only."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.shape[0] != 1 << self.n_qubits:
            raise DimensionMismatchError(
                f"{amps.shape[0]} amplitudes cannot describe {self.n_qubits} qubits"
            )
        norm_sq = float(np.vdot(amps, amps).real)
        if abs(norm_sq - 1.0) > NORM_TOLERANCE:
            raise PreconditionError(f"state is not normalized: |psi|^2 = {norm_sq:.12g}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes: Iterable[complex], normalize: bool = False) -> "PureState":
        amps = np.asarray(list(amplitudes) if not isinstance(amplitudes, np.ndarray) else amplitudes,
                          dtype=np.complex128).reshape(-1)
        if normalize:
            norm = np.linalg.norm(amps)
            if norm == 0:
                raise PreconditionError("cannot normalize the zero vector")
            amps = amps / norm
        return cls(n_qubits_of(amps.shape[0]), amps)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def inner(self, other: "PureState") -> complex:
        """<self|other>."""
        if other.n_qubits != self.n_qubits:
            raise DimensionMismatchError(f"inner product of {self.n_qubits} and {other.n_qubits} qubits")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "PureState") -> float:
        return abs(self.inner(other)) ** 2

    def tensor(self, other: "PureState") -> "PureState":
        """self on the low qubits, other on the high qubits."""
        return tensor_states([self, other])

    def with_phase(self, phase: float) -> "PureState":
        return PureState(self.n_qubits, self.amplitudes * np.exp(1j * phase))

    def allclose(self, other: "PureState", atol: float = NORM_TOLERANCE) -> bool:
        return other.n_qubits == self.n_qubits and bool(
            np.allclose(self.amplitudes, other.amplitudes, atol=atol, rtol=0.0)
        )

    def to_json(self) -> str:
        """Debug dump: list of [re, im] pairs in basis order."""
        return json.dumps([[float(a.real), float(a.imag)] for a in self.amplitudes])

    @classmethod
    def from_json(cls, text: str) -> "PureState":
        pairs = json.loads(text)
        return cls.from_amplitudes([complex(re, im) for re, im in pairs])


def basis_state(n_qubits: int, index: int) -> PureState:
    check_qubit_cap(n_qubits)
    if not 0 <= index < 1 << n_qubits:
        raise DimensionMismatchError(f"basis index {index} out of range for {n_qubits} qubits")
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[index] = 1.0
    return PureState(n_qubits, amps)


def zero_state(n_qubits: int) -> PureState:
    return basis_state(n_qubits, 0)


def random_state(n_qubits: int, rng: np.random.Generator) -> PureState:
    """Haar-random pure state."""
    check_qubit_cap(n_qubits)
    dim = 1 << n_qubits
    amps = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return PureState.from_amplitudes(amps, normalize=True)


def subspace_state(s: Subspace) -> PureState:
    """Uniform superposition over the members of s, amplitude 2^{-dim/2}."""
    check_qubit_cap(s.ambient_dim)
    amps = np.zeros(1 << s.ambient_dim, dtype=np.complex128)
    amps[member_indices(s)] = 2.0 ** (-s.dim / 2)
    return PureState(s.ambient_dim, amps)


def walsh_hadamard(array: np.ndarray, n_qubits: int | None = None) -> np.ndarray:
    """
    H on each of the low `n_qubits` qubits of the last axis, 2^{-n/2} normalized.

    Leading axes are treated as a batch. With `n_qubits` smaller than the qubit
    count of the last axis, the higher qubits are left alone.
    """
    data = np.asarray(array, dtype=np.complex128)
    width = data.shape[-1]
    total = n_qubits_of(width)
    n = total if n_qubits is None else n_qubits
    if n > total:
        raise DimensionMismatchError(f"cannot transform {n} qubits of a {total}-qubit axis")
    batch = data.shape[:-1]
    out = data.reshape(batch + (width,)).copy()
    for q in range(n):
        view = out.reshape(batch + (-1, 2, 1 << q))
        low = view[..., 0, :].copy()
        high = view[..., 1, :]
        view[..., 0, :] = low + high
        view[..., 1, :] = low - high
    return out * 2.0 ** (-n / 2)


def hadamard_all(psi: PureState) -> PureState:
    """Global H on every qubit. An involution."""
    return PureState(psi.n_qubits, walsh_hadamard(psi.amplitudes))


def tensor_states(states: Sequence[PureState]) -> PureState:
    """Tensor product with states[0] on the lowest qubits."""
    if not states:
        raise PreconditionError("tensor of no states")
    total = sum(s.n_qubits for s in states)
    check_qubit_cap(total, joint=True)
    amps = np.ones(1, dtype=np.complex128)
    for s in states:
        amps = np.kron(s.amplitudes, amps)
    return PureState(total, amps)


def swap_test_probability(phi: PureState, psi: PureState) -> float:
    """Pass probability of the swap test: 1/2 + |<phi|psi>|^2 / 2."""
    return 0.5 + 0.5 * phi.fidelity(psi)


@dataclass(frozen=True, eq=False)
class BipartiteState:
    """
    A normalized pure state on two equal-size registers in term form

        sum_j coeffs[j] |left[j]> (x) |right[j]>

    Terms need not be orthogonal. Register 1 is `left`. Joint expectations of
    product operators are evaluated through Gram matrices, so the 2n-qubit
    vector is never formed.
    """

    n_qubits: int
    coeffs: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs, dtype=np.complex128).reshape(-1)
        left = np.atleast_2d(np.asarray(self.left, dtype=np.complex128))
        right = np.atleast_2d(np.asarray(self.right, dtype=np.complex128))
        k = coeffs.shape[0]
        dim = 1 << self.n_qubits
        if left.shape != (k, dim) or right.shape != (k, dim):
            raise DimensionMismatchError(
                f"term arrays {left.shape} / {right.shape} do not match {k} terms of {dim} amplitudes"
            )
        check_qubit_cap(2 * self.n_qubits, joint=True)
        for arr in (coeffs, left, right):
            arr.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        norm_sq = self.expectation(np.conj(left) @ left.T, np.conj(right) @ right.T)
        if abs(norm_sq - 1.0) > NORM_TOLERANCE:
            raise PreconditionError(f"bipartite state is not normalized: {norm_sq:.12g}")

    @classmethod
    def product(cls, first: PureState, second: PureState) -> "BipartiteState":
        if first.n_qubits != second.n_qubits:
            raise DimensionMismatchError("registers must have equal qubit counts")
        return cls(first.n_qubits, np.ones(1), first.amplitudes[None, :], second.amplitudes[None, :])

    @classmethod
    def from_joint(cls, amplitudes: np.ndarray, n_qubits: int, atol: float = 1e-12) -> "BipartiteState":
        """Schmidt form of a 2n-qubit vector whose low n qubits are register 1."""
        dim = 1 << n_qubits
        matrix = np.asarray(amplitudes, dtype=np.complex128).reshape(dim, dim)
        # matrix[r2, r1]: row index is the high register
        u, sigma, vh = np.linalg.svd(matrix.T)
        keep = sigma > atol
        return cls(n_qubits, sigma[keep], u[:, keep].T, vh[keep, :])

    @property
    def n_terms(self) -> int:
        return self.coeffs.shape[0]

    def expectation(self, gram_left: np.ndarray, gram_right: np.ndarray) -> float:
        """<psi| A (x) B |psi> from G_A[i,j] = <l_i|A|l_j> and G_B[i,j] = <r_i|B|r_j>."""
        c = self.coeffs
        return float(np.real(np.conj(c) @ ((gram_left * gram_right) @ c)))

    def to_joint(self) -> np.ndarray:
        """Dense 2n-qubit amplitudes, register 1 on the low qubits."""
        out = np.zeros(1 << (2 * self.n_qubits), dtype=np.complex128)
        for c, l, r in zip(self.coeffs, self.left, self.right):
            out += c * np.kron(r, l)
        return out

    def reduced_left(self) -> np.ndarray:
        """Density matrix of register 1."""
        gram_right = np.conj(self.right) @ self.right.T
        weighted = self.coeffs[:, None] * self.left
        # rho = sum_ij c_i conj(c_j) <r_j|r_i> |l_i><l_j|
        return weighted.T @ (gram_right.T @ np.conj(weighted))


RegisterState = Union[PureState, BipartiteState]


@dataclass(frozen=True)
class Ensemble:
    """A probabilistic mixture of pure states, weights summing to one."""

    entries: tuple[tuple[float, RegisterState], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not self.entries:
            raise PreconditionError("an ensemble needs at least one entry")
        weights = np.array([w for w, _ in self.entries], dtype=float)
        if np.any(weights < -NORM_TOLERANCE):
            raise PreconditionError("ensemble weights must be non-negative")
        if abs(weights.sum() - 1.0) > NORM_TOLERANCE:
            raise PreconditionError(f"ensemble weights sum to {weights.sum():.12g}, not 1")

    @classmethod
    def pure(cls, state: RegisterState) -> "Ensemble":
        return cls(((1.0, state),))

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.entries], dtype=float)

    @property
    def states(self) -> list[RegisterState]:
        return [s for _, s in self.entries]

    def sample(self, rng: np.random.Generator) -> RegisterState:
        weights = np.clip(self.weights, 0.0, None)
        index = rng.choice(len(self.entries), p=weights / weights.sum())
        return self.entries[index][1]
