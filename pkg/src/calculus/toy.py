"""
Toy verifiers with designated cloneable witnesses.

Proof j of a k-proof verifier occupies qubits [j*p, (j+1)*p). Witnesses are
basis states conjugated by a local unitary, so the transversal copy in that
basis is an exact cloner.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import reduce

import numpy as np
import structlog

from src.core.errors import DimensionMismatchError, PreconditionError
from src.statesim.operators import AcceptOperator
from src.statesim.states import PureState, basis_state, check_qubit_cap, tensor_states

logger = structlog.get_logger(__name__)

WITNESS_TOLERANCE = 1e-9
UNITARY_TOLERANCE = 1e-9
TOY_PRESETS = ("projective", "entangled-cheat", "perfect")


@dataclass(frozen=True)
class VerifierParams:
    c: float
    s: float
    f: float = 1.0

    def as_dict(self) -> dict[str, float]:
        return {"c": self.c, "s": self.s, "f": self.f}


def _copy_permutation(p: int) -> np.ndarray:
    """|x>|y> -> |x>|y xor x> on 2p qubits, x on the low register."""
    dim = 1 << p
    perm = np.zeros((dim * dim, dim * dim))
    for x in range(dim):
        for y in range(dim):
            perm[x + dim * (y ^ x), x + dim * y] = 1.0
    return perm


@dataclass(frozen=True, eq=False)
class Cloner:
    """
    C = (U (x) U) . COPY . (U^dag (x) I) on 2p qubits.

    Maps U|w> (x) |0> to U|w> (x) U|w> for every basis index w.
    """

    p: int
    basis: np.ndarray
    witness_index: int = 0

    def __post_init__(self) -> None:
        dim = 1 << self.p
        u = np.asarray(self.basis, dtype=np.complex128)
        if u.shape != (dim, dim):
            raise DimensionMismatchError(f"cloner basis of shape {u.shape} for p={self.p}")
        if not np.allclose(u.conj().T @ u, np.eye(dim), atol=UNITARY_TOLERANCE):
            raise PreconditionError("cloner basis is not unitary")
        if not 0 <= self.witness_index < dim:
            raise PreconditionError(f"witness index {self.witness_index} out of range")
        object.__setattr__(self, "basis", u)

    @classmethod
    def basis_copier(cls, p: int, witness_index: int = 0) -> "Cloner":
        return cls(p, np.eye(1 << p), witness_index)

    @property
    def unitary(self) -> np.ndarray:
        u = self.basis
        eye = np.eye(1 << self.p)
        return np.kron(u, u) @ _copy_permutation(self.p) @ np.kron(eye, u.conj().T)

    @property
    def designated_witness(self) -> PureState:
        return PureState(self.p, self.basis[:, self.witness_index])

    def fidelity(self, psi: PureState | None = None) -> float:
        """|<psi psi| C |psi 0>|^2, on the designated witness by default."""
        psi = self.designated_witness if psi is None else psi
        out = self.unitary @ np.kron(basis_state(self.p, 0).amplitudes, psi.amplitudes)
        target = np.kron(psi.amplitudes, psi.amplitudes)
        return float(abs(np.vdot(target, out)) ** 2)

    def tensor(self, other: "Cloner") -> "Cloner":
        """Cloner for the joint witness, self on the low qubits."""
        return Cloner(
            self.p + other.p,
            np.kron(other.basis, self.basis),
            self.witness_index + (other.witness_index << self.p),
        )


def tensor_cloners(cloners: tuple[Cloner, ...]) -> Cloner:
    return reduce(lambda acc, c: acc.tensor(c), cloners[1:], cloners[0])


@dataclass(frozen=True, eq=False)
class ToyVerifier:
    k: int
    p: int
    accept_op: AcceptOperator
    params: VerifierParams
    witness: tuple[PureState, ...] | None = None
    no_accept_op: AcceptOperator | None = None
    separable: bool = False
    cloners: tuple[Cloner, ...] = field(default_factory=tuple)
    label: str = "toy"

    def __post_init__(self) -> None:
        if self.k <= 0 or self.p <= 0:
            raise PreconditionError("proof arity and qubits per proof must be positive")
        check_qubit_cap(self.k * self.p)
        dim = 1 << (self.k * self.p)
        for op in (self.accept_op, self.no_accept_op):
            if op is not None and op.dim != dim:
                raise DimensionMismatchError(f"accept operator of dim {op.dim} for {self.k}x{self.p} qubits")
        if self.witness is not None:
            if len(self.witness) != self.k or any(w.n_qubits != self.p for w in self.witness):
                raise DimensionMismatchError("witness tuple does not match the proof layout")
            value = self.honest_acceptance()
            if value < self.params.c - WITNESS_TOLERANCE:
                raise PreconditionError(
                    f"witness accepted with {value:.12g}, below claimed completeness {self.params.c:.12g}"
                )
        if self.cloners and (len(self.cloners) != self.k or any(c.p != self.p for c in self.cloners)):
            raise DimensionMismatchError("cloners do not match the proof layout")

    @property
    def n_qubits(self) -> int:
        return self.k * self.p

    @property
    def party_dims(self) -> tuple[int, ...]:
        return (1 << self.p,) * self.k

    def joint_witness(self) -> PureState:
        if self.witness is None:
            raise PreconditionError(f"verifier {self.label} has no designated witness")
        return tensor_states(list(self.witness))

    def honest_acceptance(self) -> float:
        value = self.accept_op.expectation(self.joint_witness().amplitudes)
        return float(min(1.0, max(0.0, value)))

    def joint_cloner(self) -> Cloner:
        if len(self.cloners) != self.k:
            raise PreconditionError(f"verifier {self.label} needs one cloner per proof")
        return tensor_cloners(self.cloners)

    def with_params(self, params: VerifierParams) -> "ToyVerifier":
        return replace(self, params=params)


def _phi_c(c: float) -> np.ndarray:
    return np.array([np.sqrt(c), np.sqrt(1.0 - c)], dtype=np.complex128)


def _projective_yes_op(k: int, p: int, c: float) -> AcceptOperator:
    phi = _phi_c(c)
    single = np.outer(phi, phi.conj())
    rest = np.eye(1 << (k * p - 1))
    return AcceptOperator.from_matrix(np.kron(rest, single), label="projective-yes")


def _projective_no_op(k: int, p: int, s: float) -> AcceptOperator:
    diagonal = np.full(1 << (k * p), s / 2)
    diagonal[0] = s
    return AcceptOperator.from_diagonal(diagonal, label="projective-no")


def _entangled_no_op(p: int, s: float) -> AcceptOperator:
    dim = 1 << p
    if dim * s > 1.0 + WITNESS_TOLERANCE:
        raise PreconditionError(f"entangled-cheat needs 2^p * s <= 1, got {dim * s:.6g}")
    phi_plus = np.zeros(dim * dim, dtype=np.complex128)
    for x in range(dim):
        phi_plus[x + dim * x] = dim ** -0.5
    return AcceptOperator.from_matrix(dim * s * np.outer(phi_plus, phi_plus.conj()), label="entangled-no")


def build_toy_verifier(
    preset: str,
    k: int = 2,
    p: int = 1,
    c: float = 2 / 3,
    s: float = 1 / 3,
) -> ToyVerifier:
    """
    - projective: yes = |phi_c><phi_c| on qubit 0, witness all |0>; no = diag(s, s/2, ...)
    - entangled-cheat: same yes side; no = 2^p s |Phi+><Phi+| across two proofs
    - perfect: projective with c = 1, s = 0
    """
    if preset not in TOY_PRESETS:
        raise PreconditionError(f"unknown toy preset {preset!r}")
    if preset == "perfect":
        c, s = 1.0, 0.0
    if not 0.0 <= s <= c <= 1.0:
        raise PreconditionError(f"need 0 <= s <= c <= 1, got c={c}, s={s}")
    witness = tuple(basis_state(p, 0) for _ in range(k))
    cloners = tuple(Cloner.basis_copier(p) for _ in range(k))
    if preset == "entangled-cheat":
        if k != 2:
            raise PreconditionError("entangled-cheat is defined for two proofs")
        no_op = _entangled_no_op(p, s)
        separable = False
    else:
        no_op = _projective_no_op(k, p, s)
        separable = True
    verifier = ToyVerifier(
        k=k,
        p=p,
        accept_op=_projective_yes_op(k, p, c),
        params=VerifierParams(c=c, s=s),
        witness=witness,
        no_accept_op=no_op,
        separable=separable,
        cloners=cloners,
        label=preset,
    )
    logger.debug("toy_verifier_built", preset=preset, k=k, p=p, c=c, s=s)
    return verifier
