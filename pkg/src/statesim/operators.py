"""
Accept operators (PSD contractions on a proof space) and their spectra.

An AcceptOperator is either dense, diagonal, or matrix-free (a Hermitian
matvec). Matrix-free operators keep the V* sandwich at n = 12 cheap; dense
forms are materialised only under the eigensolver cap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import structlog
from scipy.sparse.linalg import LinearOperator

from src.core.config import get_settings
from src.core.errors import CapExceededError, ConvergenceError, DimensionMismatchError, PreconditionError
from src.gf2.linear import Subspace, membership_mask
from src.statesim.states import PureState, check_qubit_cap

logger = structlog.get_logger(__name__)

HERMITIAN_TOLERANCE = 1e-9

MatVec = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class AcceptOperator:
    """
    A Hermitian operator with 0 <= M <= I.

    `matvec` maps an array of shape (dim,) or (dim, k) to the same shape.
    `dense` and `diagonal` are optional cached forms.
    """

    dim: int
    matvec: MatVec
    dense: np.ndarray | None = None
    diagonal: np.ndarray | None = None
    label: str = ""

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, label: str = "", validate: bool = True) -> "AcceptOperator":
        m = np.array(matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"accept operator must be square, got {m.shape}")
        if validate:
            validate_contraction(m)
        m.setflags(write=False)
        return cls(m.shape[0], lambda v, _m=m: _m @ v, dense=m, label=label)

    @classmethod
    def from_diagonal(cls, diagonal: np.ndarray, label: str = "") -> "AcceptOperator":
        d = np.array(diagonal, dtype=float).reshape(-1)
        if d.size and (d.min() < -HERMITIAN_TOLERANCE or d.max() > 1 + HERMITIAN_TOLERANCE):
            raise PreconditionError("diagonal entries of an accept operator must lie in [0, 1]")
        d.setflags(write=False)

        def _apply(v: np.ndarray, _d: np.ndarray = d) -> np.ndarray:
            return _d[:, None] * v if v.ndim == 2 else _d * v

        return cls(d.shape[0], _apply, diagonal=d, label=label)

    @classmethod
    def from_function(cls, dim: int, matvec: MatVec, label: str = "") -> "AcceptOperator":
        """Wrap a Hermitian matvec; the caller vouches for 0 <= M <= I."""
        return cls(dim, matvec, label=label)

    @classmethod
    def identity(cls, dim: int) -> "AcceptOperator":
        return cls.from_diagonal(np.ones(dim), label="identity")

    @classmethod
    def zero(cls, dim: int) -> "AcceptOperator":
        return cls.from_diagonal(np.zeros(dim), label="zero")

    @property
    def n_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        v = np.asarray(vectors, dtype=np.complex128)
        if v.shape[0] != self.dim:
            raise DimensionMismatchError(f"operator of dim {self.dim} applied to length {v.shape[0]}")
        return self.matvec(v)

    def expectation(self, amplitudes: np.ndarray) -> float:
        v = np.asarray(amplitudes, dtype=np.complex128)
        return float(np.real(np.vdot(v, self.apply(v))))

    def gram(self, rows: np.ndarray) -> np.ndarray:
        """G[i, j] = <rows[i]| M |rows[j]> for a (k, dim) array of vectors."""
        r = np.atleast_2d(np.asarray(rows, dtype=np.complex128))
        return np.conj(r) @ self.apply(r.T)

    def to_dense(self, cap: int | None = None) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        limit = get_settings().eigensolver_cap_dim if cap is None else cap
        if self.dim > limit:
            raise CapExceededError("dense operator dimension", self.dim, limit)
        if self.diagonal is not None:
            return np.diag(self.diagonal).astype(np.complex128)
        return self.apply(np.eye(self.dim, dtype=np.complex128))

    @property
    def matrix(self) -> np.ndarray:
        return self.to_dense()

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator(
            (self.dim, self.dim),
            matvec=lambda v: self.apply(np.asarray(v).reshape(-1)),
            matmat=lambda v: self.apply(np.asarray(v)),
            rmatvec=lambda v: self.apply(np.asarray(v).reshape(-1)),
            dtype=np.complex128,
        )

    def complement(self) -> "AcceptOperator":
        """I - M, the reject operator."""
        if self.diagonal is not None:
            return AcceptOperator.from_diagonal(1.0 - self.diagonal, label=f"not {self.label}")
        if self.dense is not None:
            return AcceptOperator.from_matrix(np.eye(self.dim) - self.dense, validate=False)
        return AcceptOperator.from_function(self.dim, lambda v: v - self.apply(v))


def validate_contraction(matrix: np.ndarray, tol: float = HERMITIAN_TOLERANCE) -> None:
    """Raise unless `matrix` is Hermitian with spectrum in [-tol, 1 + tol]."""
    if not np.allclose(matrix, matrix.conj().T, atol=tol, rtol=0.0):
        raise PreconditionError("accept operator is not Hermitian")
    limit = get_settings().eigensolver_cap_dim
    if matrix.shape[0] > limit:
        return
    eigenvalues = np.linalg.eigvalsh(matrix)
    if eigenvalues[0] < -tol or eigenvalues[-1] > 1 + tol:
        raise PreconditionError(
            f"accept operator spectrum [{eigenvalues[0]:.3g}, {eigenvalues[-1]:.3g}] leaves [0, 1]"
        )


def membership_projector(s: Subspace) -> AcceptOperator:
    """Diagonal projector onto basis states indexed by members of s."""
    check_qubit_cap(s.ambient_dim)
    return AcceptOperator.from_diagonal(membership_mask(s).astype(float), label="membership")


def accept_probability(m: AcceptOperator, psi: PureState) -> float:
    """<psi|M|psi>, clamped to [0, 1]."""
    if psi.dim != m.dim:
        raise DimensionMismatchError(f"state of dim {psi.dim} against operator of dim {m.dim}")
    return float(min(1.0, max(0.0, m.expectation(psi.amplitudes))))


def ensemble_accept_probability(m: AcceptOperator, weighted: Sequence[tuple[float, PureState]]) -> float:
    return float(sum(w * accept_probability(m, s) for w, s in weighted))


def convex_combination(weights: Sequence[float], operators: Sequence[AcceptOperator]) -> AcceptOperator:
    """sum_i w_i M_i for probability weights; stays a contraction."""
    if len(weights) != len(operators) or not operators:
        raise PreconditionError("convex combination needs matching weights and operators")
    if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-12:
        raise PreconditionError("convex weights must be a probability vector")
    dims = {op.dim for op in operators}
    if len(dims) != 1:
        raise DimensionMismatchError(f"operators of mixed dims {sorted(dims)}")
    dim = dims.pop()
    if all(op.dense is not None or op.diagonal is not None for op in operators):
        total = sum(w * op.to_dense() for w, op in zip(weights, operators))
        return AcceptOperator.from_matrix(total, validate=False)
    pairs = list(zip(weights, operators))
    return AcceptOperator.from_function(dim, lambda v: sum(w * op.apply(v) for w, op in pairs))


def kron_operators(first: AcceptOperator, second: AcceptOperator) -> AcceptOperator:
    """first (x) second with `first` acting on the low qubits."""
    dim = first.dim * second.dim
    if dim <= get_settings().eigensolver_cap_dim:
        dense = np.kron(second.to_dense(), first.to_dense())
        return AcceptOperator.from_matrix(dense, validate=False)

    def _apply(v: np.ndarray) -> np.ndarray:
        cols = v.reshape(dim, -1)
        out = np.empty_like(cols)
        for j in range(cols.shape[1]):
            block = cols[:, j].reshape(second.dim, first.dim)
            block = first.apply(block.T).T
            block = second.apply(block)
            out[:, j] = block.reshape(-1)
        return out.reshape(v.shape)

    return AcceptOperator.from_function(dim, _apply)


def _residual(m: AcceptOperator, v: np.ndarray, value: float) -> float:
    return float(np.linalg.norm(m.apply(v) - value * v))


def lambda_max(
    m: AcceptOperator,
    *,
    tol: float | None = None,
    budget: int | None = None,
    cap: int | None = None,
    seed: int = 0,
) -> float:
    """
    Largest eigenvalue of M.

    Power iteration from a seeded random start, accepted once the residual
    ||Mv - lambda v|| is within `tol`. When the budget runs out a dense
    eigendecomposition takes over; its answer is residual-checked too.
    """
    return top_eigenpair(m, tol=tol, budget=budget, cap=cap, seed=seed)[0]


def top_eigenpair(
    m: AcceptOperator,
    *,
    tol: float | None = None,
    budget: int | None = None,
    cap: int | None = None,
    seed: int = 0,
) -> tuple[float, np.ndarray]:
    settings = get_settings()
    tol = settings.tolerance if tol is None else tol
    budget = settings.power_iteration_budget if budget is None else budget
    limit = settings.eigensolver_cap_dim if cap is None else cap
    if m.dim > limit:
        raise CapExceededError("eigensolver dimension", m.dim, limit)

    if m.diagonal is not None:
        index = int(np.argmax(m.diagonal))
        vector = np.zeros(m.dim, dtype=np.complex128)
        vector[index] = 1.0
        return float(m.diagonal[index]), vector

    rng = np.random.default_rng(seed)
    v = rng.normal(size=m.dim) + 1j * rng.normal(size=m.dim)
    v /= np.linalg.norm(v)
    for iteration in range(budget):
        w = m.apply(v)
        value = float(np.real(np.vdot(v, w)))
        norm = float(np.linalg.norm(w))
        if norm < 1e-300:
            break
        if float(np.linalg.norm(w - value * v)) <= tol:
            return value, v
        v = w / norm
    else:
        iteration = budget

    logger.debug("power_iteration_fallback", dim=m.dim, iterations=iteration)
    dense = m.to_dense(cap=limit)
    eigenvalues, eigenvectors = scipy.linalg.eigh(dense)
    value = float(eigenvalues[-1])
    vector = eigenvectors[:, -1]
    if _residual(m, vector, value) > max(tol, 1e-9) * max(1.0, abs(value)) * 10:
        raise ConvergenceError(f"lambda_max did not converge for dim {m.dim}")
    return value, vector
