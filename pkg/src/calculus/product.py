"""
Product-state maximisation and the entanglement-removal bound.

- product_max: see-saw lower bound on max <e1 ... ek| M |e1 ... ek> over unit
  product vectors, with seeded random restarts
- check_useful_bound: lambda_max(M) <= alpha * n^2 on an n x n space
- swap test / product test operators and random PSD contractions for sweeps
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import structlog
from joblib import Parallel, delayed

from src.core.config import get_settings
from src.core.errors import DimensionMismatchError, PreconditionError
from src.core.metrics import record_check
from src.experiments.seeds import child_rng
from src.statesim.operators import AcceptOperator, top_eigenpair

logger = structlog.get_logger(__name__)

USEFUL_SLACK = 1e-6
SEESAW_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ProductMaxResult:
    alpha: float
    vectors: tuple[np.ndarray, ...]
    converged: bool
    restart_values: tuple[float, ...] = field(default_factory=tuple)

    @property
    def spread(self) -> float:
        """Gap between the best and worst restart; a crude estimate of see-saw error."""
        if not self.restart_values:
            return 0.0
        return max(self.restart_values) - min(self.restart_values)


def _dense(m: AcceptOperator | np.ndarray) -> np.ndarray:
    if isinstance(m, AcceptOperator):
        return m.to_dense()
    return np.asarray(m, dtype=np.complex128)


def _as_tensor(matrix: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Reshape so party 0 (the low index digits) sits on the last row/column axes."""
    total = math.prod(dims)
    if matrix.shape != (total, total):
        raise DimensionMismatchError(f"operator of shape {matrix.shape} for party dims {tuple(dims)}")
    rev = tuple(reversed(dims))
    return matrix.reshape(rev + rev)


def _reduced(tensor: np.ndarray, vectors: Sequence[np.ndarray], party: int) -> np.ndarray:
    """Operator on one party with every other party contracted against its vector."""
    k = len(vectors)
    rows = [chr(ord("a") + i) for i in range(k)]
    cols = [chr(ord("A") + i) for i in range(k)]
    operands: list[np.ndarray] = [tensor]
    subscripts = ["".join(rows) + "".join(cols)]
    for j, v in enumerate(vectors):
        if j == party:
            continue
        axis = k - 1 - j
        operands += [np.conj(v), v]
        subscripts += [rows[axis], cols[axis]]
    axis = k - 1 - party
    expr = ",".join(subscripts) + "->" + rows[axis] + cols[axis]
    reduced = np.einsum(expr, *operands, optimize=True)
    return (reduced + reduced.conj().T) / 2


def _product_value(tensor: np.ndarray, vectors: Sequence[np.ndarray]) -> float:
    reduced = _reduced(tensor, vectors, 0)
    return float(np.real(np.vdot(vectors[0], reduced @ vectors[0])))


def _seesaw(
    tensor: np.ndarray,
    start: list[np.ndarray],
    iterations: int,
) -> tuple[float, list[np.ndarray], bool]:
    vectors = [v / np.linalg.norm(v) for v in start]
    value = _product_value(tensor, vectors)
    for _ in range(iterations):
        previous = value
        for party in range(len(vectors)):
            eigenvalues, eigenvectors = scipy.linalg.eigh(_reduced(tensor, vectors, party))
            vectors[party] = eigenvectors[:, -1]
            value = float(eigenvalues[-1])
        if value - previous <= SEESAW_TOLERANCE:
            return value, vectors, True
    return value, vectors, False


def _schmidt_start(tensor: np.ndarray, matrix: np.ndarray, dims: Sequence[int]) -> list[np.ndarray]:
    """
    Product vectors from the top eigenvector.

    For two parties every Schmidt pair is scored and the best is returned,
    which keeps lambda_max <= n * alpha. More parties take the leading
    singular vector of each unfolding.
    """
    _, top = top_eigenpair(AcceptOperator.from_matrix(matrix, validate=False))
    shaped = top.reshape(tuple(reversed(dims)))
    k = len(dims)
    if k == 2:
        u, _, vh = np.linalg.svd(shaped)
        # shaped[i1, i0]: rows index party 1
        pairs = [[vh[i], u[:, i]] for i in range(min(dims))]
        return max(pairs, key=lambda pair: _product_value(tensor, pair))
    vectors = []
    for party in range(k):
        axis = k - 1 - party
        unfolded = np.moveaxis(shaped, axis, 0).reshape(dims[party], -1)
        u, _, _ = np.linalg.svd(unfolded)
        vectors.append(u[:, 0])
    return vectors


def _random_start(dims: Sequence[int], seed: int, restart: int) -> list[np.ndarray]:
    rng = child_rng(seed, f"seesaw|restart={restart}")
    return [rng.normal(size=d) + 1j * rng.normal(size=d) for d in dims]


def _restart(
    tensor: np.ndarray,
    dims: Sequence[int],
    seed: int,
    restart: int,
    iterations: int,
) -> tuple[float, list[np.ndarray], bool]:
    return _seesaw(tensor, _random_start(dims, seed, restart), iterations)


def product_max(
    m: AcceptOperator | np.ndarray,
    dims: Sequence[int] | None = None,
    *,
    restarts: int = 8,
    iterations: int = 200,
    seed: int = 0,
    jobs: int | None = None,
) -> ProductMaxResult:
    """
    See-saw maximisation of M over product unit vectors.

    `dims` are the party dimensions, party 0 on the low qubits; the default
    splits M into two equal halves. The returned alpha is attained by the
    returned vectors, so it is a lower bound on the true maximum. Running out
    of iterations is reported through `converged`, never raised.
    """
    matrix = _dense(m)
    if dims is None:
        half = math.isqrt(matrix.shape[0])
        if half * half != matrix.shape[0]:
            raise DimensionMismatchError(f"dim {matrix.shape[0]} is not a square; pass party dims")
        dims = (half, half)
    dims = tuple(int(d) for d in dims)
    if restarts < 0:
        raise PreconditionError("restarts must be non-negative")
    tensor = _as_tensor(matrix, dims)
    jobs = get_settings().default_jobs if jobs is None else jobs

    runs = [_seesaw(tensor, _schmidt_start(tensor, matrix, dims), iterations)]
    if restarts:
        runs += Parallel(n_jobs=jobs)(
            delayed(_restart)(tensor, dims, seed, r, iterations) for r in range(1, restarts + 1)
        )
    values = tuple(value for value, _, _ in runs)
    best = int(np.argmax(values))
    alpha, vectors, converged = runs[best]
    if not converged:
        logger.warning("product_max_not_converged", dims=dims, alpha=alpha, iterations=iterations)
    return ProductMaxResult(
        alpha=float(min(1.0, max(0.0, alpha))),
        vectors=tuple(vectors),
        converged=all(c for _, _, c in runs),
        restart_values=values,
    )


def product_value(m: AcceptOperator | np.ndarray, vectors: Sequence[np.ndarray]) -> float:
    """<v1 ... vk| M |v1 ... vk> for unit vectors, party 0 on the low qubits."""
    dims = tuple(v.shape[0] for v in vectors)
    tensor = _as_tensor(_dense(m), dims)
    return _product_value(tensor, [v / np.linalg.norm(v) for v in vectors])


@dataclass(frozen=True)
class UsefulBoundCheck:
    lambda_max: float
    alpha: float
    n: int
    spread: float
    schmidt_bound: float
    outcome: str

    @property
    def bound(self) -> float:
        return self.alpha * self.n**2

    @property
    def schmidt_slack(self) -> float:
        return self.schmidt_bound - self.lambda_max

    def as_dict(self) -> dict[str, float | int | str]:
        return {
            "lambda_max": self.lambda_max,
            "alpha": self.alpha,
            "n": self.n,
            "bound": self.bound,
            "schmidt_bound": self.schmidt_bound,
            "spread": self.spread,
            "outcome": self.outcome,
        }


def check_useful_bound(
    m: AcceptOperator | np.ndarray,
    alpha: float | ProductMaxResult | None = None,
    dims: Sequence[int] | None = None,
    *,
    seed: int = 0,
) -> UsefulBoundCheck:
    """
    lambda_max(M) <= alpha * n^2 on an n x n bipartite space.

    A shortfall smaller than the see-saw spread is flagged rather than failed,
    since alpha is only a lower bound. The Schmidt bound alpha * (sum sigma_i)^2
    of the top eigenvector is the intermediate step of the inequality.
    """
    matrix = _dense(m)
    if dims is None:
        half = math.isqrt(matrix.shape[0])
        dims = (half, half)
    if len(dims) != 2:
        raise PreconditionError("the useful bound is stated for two parties")
    spread = 0.0
    if alpha is None:
        alpha = product_max(matrix, dims, seed=seed)
    if isinstance(alpha, ProductMaxResult):
        spread = alpha.spread
        alpha = alpha.alpha
    n = max(dims)
    value, top = top_eigenpair(AcceptOperator.from_matrix(matrix, validate=False))
    sigma = np.linalg.svd(top.reshape(dims[1], dims[0]), compute_uv=False)
    schmidt_bound = float(alpha * sigma.sum() ** 2)

    if value <= alpha * n**2 + USEFUL_SLACK:
        outcome = "pass"
    elif value <= (alpha + spread) * n**2 + USEFUL_SLACK:
        outcome = "flag"
    else:
        outcome = "fail"
    record_check("useful_bound", outcome)
    return UsefulBoundCheck(value, float(alpha), n, spread, schmidt_bound, outcome)


# ===== Operators =====


def swap_permutation(n_qubits: int, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Permutation matrix exchanging qubit a with qubit b for each (a, b) in pairs."""
    dim = 1 << n_qubits
    indices = np.arange(dim)
    swapped = indices.copy()
    for a, b in pairs:
        bit_a = (swapped >> a) & 1
        bit_b = (swapped >> b) & 1
        diff = bit_a ^ bit_b
        swapped = swapped ^ (diff << a) ^ (diff << b)
    perm = np.zeros((dim, dim))
    perm[swapped, indices] = 1.0
    return perm


def swap_test_operator(p: int) -> AcceptOperator:
    """(I + SWAP) / 2 on two p-qubit registers."""
    swap = swap_permutation(2 * p, [(i, p + i) for i in range(p)])
    return AcceptOperator.from_matrix((np.eye(1 << (2 * p)) + swap) / 2, label="swap-test", validate=False)


def product_test_operator(k: int, p: int) -> AcceptOperator:
    """
    Pass operator of the product test on two copies of a k-block proof.

    Proof 1 holds qubits [0, kp), proof 2 holds [kp, 2kp); block i of each is
    swap-tested and the test passes iff all k swap tests pass:
    prod_i (I + SWAP_i) / 2 = 2^-k sum over block subsets S of SWAP_S.
    """
    width = k * p
    total = np.zeros((1 << (2 * width), 1 << (2 * width)))
    for subset in itertools.product((0, 1), repeat=k):
        pairs = [
            (block * p + i, width + block * p + i)
            for block, chosen in enumerate(subset)
            if chosen
            for i in range(p)
        ]
        total += swap_permutation(2 * width, pairs)
    return AcceptOperator.from_matrix(total / (1 << k), label="product-test", validate=False)


def maximally_entangled_projector(p: int) -> AcceptOperator:
    dim = 1 << p
    phi = np.zeros(dim * dim, dtype=np.complex128)
    phi[[x + dim * x for x in range(dim)]] = dim ** -0.5
    return AcceptOperator.from_matrix(np.outer(phi, phi.conj()), label="phi-plus", validate=False)


def random_psd_contraction(dim: int, rng: np.random.Generator, rank: int | None = None) -> AcceptOperator:
    """G G^dag rescaled so the top eigenvalue is drawn from [0.2, 1]."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    top = float(np.linalg.eigvalsh(m)[-1])
    m *= rng.uniform(0.2, 1.0) / top
    return AcceptOperator.from_matrix((m + m.conj().T) / 2, label="random-psd")
