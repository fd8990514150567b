"""
Verifier programs: explicit step lists of unitaries, oracle queries and flag
measurements, executed exactly with deferred measurement.

Every MeasureFlag copies the flag into a fresh record bit and resets the flag,
so a run of m measurements carries 2^m record branches and stays unitary.
A program accepts on the branch whose records are all 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from src.core.errors import DimensionMismatchError, PreconditionError
from src.oracles.membership import MembershipOracle
from src.statesim.operators import AcceptOperator
from src.statesim.states import PureState, check_qubit_cap, walsh_hadamard


@dataclass(frozen=True)
class ApplyHadamard:
    """H on every input qubit."""


@dataclass(frozen=True, eq=False)
class ApplyUnitary:
    matrix: np.ndarray
    label: str = "U"


@dataclass(frozen=True)
class Query:
    slot: str


@dataclass(frozen=True)
class MeasureFlag:
    """Record the flag and reset it to |0>."""


Step = Union[ApplyHadamard, ApplyUnitary, Query, MeasureFlag]


@dataclass(frozen=True)
class VerifierProgram:
    name: str
    n: int
    steps: tuple[Step, ...]

    def __post_init__(self) -> None:
        if not any(isinstance(step, MeasureFlag) for step in self.steps):
            raise PreconditionError(f"program {self.name} never measures, so it cannot accept")
        for step in self.steps:
            if isinstance(step, ApplyUnitary) and step.matrix.shape != (1 << self.n, 1 << self.n):
                raise DimensionMismatchError(f"unitary {step.label} does not act on {self.n} qubits")

    @property
    def query_count(self) -> int:
        return sum(isinstance(step, Query) for step in self.steps)

    @property
    def measurement_count(self) -> int:
        return sum(isinstance(step, MeasureFlag) for step in self.steps)

    @property
    def slots(self) -> tuple[str, ...]:
        seen: list[str] = []
        for step in self.steps:
            if isinstance(step, Query) and step.slot not in seen:
                seen.append(step.slot)
        return tuple(seen)

    def query_slots(self) -> tuple[str, ...]:
        """Slot of each query in program order."""
        return tuple(step.slot for step in self.steps if isinstance(step, Query))


@dataclass
class ProgramRun:
    """
    Outcome of running a program on a batch of k proofs.

    accept_gram[i, j] = <proof_i| V |proof_j> for the program's effective accept
    operator V; its diagonal holds the acceptance probabilities. query_grams
    holds, per query, the Gram matrix of the member projection of that query's
    input, which is what the query-measurement POVM is built from.
    """

    accept_gram: np.ndarray
    queries_used: int
    query_grams: list[tuple[str, np.ndarray]] = field(default_factory=list)

    @property
    def accept_probabilities(self) -> np.ndarray:
        return np.clip(np.real(np.diag(self.accept_gram)), 0.0, 1.0)

    def povm_gram(self) -> np.ndarray:
        """Gram of M = mean over queries of the member projection at that query."""
        if not self.query_grams:
            return np.zeros_like(self.accept_gram)
        return sum(g for _, g in self.query_grams) / len(self.query_grams)


def _as_batch(proofs: PureState | np.ndarray, n: int) -> np.ndarray:
    if isinstance(proofs, PureState):
        batch = proofs.amplitudes[None, :]
    else:
        batch = np.atleast_2d(np.asarray(proofs, dtype=np.complex128))
    if batch.shape[1] != 1 << n:
        raise DimensionMismatchError(f"proofs of width {batch.shape[1]} for an {n}-qubit program")
    return batch


def run_program(
    program: VerifierProgram,
    proofs: PureState | np.ndarray,
    oracles: Mapping[str, MembershipOracle],
    *,
    collect_query_grams: bool = False,
) -> ProgramRun:
    """
    Execute `program` on each row of `proofs` (or one PureState).

    A batched run applies each oracle once per Query step for the whole batch.
    Oracle logs sum masses over the leading axes, so instrumented runs should
    pass a single proof.
    """
    n = program.n
    batch = _as_batch(proofs, n)
    check_qubit_cap(n + 1 + program.measurement_count)
    k = batch.shape[0]
    dim = 1 << n
    for slot in program.slots:
        if slot not in oracles:
            raise PreconditionError(f"program {program.name} queries slot {slot!r} with no oracle bound")
        if oracles[slot].ambient_dim != n:
            raise DimensionMismatchError(f"oracle {slot} is over F_2^{oracles[slot].ambient_dim}, program over {n}")

    state = np.zeros((k, 1, 2, dim), dtype=np.complex128)
    state[:, 0, 0, :] = batch
    grams: list[tuple[str, np.ndarray]] = []
    queries = 0

    for step in program.steps:
        if isinstance(step, ApplyHadamard):
            state = walsh_hadamard(state, n)
        elif isinstance(step, ApplyUnitary):
            state = state @ step.matrix.T
        elif isinstance(step, Query):
            oracle = oracles[step.slot]
            branches = state.shape[1]
            flat = state.reshape(k, branches, 2 * dim)
            if collect_query_grams:
                grams.append((step.slot, oracle.member_gram(flat)))
            flat = oracle.apply_array(flat)
            state = flat.reshape(k, branches, 2, dim)
            queries += 1
        elif isinstance(step, MeasureFlag):
            branches = state.shape[1]
            split = np.zeros((k, 2 * branches, 2, dim), dtype=np.complex128)
            split[:, 0::2, 0, :] = state[:, :, 0, :]
            split[:, 1::2, 0, :] = state[:, :, 1, :]
            state = split

    accepting = state[:, -1].reshape(k, -1)
    gram = np.conj(accepting) @ accepting.T
    return ProgramRun(accept_gram=gram, queries_used=queries, query_grams=grams)


def program_accept_probability(
    program: VerifierProgram,
    proof: PureState,
    oracles: Mapping[str, MembershipOracle],
) -> float:
    return float(run_program(program, proof, oracles).accept_probabilities[0])


def effective_accept_operator(
    program: VerifierProgram,
    oracles: Mapping[str, MembershipOracle],
) -> AcceptOperator:
    """Dense accept operator of the program, from a run on the computational basis."""
    run = run_program(program, np.eye(1 << program.n, dtype=np.complex128), oracles)
    return AcceptOperator.from_matrix(run.accept_gram, label=program.name, validate=False)
