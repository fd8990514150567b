"""
Honest prover and the admissible verifier V*.

V* on (x, |psi>):
  1. reject unless x = 0^n
  2. check membership in A (one coherent query)
  3. apply H on every qubit
  4. check membership in B (one coherent query)
  5. accept

Acceptance is evaluated exactly as ||Pi_B H Pi_A |psi>||^2. The program form
(`vstar_program`) runs the same steps through real oracles and is used by the
piracy harness and the hybrids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import structlog

from src.core.config import get_settings
from src.core.errors import DimensionMismatchError, PreconditionError
from src.gf2.linear import BitVector, SeedLike, make_rng, membership_mask
from src.oracles.membership import MembershipOracle, QueryLog
from src.oracles.programs import ApplyHadamard, MeasureFlag, Query, VerifierProgram
from src.piracy.stats import hoeffding_radius
from src.protocol.instances import Instance
from src.statesim.operators import AcceptOperator, lambda_max
from src.statesim.states import PureState, subspace_state, walsh_hadamard

logger = structlog.get_logger(__name__)

VSTAR_QUERIES = 2


@dataclass(frozen=True)
class VerifierReport:
    accept_probability: float
    step_rejected: int | None = None
    queries_used: int = 0
    mode: str = "exact"
    shots: int | None = None
    ci_radius: float | None = None
    notes: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not 0.0 <= self.accept_probability <= 1.0:
            raise PreconditionError(f"acceptance probability {self.accept_probability} outside [0, 1]")


def honest_prove(inst: Instance) -> PureState:
    """|A>, the uniform superposition over A."""
    if not inst.is_yes:
        raise PreconditionError(f"the honest prover only answers YES instances, got {inst.kind.value}")
    return subspace_state(inst.A)


def _check_inputs(inst: Instance, x: BitVector, proof: PureState) -> None:
    if x.n != inst.n:
        raise DimensionMismatchError(f"statement x has {x.n} bits, instance has n={inst.n}")
    if proof.n_qubits != inst.n:
        raise DimensionMismatchError(f"proof has {proof.n_qubits} qubits, V* needs {inst.n}")


def _stage_masses(inst: Instance, proof: PureState) -> tuple[float, float]:
    """(probability of passing the A-check, probability of passing both checks)."""
    after_a = proof.amplitudes * membership_mask(inst.A)
    p_a = float(np.vdot(after_a, after_a).real)
    after_b = walsh_hadamard(after_a) * membership_mask(inst.B)
    return p_a, float(np.vdot(after_b, after_b).real)


def verify_vstar(inst: Instance, x: BitVector, proof: PureState) -> VerifierReport:
    _check_inputs(inst, x, proof)
    if not x.is_zero():
        return VerifierReport(accept_probability=0.0, step_rejected=1, queries_used=0)

    tol = get_settings().tolerance
    p_a, p = _stage_masses(inst, proof)
    p = min(1.0, max(0.0, p))
    step = None
    if p <= tol:
        step = 2 if p_a <= tol else 4
    return VerifierReport(accept_probability=p, step_rejected=step, queries_used=VSTAR_QUERIES)


def vstar_accept_operator(inst: Instance) -> AcceptOperator:
    """Pi_A H Pi_B H Pi_A, matrix-free."""
    n = inst.n
    dim = 1 << n
    mask_a = membership_mask(inst.A)
    mask_b = membership_mask(inst.B)

    def _apply(v: np.ndarray) -> np.ndarray:
        rows = v.reshape(dim, -1).T * mask_a
        rows = walsh_hadamard(rows, n) * mask_b
        rows = walsh_hadamard(rows, n) * mask_a
        return rows.T.reshape(v.shape)

    return AcceptOperator.from_function(dim, _apply, label=f"vstar[{inst.kind.value}]")


def max_cheat_probability(inst: Instance) -> float:
    """Best acceptance over all proofs: lambda_max of the V* accept operator."""
    value = lambda_max(vstar_accept_operator(inst))
    logger.debug("max_cheat_computed", n=inst.n, kind=inst.kind.value, value=value)
    return min(1.0, max(0.0, value))


def vstar_program(n: int) -> VerifierProgram:
    return VerifierProgram(
        "vstar",
        n,
        (Query("A"), MeasureFlag(), ApplyHadamard(), Query("B"), MeasureFlag()),
    )


def vstar_oracles(
    inst: Instance,
    *,
    log: QueryLog | None = None,
) -> dict[str, MembershipOracle]:
    return {
        "A": MembershipOracle(inst.A, "A", log=log),
        "B": MembershipOracle(inst.B, "B", log=log),
    }


def sample_vstar(
    inst: Instance,
    x: BitVector,
    proof: PureState,
    shots: int,
    seed: SeedLike = None,
    *,
    delta: float = 0.05,
) -> VerifierReport:
    """
    Sampled V*: each shot runs the measurement steps with real outcomes.

    The returned estimate is within `ci_radius` of the exact value with
    probability at least 1 - delta.
    """
    _check_inputs(inst, x, proof)
    if shots <= 0:
        raise PreconditionError("shots must be positive")
    radius = hoeffding_radius(shots, delta)
    if not x.is_zero():
        return VerifierReport(0.0, step_rejected=1, mode="sampled", shots=shots, ci_radius=radius)

    rng = make_rng(seed)
    p_a, p = _stage_masses(inst, proof)
    passed_a = int(rng.binomial(shots, min(1.0, max(0.0, p_a))))
    p_b_given_a = min(1.0, p / p_a) if p_a > 0 else 0.0
    accepted = int(rng.binomial(passed_a, p_b_given_a)) if passed_a else 0
    step = None
    if accepted == 0:
        step = 2 if passed_a == 0 else 4
    return VerifierReport(
        accept_probability=accepted / shots,
        step_rejected=step,
        queries_used=VSTAR_QUERIES * shots,
        mode="sampled",
        shots=shots,
        ci_radius=radius,
    )
