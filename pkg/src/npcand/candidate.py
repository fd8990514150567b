"""
Candidate anti-piracy proof system for NP with idealized primitives.

Obfuscation is modelled by an opaque oracle handle and the NIZK by a trusted
setup authority that signs the statement bit together with the handle digests
(HS256 JWT). Zero-knowledge is vacuous in this mode and every report says so.

Prover: sample A of dimension n/2, hand out O1 = O(A), O2 = O(dual(A)), a
signed transcript over (x, O1, O2) and |A>.
Verifier: check the transcript, then run the V* steps through the handles.
"""

from __future__ import annotations

import hashlib
import json
import secrets
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import structlog
from jose import JWTError, jwt

from src.core.config import get_settings
from src.core.errors import DimensionMismatchError, InvalidWitnessError, PreconditionError, TranscriptError
from src.gf2.linear import BitVector, SeedLike, Subspace, dual, is_subspace_of, make_rng, membership_mask, sample_subspace
from src.npcand.relations import NPStatement, relation_holds
from src.oracles.membership import MembershipOracle
from src.oracles.programs import MeasureFlag, Query, VerifierProgram, run_program
from src.piracy.game import GameRound, register_protocol
from src.piracy.verifiers import register_verifier
from src.protocol.vstar import VerifierReport, vstar_program
from src.statesim.states import PureState, basis_state, check_qubit_cap, subspace_state

logger = structlog.get_logger(__name__)

ALGORITHM = "HS256"
IDEALIZED_NOTE = "idealized-primitive mode"
ZK_NOTE = "zero-knowledge is vacuous under a trusted setup"
BUNDLE_KEYS = ("x", "o1_digest", "o2_digest", "transcript", "state_ref")


# ---------------------------------------------------------------------------
# Oracle handles
# ---------------------------------------------------------------------------


class OracleHandle:
    """
    Membership access to a hidden subspace.

    Only membership answers leave the handle; the digest is a hash of the
    truth table, used to bind transcripts.
    """

    __slots__ = ("_mask", "_n", "_digest", "handle_id")

    def __init__(self, mask: np.ndarray, n: int, handle_id: str) -> None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (1 << n,):
            raise DimensionMismatchError(f"truth table of shape {mask.shape} for n={n}")
        self._mask = mask
        self._n = n
        self._digest = hashlib.sha256(np.packbits(mask).tobytes() + n.to_bytes(2, "big")).hexdigest()
        self.handle_id = handle_id

    @classmethod
    def obfuscate(cls, s: Subspace, handle_id: str) -> "OracleHandle":
        return cls(membership_mask(s), s.ambient_dim, handle_id)

    @property
    def ambient_dim(self) -> int:
        return self._n

    @property
    def digest(self) -> str:
        return self._digest

    def member(self, x: BitVector | int) -> bool:
        index = x.bits if isinstance(x, BitVector) else int(x)
        if not 0 <= index < (1 << self._n):
            raise DimensionMismatchError(f"query {index} outside F_2^{self._n}")
        return bool(self._mask[index])

    def open_oracle(self, oracle_id: str, **kwargs: Any) -> MembershipOracle:
        """A fresh coherent oracle over the hidden truth table."""
        return MembershipOracle.from_mask(self._mask, self._n, oracle_id, **kwargs)

    def __repr__(self) -> str:
        return f"OracleHandle({self.handle_id}, n={self._n}, digest={self._digest[:12]})"


# ---------------------------------------------------------------------------
# Trusted setup
# ---------------------------------------------------------------------------


class TrustedSetup:
    """Signs and checks statement transcripts; the key is fixed for the authority's lifetime."""

    def __init__(self, key: str | None = None) -> None:
        self._key = key or secrets.token_hex(32)

    @classmethod
    def for_seed(cls, seed: int) -> "TrustedSetup":
        return cls(hashlib.sha256(f"trusted-setup|{seed}".encode("utf-8")).hexdigest())

    def sign(self, statement: NPStatement, o1_digest: str, o2_digest: str, lsub: bool) -> str:
        claims = {
            "x": statement.token,
            "relation": statement.relation,
            "o1": o1_digest,
            "o2": o2_digest,
            "lsub": bool(lsub),
            "mode": IDEALIZED_NOTE,
        }
        return jwt.encode(claims, self._key, algorithm=ALGORITHM)

    def verify(self, transcript: str, statement: NPStatement, o1_digest: str, o2_digest: str) -> dict[str, Any]:
        try:
            claims = jwt.decode(transcript, self._key, algorithms=[ALGORITHM])
        except JWTError as exc:
            raise TranscriptError(f"transcript signature invalid: {exc}") from exc
        if claims.get("x") != statement.token:
            raise TranscriptError("transcript is bound to a different statement")
        if claims.get("o1") != o1_digest or claims.get("o2") != o2_digest:
            raise TranscriptError("transcript is bound to different oracle handles")
        if claims.get("lsub") is not True:
            raise TranscriptError("transcript attests a false statement bit")
        return claims


@lru_cache(maxsize=1)
def default_setup() -> TrustedSetup:
    """Process-wide authority, keyed once per run."""
    return TrustedSetup()


# ---------------------------------------------------------------------------
# Statement language
# ---------------------------------------------------------------------------


def lsub_decide(statement: NPStatement, b: Subspace, c: Subspace, np_witness: Any = None) -> bool:
    """
    (x, B, C) in L_sub:
    B inside dual(C), dim B = n/2 or dim C = n/2, and x in L or dim B = n/4 or dim C = n/4.
    """
    if b.ambient_dim != c.ambient_dim:
        raise DimensionMismatchError(f"B over F_2^{b.ambient_dim}, C over F_2^{c.ambient_dim}")
    n = b.ambient_dim
    nested = is_subspace_of(b, dual(c))
    half = 2 * b.dim == n or 2 * c.dim == n
    quarter = 4 * b.dim == n or 4 * c.dim == n
    return nested and half and (quarter or relation_holds(statement, np_witness))


# ---------------------------------------------------------------------------
# Prover and verifier
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CandidateProof:
    statement: NPStatement
    o1: OracleHandle
    o2: OracleHandle
    transcript: str
    state: PureState = field(repr=False)

    @property
    def n(self) -> int:
        return self.o1.ambient_dim

    def oracles(self, **kwargs: Any) -> dict[str, MembershipOracle]:
        return {"A": self.o1.open_oracle("A", **kwargs), "B": self.o2.open_oracle("B", **kwargs)}

    def with_state(self, state: PureState) -> "CandidateProof":
        return CandidateProof(self.statement, self.o1, self.o2, self.transcript, state)


def candidate_prove(
    statement: NPStatement,
    np_witness: Any,
    n: int,
    seed: SeedLike = None,
    *,
    setup: TrustedSetup | None = None,
) -> CandidateProof:
    if not relation_holds(statement, np_witness):
        raise InvalidWitnessError(f"witness rejected by relation {statement.relation}")
    if n < 2 or n % 2:
        raise PreconditionError(f"the candidate needs an even n >= 2, got {n}")
    check_qubit_cap(n + 1)
    setup = setup or default_setup()
    a = sample_subspace(n, n // 2, make_rng(seed))
    a_dual = dual(a)
    o1 = OracleHandle.obfuscate(a, "O1")
    o2 = OracleHandle.obfuscate(a_dual, "O2")
    lsub = lsub_decide(statement, a, a_dual, np_witness)
    transcript = setup.sign(statement, o1.digest, o2.digest, lsub)
    logger.info("candidate_proof_emitted", relation=statement.relation, n=n, o1=o1.digest[:12], o2=o2.digest[:12])
    return CandidateProof(statement, o1, o2, transcript, subspace_state(a))


def candidate_program(n: int) -> VerifierProgram:
    """The V* steps, bound to the handle slots."""
    steps = vstar_program(n).steps
    return VerifierProgram("candidate", n, steps)


def candidate_verify(
    statement: NPStatement,
    proof: CandidateProof,
    *,
    setup: TrustedSetup | None = None,
) -> VerifierReport:
    setup = setup or default_setup()
    try:
        setup.verify(proof.transcript, statement, proof.o1.digest, proof.o2.digest)
    except TranscriptError as exc:
        logger.warning("candidate_transcript_rejected", reason=str(exc))
        return VerifierReport(
            accept_probability=0.0,
            step_rejected=1,
            notes=(IDEALIZED_NOTE, f"transcript rejected: {exc}"),
        )
    if proof.state.n_qubits != proof.n:
        raise DimensionMismatchError(f"proof state has {proof.state.n_qubits} qubits, handles are over n={proof.n}")

    first = VerifierProgram("candidate-a", proof.n, (Query("A"), MeasureFlag()))
    p_a = float(run_program(first, proof.state, proof.oracles()).accept_probabilities[0])
    run = run_program(candidate_program(proof.n), proof.state, proof.oracles())
    p = float(min(1.0, max(0.0, run.accept_probabilities[0])))
    tol = get_settings().tolerance
    step = None
    if p <= tol:
        step = 2 if p_a <= tol else 4
    return VerifierReport(
        accept_probability=p,
        step_rejected=step,
        queries_used=run.queries_used,
        notes=(IDEALIZED_NOTE, ZK_NOTE),
    )


# ---------------------------------------------------------------------------
# Proof bundle files
# ---------------------------------------------------------------------------


def state_ref(state: PureState) -> str:
    digest = hashlib.sha256(np.ascontiguousarray(state.amplitudes).tobytes()).hexdigest()
    return f"subspace-state:{state.n_qubits}:{digest[:16]}"


def proof_bundle(proof: CandidateProof) -> dict[str, Any]:
    """Serializable part of a proof; handles and the state stay in-process."""
    return {
        "x": proof.statement.to_json(),
        "o1_digest": proof.o1.digest,
        "o2_digest": proof.o2.digest,
        "transcript": proof.transcript,
        "state_ref": state_ref(proof.state),
    }


def write_proof_bundle(proof: CandidateProof, path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(proof_bundle(proof), indent=2, sort_keys=True))
    return target


def read_proof_bundle(path: str | Path) -> dict[str, Any]:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise TranscriptError(f"unreadable proof bundle {path}: {exc}") from exc
    missing = [key for key in BUNDLE_KEYS if key not in payload]
    if missing:
        raise TranscriptError(f"proof bundle missing {', '.join(missing)}")
    payload["x"] = NPStatement.from_json(payload["x"])
    return payload


# ---------------------------------------------------------------------------
# Harness adapters
# ---------------------------------------------------------------------------


def random_parity_statement(n: int, rng: np.random.Generator) -> tuple[NPStatement, list[int]]:
    """An even-parity bit string of length n and its witness."""
    bits = rng.integers(0, 2, size=n)
    if bits.sum() % 2:
        bits[-1] ^= 1
    return NPStatement("parity", "".join(str(int(b)) for b in bits)), [i for i, b in enumerate(bits) if b]


@register_verifier("candidate")
def _candidate_verifier(n: int) -> VerifierProgram:
    return candidate_program(n)


@register_protocol("npcand")
def npcand_round(n: int, rng: np.random.Generator, setup: TrustedSetup | None = None) -> GameRound:
    setup = setup or default_setup()
    statement, witness = random_parity_statement(n, rng)
    proof = candidate_prove(statement, witness, n, rng, setup=setup)
    try:
        setup.verify(proof.transcript, statement, proof.o1.digest, proof.o2.digest)
        admitted = True
    except TranscriptError:
        admitted = False
    return GameRound(
        n=n,
        x=BitVector.zero(n),
        proof=proof.state,
        oracle_factory=proof.oracles,
        illicit_copy=proof.state,
        admitted=admitted,
        instance_id=proof.o1.digest[:12],
        notes=(IDEALIZED_NOTE,),
    )


def candidate_honest_rates(
    ns: Sequence[int],
    trials: int,
    seed: int = 0,
) -> list[dict[str, Any]]:
    """Honest acceptance and the |0^n> substitution per n, for reports."""
    rows = []
    setup = TrustedSetup.for_seed(seed)
    for n in ns:
        rng = make_rng(np.random.SeedSequence(entropy=seed, spawn_key=(n,)))
        for trial in range(trials):
            statement, witness = random_parity_statement(n, rng)
            proof = candidate_prove(statement, witness, n, rng, setup=setup)
            honest = candidate_verify(statement, proof, setup=setup).accept_probability
            substituted = candidate_verify(statement, proof.with_state(basis_state(n, 0)), setup=setup)
            rows.append(
                {
                    "n": n,
                    "trial": trial,
                    "relation": statement.relation,
                    "honest_accept": honest,
                    "zero_state_accept": substituted.accept_probability,
                    "zero_state_expected": 2.0 ** (-n / 2),
                }
            )
    logger.info("candidate_rates_computed", ns=list(ns), trials=trials)
    return rows
