"""
The query-measurement POVM and the reduction chain it supports.

M picks one query of a run uniformly at random, measures that query's input
register and accepts iff the outcome lies in the target subspace. For a
verifier program whose final membership check must pass, V <= Q * M with Q
its query count, which yields

    joint(V1, V2) <= Q1 * joint(M1, V2) <= Q1 * Q2 * joint(M1, M2)

evaluated here exactly, branch by branch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
import structlog

from src.core.errors import PreconditionError
from src.core.metrics import record_check
from src.experiments.seeds import child_rng
from src.gf2.linear import BitVector, Subspace, member, membership_mask
from src.oracles.membership import QueryLog
from src.oracles.programs import run_program
from src.piracy.game import get_protocol, play_pirate
from src.piracy.pirates import get_pirate
from src.piracy.verifiers import get_verifier

logger = structlog.get_logger(__name__)

CHAIN_SLACK = 1e-9


@dataclass(frozen=True)
class PovmVerdict:
    sampled: BitVector | None
    query_index: int | None
    accept: bool


def query_povm_measure(
    log: QueryLog,
    rng: np.random.Generator,
    targets: Mapping[str, Subspace] | None = None,
) -> PovmVerdict:
    """
    One sample of M over a logged run.

    `targets` maps oracle ids to the subspace membership is judged against;
    without it each query is judged against the oracle it was made to.
    Records must carry their input distribution. No queries means reject.
    """
    records = log.records
    if not records:
        return PovmVerdict(sampled=None, query_index=None, accept=False)
    record = records[int(rng.integers(len(records)))]
    if record.distribution is None:
        raise PreconditionError("query log was recorded without input distributions")
    probs = np.clip(record.distribution, 0.0, None)
    index = int(rng.choice(probs.size, p=probs / probs.sum()))
    sampled = BitVector(index, probs.size.bit_length() - 1)
    if targets is None:
        accept = bool(record.member_mask[index])
    elif record.oracle_id in targets:
        accept = member(targets[record.oracle_id], sampled)
    else:
        raise PreconditionError(f"no target subspace for oracle {record.oracle_id!r}")
    return PovmVerdict(sampled=sampled, query_index=record.query_index, accept=accept)


def povm_accept_probability(log: QueryLog, targets: Mapping[str, Subspace] | None = None) -> float:
    """Exact acceptance probability of M: the mean target mass over queries."""
    records = log.records
    if not records:
        return 0.0
    masses = []
    for record in records:
        if targets is None:
            masses.append(record.member_mass)
            continue
        if record.distribution is None:
            raise PreconditionError("query log was recorded without input distributions")
        mask = membership_mask(targets[record.oracle_id])
        masses.append(float(record.distribution[mask].sum()))
    return float(min(1.0, max(0.0, np.mean(masses))))


# ===== Reduction chain =====


@dataclass(frozen=True)
class ReductionChain:
    n: int
    pirate: str
    v1: str
    v2: str
    p1: int
    p2: int
    joint_vv: float
    joint_mv: float
    joint_mm: float

    @property
    def first_holds(self) -> bool:
        return self.joint_vv <= self.p1 * self.joint_mv + CHAIN_SLACK

    @property
    def second_holds(self) -> bool:
        return self.joint_mv <= self.p2 * self.joint_mm + CHAIN_SLACK

    @property
    def holds(self) -> bool:
        return self.first_holds and self.second_holds

    @property
    def chain_bound(self) -> float:
        return self.p1 * self.p2 * self.joint_mm

    def to_row(self) -> dict[str, float | int | str | bool]:
        return {
            "n": self.n,
            "pirate": self.pirate,
            "v1": self.v1,
            "v2": self.v2,
            "p1": self.p1,
            "p2": self.p2,
            "joint_vv": self.joint_vv,
            "joint_mv": self.joint_mv,
            "joint_mm": self.joint_mm,
            "chain_bound": self.chain_bound,
            "holds": self.holds,
        }


def reduction_chain(
    n: int,
    pirate: str,
    v1: str = "vstar",
    v2: str = "vstar",
    *,
    seed: int = 0,
    instances: int = 1,
    protocol: str = "lab",
    budget: int | None = None,
) -> ReductionChain:
    """Evaluate joint(V,V), joint(M,V) and joint(M,M) exactly, averaged over instances."""
    if instances <= 0:
        raise PreconditionError("the reduction chain needs at least one instance")
    prog1 = get_verifier(v1, n)
    prog2 = get_verifier(v2, n)
    strategy = get_pirate(pirate)
    totals = np.zeros(3)
    for i in range(instances):
        rng = child_rng(seed, f"chain|n={n}|pirate={pirate}|v1={v1}|v2={v2}|instance={i}")
        game_round = get_protocol(protocol)(n, rng)
        ensemble, _ = play_pirate(game_round, strategy, rng, budget)
        for weight, state in ensemble.entries:
            run1 = run_program(prog1, state.left, game_round.oracles(), collect_query_grams=True)
            run2 = run_program(prog2, state.right, game_round.oracles(), collect_query_grams=True)
            m1 = run1.povm_gram()
            m2 = run2.povm_gram()
            totals += weight * np.array(
                [
                    state.expectation(run1.accept_gram, run2.accept_gram),
                    state.expectation(m1, run2.accept_gram),
                    state.expectation(m1, m2),
                ]
            )
    vv, mv, mm = np.clip(totals / instances, 0.0, 1.0)
    chain = ReductionChain(
        n=n,
        pirate=pirate,
        v1=v1,
        v2=v2,
        p1=prog1.query_count,
        p2=prog2.query_count,
        joint_vv=float(vv),
        joint_mv=float(mv),
        joint_mm=float(mm),
    )
    record_check("reduction_chain", "pass" if chain.holds else "fail")
    logger.info("reduction_chain_evaluated", **chain.to_row())
    return chain
