"""
Oracle-replacement hybrids.

A program is run twice on the same proof: once with the original oracle in one
slot, once with a smaller subspace in its place. The original run logs every
query's mass on the difference set, and the acceptance gap is checked against
the sum of 2 * sqrt(mass) over those queries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import structlog

from src.core.errors import PreconditionError
from src.core.metrics import record_check
from src.gf2.linear import Subspace, is_subspace_of
from src.oracles.membership import MassSet, MembershipOracle, QueryLog
from src.oracles.programs import VerifierProgram, run_program
from src.statesim.states import PureState

logger = structlog.get_logger(__name__)

HYBRID_SLACK = 1e-6


@dataclass
class HybridReport:
    slot: str
    prob_original: float
    prob_replaced: float
    per_query_masses: list[float] = field(default_factory=list)
    log: QueryLog | None = field(default=None, repr=False)

    @property
    def gap(self) -> float:
        return abs(self.prob_original - self.prob_replaced)

    @property
    def bound(self) -> float:
        return sum(2.0 * math.sqrt(max(0.0, m)) for m in self.per_query_masses)

    @property
    def within_bound(self) -> bool:
        return self.gap <= self.bound + HYBRID_SLACK


def difference_mass_set(slot: str, original: Subspace, replacement: Subspace) -> MassSet:
    return MassSet(f"{slot}\\{slot}'", support=original, excluded=replacement)


def replace_oracle_hybrid(
    program: VerifierProgram,
    proof: PureState,
    oracle_subspaces: Mapping[str, Subspace],
    slot: str,
    replacement: Subspace,
    *,
    trial: int = 0,
) -> HybridReport:
    """
    Run `program` with the oracle in `slot` as given and again with `replacement`.

    Either slot may be replaced; masses are reported raw.
    """
    if slot not in oracle_subspaces:
        raise PreconditionError(f"no oracle bound to slot {slot!r}")
    original = oracle_subspaces[slot]
    if not is_subspace_of(replacement, original):
        raise PreconditionError(f"replacement for slot {slot} is not contained in the original subspace")

    log = QueryLog(trial=trial)
    mass_set = difference_mass_set(slot, original, replacement)
    logged = {
        name: MembershipOracle(
            s,
            name,
            log=log if name == slot else None,
            mass_sets=(mass_set,) if name == slot else (),
        )
        for name, s in oracle_subspaces.items()
    }
    swapped = {
        name: MembershipOracle(replacement if name == slot else s, name)
        for name, s in oracle_subspaces.items()
    }

    prob_original = float(run_program(program, proof, logged).accept_probabilities[0])
    prob_replaced = float(run_program(program, proof, swapped).accept_probabilities[0])
    report = HybridReport(
        slot=slot,
        prob_original=prob_original,
        prob_replaced=prob_replaced,
        per_query_masses=log.masses_for(mass_set.mass_set_id, oracle_id=slot),
        log=log,
    )
    outcome = "pass" if report.within_bound else "fail"
    record_check("hybrid_bound", outcome)
    logger.debug(
        "hybrid_evaluated",
        program=program.name,
        slot=slot,
        gap=report.gap,
        bound=report.bound,
        outcome=outcome,
    )
    return report
