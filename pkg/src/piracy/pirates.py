"""
Built-in pirate strategies.

A pirate receives one proof register plus oracle access and returns an
Ensemble of two-register pure states. Branch weights come from the pirate's
own measurements; any coins it flips are drawn from `setup.rng`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import structlog

from src.core.errors import PreconditionError
from src.gf2.linear import BitVector
from src.oracles.membership import MembershipOracle, with_flag
from src.statesim.states import BipartiteState, Ensemble, PureState, basis_state, zero_state

logger = structlog.get_logger(__name__)

BRANCH_EPSILON = 1e-15


@dataclass
class PirateSetup:
    """Everything a pirate sees for one instance."""

    n: int
    x: BitVector
    proof: PureState
    oracles: dict[str, MembershipOracle]
    budget: int | None
    rng: np.random.Generator
    illicit_copy: PureState | None = None

    def oracle(self, slot: str) -> MembershipOracle:
        try:
            return self.oracles[slot]
        except KeyError:
            raise PreconditionError(f"pirate has no oracle in slot {slot!r}") from None

    @property
    def queries_made(self) -> int:
        return sum(o.query_count for o in self.oracles.values())


PirateProgram = Callable[[PirateSetup], Ensemble]


@dataclass(frozen=True)
class PirateStrategy:
    name: str
    program: PirateProgram
    legal: bool = True
    description: str = ""

    def run(self, setup: PirateSetup) -> Ensemble:
        return self.program(setup)


_PIRATES: dict[str, PirateStrategy] = {}


def register_pirate(
    name: str,
    *,
    legal: bool = True,
    description: str = "",
) -> Callable[[PirateProgram], PirateProgram]:
    def decorator(program: PirateProgram) -> PirateProgram:
        _PIRATES[name] = PirateStrategy(name, program, legal, description)
        return program

    return decorator


def get_pirate(name: str) -> PirateStrategy:
    try:
        return _PIRATES[name]
    except KeyError:
        raise PreconditionError(f"unknown pirate {name!r}; available: {', '.join(sorted(_PIRATES))}") from None


def available_pirates(legal_only: bool = False) -> list[str]:
    return sorted(name for name, p in _PIRATES.items() if p.legal or not legal_only)


def copy_in_basis(amplitudes: np.ndarray, n: int) -> BipartiteState:
    """sum_x a_x |x>|x> for a normalized amplitude vector (transversal CNOT copy)."""
    support = np.flatnonzero(np.abs(amplitudes) > BRANCH_EPSILON)
    eye = np.zeros((support.size, 1 << n), dtype=np.complex128)
    eye[np.arange(support.size), support] = 1.0
    return BipartiteState(n, amplitudes[support], eye, eye)


# ===== Strategies =====


@register_pirate("forward-and-pad", description="proof to register 1, |0^n> to register 2")
def forward_and_pad(setup: PirateSetup) -> Ensemble:
    return Ensemble.pure(BipartiteState.product(setup.proof, zero_state(setup.n)))


@register_pirate("measure-resend", description="measure in the computational basis, send |a>|a>")
def measure_resend(setup: PirateSetup) -> Ensemble:
    probs = setup.proof.probabilities()
    support = np.flatnonzero(probs > BRANCH_EPSILON)
    weights = probs[support] / probs[support].sum()
    entries = []
    for weight, index in zip(weights, support):
        a = basis_state(setup.n, int(index))
        entries.append((float(weight), BipartiteState.product(a, a)))
    return Ensemble(tuple(entries))


@register_pirate("coherent-copy", description="one coherent A-query, then a transversal copy")
def coherent_copy(setup: PirateSetup) -> Ensemble:
    oracle = setup.oracle("A")
    dim = 1 << setup.n
    out = oracle.apply_array(with_flag(setup.proof).amplitudes)
    entries = []
    for flag in (1, 0):
        branch = out[flag * dim:(flag + 1) * dim]
        weight = float(np.vdot(branch, branch).real)
        if weight <= BRANCH_EPSILON:
            continue
        entries.append((weight, copy_in_basis(branch / np.sqrt(weight), setup.n)))
    total = sum(w for w, _ in entries)
    return Ensemble(tuple((w / total, s) for w, s in entries))


@register_pirate("membership-probe", description="classical random probes of the A oracle")
def membership_probe(setup: PirateSetup) -> Ensemble:
    oracle = setup.oracle("A")
    found = 0
    probes = setup.budget if setup.budget is not None else setup.n
    for _ in range(probes):
        candidate = int(setup.rng.integers(1, 1 << setup.n))
        if oracle.classical_query(candidate):
            found = candidate
            break
    logger.debug("membership_probe_finished", queries=oracle.query_count, found=found != 0)
    return Ensemble.pure(BipartiteState.product(setup.proof, basis_state(setup.n, found)))


@register_pirate("oracle-cheat", legal=False, description="handed a second honest copy")
def oracle_cheat(setup: PirateSetup) -> Ensemble:
    if setup.illicit_copy is None:
        raise PreconditionError("oracle-cheat needs an illicit second copy of the proof")
    return Ensemble.pure(BipartiteState.product(setup.proof, setup.illicit_copy))
