"""
The anti-piracy game: generator -> honest prover -> pirate -> two verifiers.

- A protocol adapter samples one instance and hands out its statement, the
  honest proof and fresh oracle sets (the pirate and each verifier get their
  own instances so query counts stay separate)
- The pirate maps the proof to an Ensemble of two-register states
- Each branch is scored exactly: both verifier programs run on the term
  vectors of their register, and the joint (1,1) probability is the Gram
  contraction of the two effective accept operators

Exact mode scores `exact_instances` generator draws branch-exactly. When every
draw gives the same value the outcome is exact; otherwise it is reported as an
`instance_average` with a t interval over the draws. Monte-Carlo mode samples
an instance, a pirate branch and a joint verdict per trial and reports a
Wilson interval.
"""

from __future__ import annotations

import importlib
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
import structlog
from joblib import Parallel, delayed

from src.core.config import get_settings
from src.core.errors import PreconditionError
from src.experiments.seeds import child_rng
from src.gf2.linear import BitVector
from src.oracles.membership import MembershipOracle, QueryLog
from src.oracles.programs import VerifierProgram, run_program
from src.piracy.pirates import PirateSetup, PirateStrategy, get_pirate
from src.piracy.stats import draw_interval, wilson_interval
from src.piracy.verifiers import get_verifier
from src.protocol.instances import generator_G
from src.protocol.vstar import honest_prove
from src.statesim.states import BipartiteState, Ensemble, PureState, check_qubit_cap

logger = structlog.get_logger(__name__)

MC_CHUNK_SIZE = 500
GAME_MODES = ("auto", "exact", "monte_carlo")
INSTANCE_AVERAGE = "instance_average"


# ===== Protocol adapters =====


OracleFactory = Callable[..., dict[str, MembershipOracle]]


@dataclass
class GameRound:
    """One sampled instance as seen by the game."""

    n: int
    x: BitVector
    proof: PureState
    oracle_factory: OracleFactory
    illicit_copy: PureState | None = None
    admitted: bool = True
    instance_id: str = ""
    notes: tuple[str, ...] = ()

    def oracles(self, **kwargs: Any) -> dict[str, MembershipOracle]:
        return self.oracle_factory(**kwargs)


RoundFactory = Callable[[int, np.random.Generator], GameRound]

_PROTOCOLS: dict[str, RoundFactory] = {}
_PROTOCOL_PLUGINS = {"npcand": "src.npcand.candidate"}


def register_protocol(name: str) -> Callable[[RoundFactory], RoundFactory]:
    def decorator(factory: RoundFactory) -> RoundFactory:
        _PROTOCOLS[name] = factory
        return factory

    return decorator


def get_protocol(name: str) -> RoundFactory:
    if name in _PROTOCOL_PLUGINS and name not in _PROTOCOLS:
        importlib.import_module(_PROTOCOL_PLUGINS[name])
    try:
        return _PROTOCOLS[name]
    except KeyError:
        raise PreconditionError(f"unknown protocol {name!r}") from None


@register_protocol("lab")
def lab_round(n: int, rng: np.random.Generator) -> GameRound:
    inst = generator_G(n, rng)
    if inst is None:
        raise PreconditionError(f"the generator has no instances at n={n}")

    def _oracles(**kwargs: Any) -> dict[str, MembershipOracle]:
        return {
            "A": MembershipOracle(inst.A, "A", **kwargs),
            "B": MembershipOracle(inst.B, "B", **kwargs),
        }

    proof = honest_prove(inst)
    return GameRound(
        n=n,
        x=BitVector.zero(n),
        proof=proof,
        oracle_factory=_oracles,
        illicit_copy=proof,
        instance_id=inst.instance_id,
    )


# ===== Outcomes =====


@dataclass(frozen=True)
class GameOutcome:
    n: int
    pirate: str
    v1: str
    v2: str
    protocol: str
    mode: str
    trials: int
    joint_accept: float
    ci_low: float
    ci_high: float
    queries: int
    legal: bool
    successes: int | None = None
    notes: tuple[str, ...] = field(default_factory=tuple)
    # standard error across instance draws, set for instance averages
    draw_sigma: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.ci_low <= self.joint_accept <= self.ci_high <= 1.0:
            raise PreconditionError(
                f"inconsistent outcome: {self.ci_low} <= {self.joint_accept} <= {self.ci_high}"
            )

    def to_row(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "pirate": self.pirate,
            "v1": self.v1,
            "v2": self.v2,
            "trials": self.trials,
            "joint_accept": self.joint_accept,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "queries": self.queries,
        }


# ===== Scoring =====


def branch_joint(
    state: BipartiteState,
    v1: VerifierProgram,
    v2: VerifierProgram,
    game_round: GameRound,
) -> float:
    """Exact Pr[(V1 (x) V2) accepts] on one two-register pure state."""
    if not game_round.admitted:
        return 0.0
    run1 = run_program(v1, state.left, game_round.oracles())
    run2 = run_program(v2, state.right, game_round.oracles())
    return float(min(1.0, max(0.0, state.expectation(run1.accept_gram, run2.accept_gram))))


def ensemble_joint(
    ensemble: Ensemble,
    v1: VerifierProgram,
    v2: VerifierProgram,
    game_round: GameRound,
) -> float:
    return float(sum(w * branch_joint(s, v1, v2, game_round) for w, s in ensemble.entries))


def play_pirate(
    game_round: GameRound,
    pirate: PirateStrategy,
    rng: np.random.Generator,
    budget: int | None,
) -> tuple[Ensemble, PirateSetup]:
    setup = PirateSetup(
        n=game_round.n,
        x=game_round.x,
        proof=game_round.proof,
        oracles=game_round.oracles(log=QueryLog(), record_distribution=True, budget=budget),
        budget=budget,
        rng=rng,
        illicit_copy=game_round.illicit_copy,
    )
    return pirate.run(setup), setup


def _chunk_key(n: int, pirate: str, v1: str, v2: str, protocol: str, mode: str, index: int) -> str:
    return (
        f"game|n={n}|pirate={pirate}|v1={v1}|v2={v2}"
        f"|protocol={protocol}|mode={mode}|chunk={index}"
    )


def _exact_unit(
    n: int,
    pirate_name: str,
    v1_name: str,
    v2_name: str,
    protocol: str,
    budget: int | None,
    seed: int,
    index: int,
) -> tuple[float, int]:
    rng = child_rng(seed, _chunk_key(n, pirate_name, v1_name, v2_name, protocol, "exact", index))
    game_round = get_protocol(protocol)(n, rng)
    ensemble, setup = play_pirate(game_round, get_pirate(pirate_name), rng, budget)
    value = ensemble_joint(ensemble, get_verifier(v1_name, n), get_verifier(v2_name, n), game_round)
    return value, setup.queries_made


def _monte_carlo_unit(
    n: int,
    pirate_name: str,
    v1_name: str,
    v2_name: str,
    protocol: str,
    budget: int | None,
    seed: int,
    index: int,
    count: int,
) -> tuple[int, int]:
    key = _chunk_key(n, pirate_name, v1_name, v2_name, protocol, "monte_carlo", index)
    rng = child_rng(seed, key)
    pirate = get_pirate(pirate_name)
    v1 = get_verifier(v1_name, n)
    v2 = get_verifier(v2_name, n)
    round_factory = get_protocol(protocol)
    successes = 0
    queries = 0
    for _ in range(count):
        game_round = round_factory(n, rng)
        ensemble, setup = play_pirate(game_round, pirate, rng, budget)
        branch = ensemble.sample(rng)
        joint = branch_joint(branch, v1, v2, game_round)
        successes += int(rng.random() < joint)
        queries += setup.queries_made
    return successes, queries


def _resolve_mode(mode: str, n: int) -> str:
    if mode not in GAME_MODES:
        raise PreconditionError(f"unknown game mode {mode!r}")
    if mode != "auto":
        return mode
    return "exact" if 2 * n <= get_settings().joint_cap_qubits else "monte_carlo"


def run_piracy_game(
    n: int,
    pirate: str,
    v1: str = "vstar",
    v2: str = "vstar",
    trials: int = 1000,
    seed: int = 0,
    *,
    mode: str = "auto",
    exact_instances: int = 4,
    jobs: int | None = None,
    protocol: str = "lab",
    budget: int | None = None,
) -> GameOutcome:
    if trials <= 0:
        raise PreconditionError("a piracy game needs at least one trial")
    resolved = _resolve_mode(mode, n)
    strategy = get_pirate(pirate)
    get_verifier(v1, n)
    get_verifier(v2, n)
    jobs = get_settings().default_jobs if jobs is None else jobs
    notes: list[str] = []
    if not strategy.legal:
        notes.append("illegal-baseline")
    if protocol == "npcand":
        notes.append("idealized-primitive mode")

    if resolved == "exact":
        check_qubit_cap(2 * n, joint=True)
        if exact_instances <= 0:
            raise PreconditionError("exact mode needs at least one instance")
        results = Parallel(n_jobs=jobs)(
            delayed(_exact_unit)(n, pirate, v1, v2, protocol, budget, seed, i)
            for i in range(exact_instances)
        )
        values = [v for v, _ in results]
        if max(values) - min(values) <= get_settings().tolerance:
            value = float(np.mean(values))
            resolved, low, high, sigma = "exact", value, value, 0.0
        else:
            # the value depends on the instance or the pirate's randomness
            value, low, high, sigma = draw_interval(values)
            resolved = INSTANCE_AVERAGE
            notes.append("instance-dependent")
            logger.warning(
                "exact_value_varies_across_instances",
                n=n,
                pirate=pirate,
                draws=len(values),
                spread=max(values) - min(values),
            )
        outcome = GameOutcome(
            n=n,
            pirate=pirate,
            v1=v1,
            v2=v2,
            protocol=protocol,
            mode=resolved,
            trials=exact_instances,
            joint_accept=value,
            ci_low=min(low, value),
            ci_high=max(high, value),
            queries=sum(q for _, q in results),
            legal=strategy.legal,
            notes=tuple(notes),
            draw_sigma=sigma,
        )
    else:
        chunks = [
            (i, min(MC_CHUNK_SIZE, trials - start))
            for i, start in enumerate(range(0, trials, MC_CHUNK_SIZE))
        ]
        results = Parallel(n_jobs=jobs)(
            delayed(_monte_carlo_unit)(n, pirate, v1, v2, protocol, budget, seed, i, count)
            for i, count in chunks
        )
        successes = sum(s for s, _ in results)
        estimate = successes / trials
        low, high = wilson_interval(successes, trials)
        outcome = GameOutcome(
            n=n,
            pirate=pirate,
            v1=v1,
            v2=v2,
            protocol=protocol,
            mode="monte_carlo",
            trials=trials,
            joint_accept=estimate,
            ci_low=min(low, estimate),
            ci_high=max(high, estimate),
            queries=sum(q for _, q in results),
            legal=strategy.legal,
            successes=successes,
            notes=tuple(notes),
        )

    logger.info(
        "piracy_game_completed",
        n=n,
        pirate=pirate,
        v1=v1,
        v2=v2,
        mode=outcome.mode,
        joint_accept=outcome.joint_accept,
        ci_low=outcome.ci_low,
        ci_high=outcome.ci_high,
    )
    return outcome


def monte_carlo_sigma(outcome: GameOutcome) -> float:
    """
    Standard error of an outcome: binomial for Monte-Carlo, the spread across
    draws for instance averages, 0 when exact.
    """
    if outcome.mode == INSTANCE_AVERAGE:
        return outcome.draw_sigma
    if outcome.mode != "monte_carlo":
        return 0.0
    p = outcome.joint_accept
    return math.sqrt(max(p * (1 - p), 1.0 / outcome.trials) / outcome.trials)
