"""
Counterfeiting experiments: output a pair (a, b) with a in A and b in dual(A)
from one copy of |A> and q queries to the dual-subspace oracle.

Attack families:
- measure-and-guess: measure |A> for a, spend q checked uniform guesses on b
- grover-search: measure |A> for a, amplitude-amplify a dual member for b
- both-copies: illegal baseline handed |A> and |dual(A)>

The reference curve sin^2(min(pi/2, (2q+1) asin(2^{-n/4}))) is the optimal
unstructured-search envelope for the dual set; points are charted against it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import structlog
from joblib import Parallel, delayed

from src.core.config import get_settings
from src.core.errors import PreconditionError
from src.experiments.seeds import child_rng
from src.gf2.linear import BitVector, member, membership_mask
from src.oracles.membership import MembershipOracle
from src.piracy.stats import draw_interval, wilson_interval
from src.protocol.instances import Instance, generator_G
from src.statesim.states import check_qubit_cap, subspace_state, walsh_hadamard

logger = structlog.get_logger(__name__)

PREDICATES = ("pair", "nonzero")
COUNTERFEIT_MODES = ("exact", "monte_carlo")
MC_CHUNK_SIZE = 1000


def reference_curve(n: int, q: int) -> float:
    theta = math.asin(2.0 ** (-n / 4))
    return math.sin(min(math.pi / 2, (2 * q + 1) * theta)) ** 2


def _success(inst: Instance, a: int, b: int, predicate: str) -> bool:
    ok = member(inst.A, BitVector(a, inst.n)) and member(inst.B, BitVector(b, inst.n))
    if predicate == "nonzero":
        ok = ok and a != 0 and b != 0
    return ok


def _measure_honest_state(inst: Instance, rng: np.random.Generator) -> int:
    probs = subspace_state(inst.A).probabilities()
    return int(rng.choice(probs.size, p=probs))


def _grover_amplitudes(oracle: MembershipOracle, n: int, q: int) -> np.ndarray:
    """q rounds of phase oracle plus diffusion, starting from the uniform state."""
    dim = 1 << n
    psi = np.full(dim, dim ** -0.5, dtype=np.complex128)
    minus = np.array([1.0, -1.0]) / math.sqrt(2.0)
    for _ in range(q):
        flagged = oracle.apply_array(np.kron(minus, psi))
        psi = (flagged[:dim] - flagged[dim:]) / math.sqrt(2.0)
        psi = 2.0 * psi.mean() - psi
    return psi


# ===== Attack families =====


@dataclass(frozen=True)
class CounterfeitAttack:
    name: str
    sample: Callable[[Instance, int, str, np.random.Generator], tuple[int, int, int]]
    exact: Callable[[Instance, int, str], float]
    closed_form: Callable[[int, int, str], float | None]
    legal: bool = True


def _guess_probability(n: int, predicate: str) -> float:
    half = 2 ** (n // 2)
    if predicate == "nonzero":
        return (half - 1) / ((1 << n) - 1)
    return half / (1 << n)


def _guess(n: int, predicate: str, rng: np.random.Generator) -> int:
    low = 1 if predicate == "nonzero" else 0
    return int(rng.integers(low, 1 << n))


def _measure_and_guess_sample(
    inst: Instance, q: int, predicate: str, rng: np.random.Generator
) -> tuple[int, int, int]:
    a = _measure_honest_state(inst, rng)
    oracle = MembershipOracle(inst.B, "B", budget=q)
    if q == 0:
        return a, _guess(inst.n, predicate, rng), 0
    b = 0
    for _ in range(q):
        b = _guess(inst.n, predicate, rng)
        if oracle.classical_query(b):
            break
    return a, b, oracle.query_count


def _measure_and_guess_closed(n: int, q: int, predicate: str) -> float:
    p = _guess_probability(n, predicate)
    b_ok = p if q == 0 else 1.0 - (1.0 - p) ** q
    a_ok = 1.0 - 2.0 ** (-n / 2) if predicate == "nonzero" else 1.0
    return a_ok * b_ok


def _measure_and_guess_exact(inst: Instance, q: int, predicate: str) -> float:
    dim = 1 << inst.n
    members_b = int(membership_mask(inst.B).sum())
    members_a = int(membership_mask(inst.A).sum())
    if predicate == "nonzero":
        p = (members_b - 1) / (dim - 1)
        a_ok = (members_a - 1) / members_a
    else:
        p = members_b / dim
        a_ok = 1.0
    return a_ok * (p if q == 0 else 1.0 - (1.0 - p) ** q)


def _grover_b_distribution(inst: Instance, q: int) -> tuple[np.ndarray, int]:
    oracle = MembershipOracle(inst.B, "B", budget=q)
    psi = _grover_amplitudes(oracle, inst.n, q)
    probs = np.abs(psi) ** 2
    return probs / probs.sum(), oracle.query_count


def _grover_sample(inst: Instance, q: int, predicate: str, rng: np.random.Generator) -> tuple[int, int, int]:
    a = _measure_honest_state(inst, rng)
    probs, used = _grover_b_distribution(inst, q)
    return a, int(rng.choice(probs.size, p=probs)), used


def _grover_exact(inst: Instance, q: int, predicate: str) -> float:
    probs, _ = _grover_b_distribution(inst, q)
    mask = membership_mask(inst.B)
    if predicate == "nonzero":
        mask = mask.copy()
        mask[0] = False
        members_a = int(membership_mask(inst.A).sum())
        return (members_a - 1) / members_a * float(probs[mask].sum())
    return float(probs[mask].sum())


def _grover_closed(n: int, q: int, predicate: str) -> float | None:
    if predicate != "pair":
        return None
    theta = math.asin(2.0 ** (-n / 4))
    return math.sin((2 * q + 1) * theta) ** 2


def _both_copies_sample(inst: Instance, q: int, predicate: str, rng: np.random.Generator) -> tuple[int, int, int]:
    a = _measure_honest_state(inst, rng)
    dual_probs = np.abs(walsh_hadamard(subspace_state(inst.A).amplitudes)) ** 2
    b = int(rng.choice(dual_probs.size, p=dual_probs / dual_probs.sum()))
    return a, b, 0


def _both_copies_exact(inst: Instance, q: int, predicate: str) -> float:
    if predicate == "nonzero":
        members = 2 ** inst.A.dim
        return ((members - 1) / members) * ((2 ** inst.B.dim - 1) / 2 ** inst.B.dim)
    return 1.0


def _both_copies_closed(n: int, q: int, predicate: str) -> float:
    return (1.0 - 2.0 ** (-n / 2)) ** 2 if predicate == "nonzero" else 1.0


ATTACKS: dict[str, CounterfeitAttack] = {
    "measure-and-guess": CounterfeitAttack(
        "measure-and-guess", _measure_and_guess_sample, _measure_and_guess_exact, _measure_and_guess_closed
    ),
    "grover-search": CounterfeitAttack("grover-search", _grover_sample, _grover_exact, _grover_closed),
    "both-copies": CounterfeitAttack(
        "both-copies", _both_copies_sample, _both_copies_exact, _both_copies_closed, legal=False
    ),
}


def get_attack(name: str) -> CounterfeitAttack:
    try:
        return ATTACKS[name]
    except KeyError:
        raise PreconditionError(f"unknown attack {name!r}; available: {', '.join(sorted(ATTACKS))}") from None


# ===== Experiment =====


@dataclass(frozen=True)
class CounterfeitPoint:
    q: int
    successes: int | None
    trials: int
    rate: float
    ci_low: float
    ci_high: float
    closed_form: float | None
    reference: float
    queries: int = 0

    @property
    def below_reference(self) -> bool:
        return self.ci_low <= self.reference + 1e-12

    @property
    def matches_closed_form(self) -> bool | None:
        if self.closed_form is None:
            return None
        return self.ci_low - 1e-9 <= self.closed_form <= self.ci_high + 1e-9


@dataclass(frozen=True)
class CounterfeitCurve:
    n: int
    attack: str
    predicate: str
    mode: str
    legal: bool
    points: tuple[CounterfeitPoint, ...] = field(default_factory=tuple)

    def to_rows(self) -> list[dict[str, object]]:
        return [
            {
                "n": self.n,
                "attack": self.attack,
                "predicate": self.predicate,
                "q": p.q,
                "trials": p.trials,
                "rate": p.rate,
                "ci_low": p.ci_low,
                "ci_high": p.ci_high,
                "closed_form": p.closed_form,
                "reference": p.reference,
            }
            for p in self.points
        ]


def _instance(n: int, rng: np.random.Generator) -> Instance:
    inst = generator_G(n, rng)
    if inst is None:
        raise PreconditionError(f"no instances at n={n}")
    return inst


def _mc_chunk(n: int, attack_name: str, q: int, predicate: str, seed: int, index: int, count: int) -> tuple[int, int]:
    rng = child_rng(seed, f"counterfeit|n={n}|attack={attack_name}|predicate={predicate}|q={q}|chunk={index}")
    attack = get_attack(attack_name)
    successes = 0
    queries = 0
    for _ in range(count):
        inst = _instance(n, rng)
        a, b, used = attack.sample(inst, q, predicate, rng)
        successes += int(_success(inst, a, b, predicate))
        queries += used
    return successes, queries


def _exact_unit(n: int, attack_name: str, q: int, predicate: str, seed: int, index: int) -> float:
    rng = child_rng(seed, f"counterfeit|n={n}|attack={attack_name}|predicate={predicate}|q={q}|instance={index}")
    return get_attack(attack_name).exact(_instance(n, rng), q, predicate)


def counterfeit_experiment(
    n: int,
    attack: str,
    query_budgets: Sequence[int],
    trials: int,
    seed: int = 0,
    *,
    mode: str = "monte_carlo",
    predicate: str = "pair",
    jobs: int | None = None,
) -> CounterfeitCurve:
    """
    Success rate per query budget.

    Monte-Carlo mode draws a fresh instance per trial and reports Wilson
    intervals. Exact mode evaluates `trials` instances exactly; agreeing values
    give a zero-width interval, differing ones a t interval over the instances.
    """
    strategy = get_attack(attack)
    if mode not in COUNTERFEIT_MODES:
        raise PreconditionError(f"unknown counterfeit mode {mode!r}")
    if predicate not in PREDICATES:
        raise PreconditionError(f"unknown success predicate {predicate!r}")
    if trials <= 0:
        raise PreconditionError("a counterfeit experiment needs at least one trial")
    if any(q < 0 for q in query_budgets):
        raise PreconditionError("query budgets must be non-negative")
    check_qubit_cap(n + 1)
    jobs = get_settings().default_jobs if jobs is None else jobs

    points = []
    for q in sorted(set(query_budgets)):
        closed = strategy.closed_form(n, q, predicate)
        reference = reference_curve(n, q)
        if mode == "exact":
            values = Parallel(n_jobs=jobs)(
                delayed(_exact_unit)(n, attack, q, predicate, seed, i) for i in range(trials)
            )
            if max(values) - min(values) <= get_settings().tolerance:
                rate = float(np.mean(values))
                low = high = rate
            else:
                rate, low, high, _ = draw_interval(values)
                logger.warning(
                    "exact_rate_varies_across_instances", n=n, attack=attack, q=q, draws=len(values)
                )
            points.append(
                CounterfeitPoint(q, None, trials, rate, min(low, rate), max(high, rate), closed, reference)
            )
            continue
        chunks = [(i, min(MC_CHUNK_SIZE, trials - s)) for i, s in enumerate(range(0, trials, MC_CHUNK_SIZE))]
        results = Parallel(n_jobs=jobs)(
            delayed(_mc_chunk)(n, attack, q, predicate, seed, i, count) for i, count in chunks
        )
        successes = sum(s for s, _ in results)
        rate = successes / trials
        low, high = wilson_interval(successes, trials)
        points.append(
            CounterfeitPoint(
                q,
                successes,
                trials,
                rate,
                min(low, rate),
                max(high, rate),
                closed,
                reference,
                queries=sum(u for _, u in results),
            )
        )
        logger.debug("counterfeit_point", n=n, attack=attack, q=q, rate=rate, closed_form=closed)

    curve = CounterfeitCurve(n, attack, predicate, mode, strategy.legal, tuple(points))
    logger.info("counterfeit_curve_completed", n=n, attack=attack, budgets=len(points), mode=mode)
    return curve
