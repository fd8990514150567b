"""
Pluggable NP relations for the candidate proof system.

A statement is a relation name plus a string payload; the relation decides
(payload, witness) pairs classically.

- parity: payload is a bit string, the witness lists the positions of its ones,
  and the statement is in L iff that count is even
- 3sat: payload is a CNF as ';'-separated clauses of signed 1-based literals
  ("1 -2 3;-1 2 -3"), the witness is an assignment (sequence of 0/1 per variable)
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import structlog

from src.core.errors import PreconditionError

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class NPStatement:
    relation: str
    payload: str

    def __post_init__(self) -> None:
        get_relation(self.relation).parse(self.payload)

    @property
    def token(self) -> str:
        return f"{self.relation}:{self.payload}"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.token.encode("utf-8")).hexdigest()

    def to_json(self) -> dict[str, str]:
        return {"relation": self.relation, "payload": self.payload}

    @classmethod
    def from_json(cls, payload: dict[str, Any]) -> "NPStatement":
        return cls(relation=str(payload["relation"]), payload=str(payload["payload"]))


@dataclass(frozen=True)
class Relation:
    name: str
    parse: Callable[[str], Any]
    check: Callable[[Any, Any], bool]
    description: str = ""

    def accepts(self, payload: str, witness: Any) -> bool:
        try:
            return bool(self.check(self.parse(payload), witness))
        except (TypeError, ValueError, IndexError):
            return False


_RELATIONS: dict[str, Relation] = {}


def register_relation(relation: Relation) -> Relation:
    _RELATIONS[relation.name] = relation
    return relation


def get_relation(name: str) -> Relation:
    try:
        return _RELATIONS[name]
    except KeyError:
        raise PreconditionError(
            f"unknown relation {name!r}; available: {', '.join(available_relations())}"
        ) from None


def available_relations() -> list[str]:
    return sorted(_RELATIONS)


def relation_holds(statement: NPStatement, witness: Any) -> bool:
    """x in L, certified by `witness`."""
    if witness is None:
        return False
    ok = get_relation(statement.relation).accepts(statement.payload, witness)
    logger.debug("relation_checked", relation=statement.relation, accepted=ok)
    return ok


# ---------------------------------------------------------------------------
# Parity
# ---------------------------------------------------------------------------


def _parse_bits(payload: str) -> tuple[int, ...]:
    if not payload or set(payload) - {"0", "1"}:
        raise PreconditionError(f"parity statement must be a non-empty bit string, got {payload!r}")
    return tuple(int(ch) for ch in payload)


def _check_parity(bits: tuple[int, ...], witness: Sequence[int]) -> bool:
    positions = sorted(int(i) for i in witness)
    ones = [i for i, bit in enumerate(bits) if bit]
    return positions == ones and len(ones) % 2 == 0


register_relation(
    Relation("parity", _parse_bits, _check_parity, "bit string with an even number of ones")
)


# ---------------------------------------------------------------------------
# 3-SAT
# ---------------------------------------------------------------------------


def _parse_cnf(payload: str) -> tuple[tuple[int, ...], ...]:
    clauses = []
    for raw in payload.split(";"):
        literals = tuple(int(tok) for tok in raw.split())
        if not 1 <= len(literals) <= 3 or 0 in literals:
            raise PreconditionError(f"malformed 3-CNF clause {raw!r}")
        clauses.append(literals)
    if not clauses:
        raise PreconditionError("empty 3-CNF formula")
    return tuple(clauses)


def _check_assignment(clauses: tuple[tuple[int, ...], ...], witness: Sequence[int]) -> bool:
    values = [bool(int(v)) for v in witness]
    needed = max(abs(lit) for clause in clauses for lit in clause)
    if len(values) < needed:
        return False
    return all(any(values[abs(lit) - 1] == (lit > 0) for lit in clause) for clause in clauses)


register_relation(
    Relation("3sat", _parse_cnf, _check_assignment, "3-CNF formula with an explicit satisfying assignment")
)
