"""
Coherent membership oracles with query counting and mass instrumentation.

Register layout: an oracle over F_2^n acts on n input qubits plus one flag
qubit, and the flag is the highest qubit, so amplitude index = x + 2^n * flag.
An array of shape (..., 2^(n+1)) is one deferred-measurement state whose
leading axes hold orthogonal branches; masses are summed over all of them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import pandas as pd
import structlog

from src.core.errors import DimensionMismatchError, PreconditionError, QueryBudgetError
from src.core.metrics import record_query
from src.gf2.linear import Subspace, membership_mask
from src.statesim.states import PureState, check_qubit_cap

logger = structlog.get_logger(__name__)

MASS_TOLERANCE = 1e-9
QUERY_LOG_COLUMNS = ["trial", "query_index", "oracle_id", "mass_set_id", "mass"]
# mass_set_id of the oracle's own member set in exported frames
MEMBER_MASS_ID = "member"


@dataclass(frozen=True)
class MassSet:
    """members(support) minus members(excluded), identified by `mass_set_id`."""

    mass_set_id: str
    support: Subspace
    excluded: Subspace | None = None
    mask: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.excluded is not None and self.excluded.ambient_dim != self.support.ambient_dim:
            raise DimensionMismatchError("mass-set subspaces live in different ambient spaces")
        mask = membership_mask(self.support)
        if self.excluded is not None:
            mask &= ~membership_mask(self.excluded)
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @property
    def ambient_dim(self) -> int:
        return self.support.ambient_dim


def _input_probabilities(amplitudes: np.ndarray, n: int) -> np.ndarray:
    """Marginal distribution of the n input qubits, flag and branches summed out."""
    probs = np.abs(np.asarray(amplitudes)) ** 2
    width = probs.shape[-1]
    if width == 1 << (n + 1):
        probs = probs.reshape(probs.shape[:-1] + (2, 1 << n))
    elif width != 1 << n:
        raise DimensionMismatchError(f"state of width {width} does not carry an {n}-qubit input register")
    return probs.reshape(-1, 1 << n).sum(axis=0)


def query_mass(psi: PureState | np.ndarray, mass_set: MassSet) -> float:
    """Squared-amplitude mass of the input register on the mass set."""
    amps = psi.amplitudes if isinstance(psi, PureState) else psi
    probs = _input_probabilities(amps, mass_set.ambient_dim)
    return float(probs[mass_set.mask].sum())


@dataclass(frozen=True)
class QueryRecord:
    trial: int
    query_index: int
    oracle_id: str
    masses: Mapping[str, float]
    member_mass: float
    distribution: np.ndarray | None = field(default=None, repr=False, compare=False)
    member_mask: np.ndarray | None = field(default=None, repr=False, compare=False)


def _masses_of(record: QueryRecord, include_member: bool) -> list[tuple[str, float]]:
    masses = list(record.masses.items())
    if include_member:
        masses.append((MEMBER_MASS_ID, record.member_mass))
    return masses


class QueryLog:
    """Append-only record of oracle queries."""

    def __init__(self, trial: int = 0) -> None:
        self.trial = trial
        self._records: list[QueryRecord] = []

    def append(self, record: QueryRecord) -> None:
        for name, mass in record.masses.items():
            if not -MASS_TOLERANCE <= mass <= 1.0 + MASS_TOLERANCE:
                raise PreconditionError(f"mass {name}={mass:.12g} outside [0, 1]")
        self._records.append(record)

    @property
    def records(self) -> tuple[QueryRecord, ...]:
        return tuple(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def next_index(self) -> int:
        return len(self._records)

    def masses_for(self, mass_set_id: str, oracle_id: str | None = None) -> list[float]:
        return [
            r.masses[mass_set_id]
            for r in self._records
            if mass_set_id in r.masses and (oracle_id is None or r.oracle_id == oracle_id)
        ]

    def to_frame(self, include_member: bool = False) -> pd.DataFrame:
        """One row per (query, mass set); `include_member` adds the oracle's own set."""
        rows = [
            {
                "trial": r.trial,
                "query_index": r.query_index,
                "oracle_id": r.oracle_id,
                "mass_set_id": name,
                "mass": mass,
            }
            for r in self._records
            for name, mass in _masses_of(r, include_member)
        ]
        return pd.DataFrame(rows, columns=QUERY_LOG_COLUMNS)

    @staticmethod
    def concat(logs: Iterable["QueryLog"]) -> pd.DataFrame:
        frames = [log.to_frame() for log in logs]
        if not frames:
            return pd.DataFrame(columns=QUERY_LOG_COLUMNS)
        return pd.concat(frames, ignore_index=True)

    def to_csv(self, path: str | Path) -> Path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(target, index=False, float_format="%.12g")
        return target


class MembershipOracle:
    """
    O_S |x>|b> = |x>|b xor [x in S]>.

    One instance is single-writer: `query_count` and the log are mutated on
    every application. Parallel trials build their own instances.
    """

    def __init__(
        self,
        subspace: Subspace,
        oracle_id: str = "A",
        *,
        log: QueryLog | None = None,
        mass_sets: Iterable[MassSet] = (),
        record_distribution: bool = False,
        budget: int | None = None,
    ) -> None:
        self._subspace: Subspace | None = subspace
        self._init(
            membership_mask(subspace),
            subspace.ambient_dim,
            oracle_id,
            log,
            mass_sets,
            record_distribution,
            budget,
        )

    @classmethod
    def from_mask(
        cls,
        mask: np.ndarray,
        ambient_dim: int,
        oracle_id: str,
        *,
        log: QueryLog | None = None,
        mass_sets: Iterable[MassSet] = (),
        record_distribution: bool = False,
        budget: int | None = None,
    ) -> "MembershipOracle":
        """An oracle that holds only its truth table, not a basis."""
        oracle = cls.__new__(cls)
        oracle._subspace = None
        oracle._init(mask, ambient_dim, oracle_id, log, mass_sets, record_distribution, budget)
        return oracle

    def _init(
        self,
        mask: np.ndarray,
        ambient_dim: int,
        oracle_id: str,
        log: QueryLog | None,
        mass_sets: Iterable[MassSet],
        record_distribution: bool,
        budget: int | None,
    ) -> None:
        check_qubit_cap(ambient_dim + 1)
        if mask.shape != (1 << ambient_dim,):
            raise DimensionMismatchError(f"membership mask of shape {mask.shape} for n={ambient_dim}")
        self._mask = np.asarray(mask, dtype=bool)
        self.ambient_dim = ambient_dim
        self.oracle_id = oracle_id
        self.log = log
        self.mass_sets = tuple(mass_sets)
        for ms in self.mass_sets:
            if ms.ambient_dim != ambient_dim:
                raise DimensionMismatchError(f"mass set {ms.mass_set_id} is not over F_2^{ambient_dim}")
        self.record_distribution = record_distribution
        self.budget = budget
        self.query_count = 0

    @property
    def subspace(self) -> Subspace | None:
        return self._subspace

    @property
    def width(self) -> int:
        return 1 << (self.ambient_dim + 1)

    def register(self, mass_set: MassSet) -> None:
        if mass_set.ambient_dim != self.ambient_dim:
            raise DimensionMismatchError(f"mass set {mass_set.mass_set_id} is not over F_2^{self.ambient_dim}")
        self.mass_sets = self.mass_sets + (mass_set,)

    def member_gram(self, amplitudes: np.ndarray) -> np.ndarray:
        """
        G[i, j] = <phi_i| (Pi_S (x) I_rest) |phi_j> for a batch (k, ..., 2^(n+1)).

        Used to build query-measurement POVM elements over a batch of inputs.
        """
        a = np.asarray(amplitudes)
        k = a.shape[0]
        split = a.reshape(a.shape[:-1] + (2, 1 << self.ambient_dim))
        selected = split[..., self._mask].reshape(k, -1)
        return np.conj(selected) @ selected.T

    def _record(self, split: np.ndarray) -> None:
        probs = (np.abs(split) ** 2).reshape(-1, 1 << self.ambient_dim).sum(axis=0)
        record = QueryRecord(
            trial=self.log.trial,
            query_index=self.log.next_index(),
            oracle_id=self.oracle_id,
            masses={ms.mass_set_id: float(probs[ms.mask].sum()) for ms in self.mass_sets},
            member_mass=float(probs[self._mask].sum()),
            distribution=probs if self.record_distribution else None,
            member_mask=self._mask if self.record_distribution else None,
        )
        self.log.append(record)

    def apply_array(self, amplitudes: np.ndarray) -> np.ndarray:
        a = np.asarray(amplitudes, dtype=np.complex128)
        if a.shape[-1] != self.width:
            raise DimensionMismatchError(
                f"oracle over F_2^{self.ambient_dim} needs width {self.width}, got {a.shape[-1]}"
            )
        if self.budget is not None and self.query_count >= self.budget:
            raise QueryBudgetError(f"oracle {self.oracle_id} budget of {self.budget} queries exhausted")
        split = a.reshape(a.shape[:-1] + (2, 1 << self.ambient_dim))
        if self.log is not None:
            self._record(split)
        out = split.copy()
        out[..., 0, self._mask] = split[..., 1, self._mask]
        out[..., 1, self._mask] = split[..., 0, self._mask]
        self.query_count += 1
        record_query(self.oracle_id)
        return out.reshape(a.shape)

    def apply(self, psi: PureState) -> PureState:
        if psi.n_qubits != self.ambient_dim + 1:
            raise DimensionMismatchError(
                f"oracle over F_2^{self.ambient_dim} needs {self.ambient_dim + 1} qubits, got {psi.n_qubits}"
            )
        return PureState(psi.n_qubits, self.apply_array(psi.amplitudes))

    def classical_query(self, x: int) -> bool:
        """Query on the basis state |x>|0>; counted and logged like any query."""
        state = np.zeros(self.width, dtype=np.complex128)
        state[x] = 1.0
        out = self.apply_array(state)
        return bool(abs(out[x + (1 << self.ambient_dim)]) > 0.5)


def oracle_apply(o: MembershipOracle, psi: PureState) -> PureState:
    """Flip the flag qubit on member rows; increments the query count."""
    return o.apply(psi)


def with_flag(psi: PureState) -> PureState:
    """|psi>|0> with the flag as the new highest qubit."""
    amps = np.concatenate([psi.amplitudes, np.zeros(psi.dim, dtype=np.complex128)])
    return PureState(psi.n_qubits + 1, amps)


def drop_flag(psi: PureState) -> PureState:
    """Inverse of with_flag; the flag must be |0>."""
    half = psi.dim // 2
    if np.linalg.norm(psi.amplitudes[half:]) > MASS_TOLERANCE:
        raise PreconditionError("flag qubit is not |0>")
    return PureState(psi.n_qubits - 1, psi.amplitudes[:half])
