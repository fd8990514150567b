"""
Pydantic models for experiment configuration files and result records.

One JSON document per experiment, discriminated on `kind`. Unknown keys are
rejected so a typo never silently falls back to a default.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

from pydantic import AfterValidator, BaseModel, ConfigDict, Field, TypeAdapter, ValidationError

from src.core.errors import ConfigError

Outcome = Literal["pass", "fail", "flag", "skipped"]


def _multiples_of_four(ns: list[int]) -> list[int]:
    bad = [n for n in ns if n <= 0 or n % 4]
    if bad:
        raise ValueError(f"instance sizes must be positive multiples of 4: {bad}")
    return ns


InstanceSizes = Annotated[list[int], AfterValidator(_multiples_of_four)]


class _BaseConfig(BaseModel):
    """Fields shared by every experiment kind."""

    experiment_id: str = Field(..., min_length=1)
    seed: int = Field(default=0, ge=0)
    output_prefix: Optional[str] = None
    jobs: Optional[int] = None

    model_config = ConfigDict(extra="forbid", frozen=True)

    @property
    def prefix(self) -> str:
        return self.output_prefix or self.experiment_id


# ============================================================================
# PROTOCOL SWEEPS
# ============================================================================


class SoundnessConfig(_BaseConfig):
    kind: Literal["soundness"] = "soundness"
    ns: InstanceSizes = Field(default_factory=lambda: [4, 8, 12])
    instances: int = Field(default=50, ge=1)
    no_kinds: list[Literal["no_ab", "no_ba"]] = Field(default_factory=lambda: ["no_ab", "no_ba"])


class CompletenessConfig(_BaseConfig):
    kind: Literal["completeness"] = "completeness"
    ns: InstanceSizes = Field(default_factory=lambda: [4, 8, 12, 16])
    instances: int = Field(default=100, ge=1)


class DualityConfig(_BaseConfig):
    kind: Literal["duality"] = "duality"
    ns: list[int] = Field(default_factory=lambda: [4, 8, 12])
    samples: int = Field(default=1000, ge=1)


# ============================================================================
# PIRACY AND COUNTERFEITING
# ============================================================================


class PiracyConfig(_BaseConfig):
    kind: Literal["piracy"] = "piracy"
    ns: list[int] = Field(default_factory=lambda: [8])
    pirates: list[str] = Field(default_factory=lambda: ["forward-and-pad", "measure-resend", "coherent-copy"])
    verifier_pairs: list[tuple[str, str]] = Field(default_factory=lambda: [("vstar", "vstar")])
    trials: int = Field(default=1000, ge=1)
    mode: Literal["auto", "exact", "monte_carlo"] = "auto"
    exact_instances: int = Field(default=4, ge=1)
    protocol: Literal["lab", "npcand"] = "lab"
    budget: Optional[int] = Field(default=None, ge=0)
    reduction_chain: bool = False
    export_queries: bool = False


class CounterfeitConfig(_BaseConfig):
    kind: Literal["counterfeit"] = "counterfeit"
    ns: list[int] = Field(default_factory=lambda: [8])
    attacks: list[str] = Field(default_factory=lambda: ["measure-and-guess", "grover-search"])
    budgets: list[int] = Field(default_factory=lambda: [1, 2, 4, 8, 16])
    trials: int = Field(default=10_000, ge=1)
    mode: Literal["exact", "monte_carlo"] = "monte_carlo"
    predicate: Literal["pair", "nonzero"] = "pair"


# ============================================================================
# CALCULUS AND CANDIDATE
# ============================================================================


class CalculusConfig(_BaseConfig):
    kind: Literal["calculus"] = "calculus"
    study: Literal["pipeline", "amplification", "useful_bound"] = "pipeline"
    presets: list[Literal["projective", "entangled-cheat", "perfect"]] = Field(
        default_factory=lambda: ["projective"]
    )
    ks: list[int] = Field(default_factory=lambda: [2])
    ps: list[int] = Field(default_factory=lambda: [1])
    c: float = Field(default=2 / 3, ge=0.0, le=1.0)
    s: float = Field(default=1 / 3, ge=0.0, le=1.0)
    q: Optional[int] = Field(default=None, ge=1)
    ell1: int = Field(default=20, ge=1)
    ell2: int = Field(default=40, ge=1)
    # amplification study grid
    cs: list[float] = Field(default_factory=lambda: [2 / 3, 3 / 4, 0.9])
    qs: list[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    ells: list[int] = Field(default_factory=lambda: list(range(1, 11)))
    # useful-bound study
    dims: list[int] = Field(default_factory=lambda: [2, 3, 4])
    samples: int = Field(default=1000, ge=1)


class NpCandidateConfig(_BaseConfig):
    kind: Literal["npcand"] = "npcand"
    ns: list[int] = Field(default_factory=lambda: [4, 8, 12])
    trials: int = Field(default=5, ge=1)


ExperimentConfig = Annotated[
    Union[
        SoundnessConfig,
        CompletenessConfig,
        DualityConfig,
        PiracyConfig,
        CounterfeitConfig,
        CalculusConfig,
        NpCandidateConfig,
    ],
    Field(discriminator="kind"),
]

_CONFIG_ADAPTER: TypeAdapter[Any] = TypeAdapter(ExperimentConfig)
EXPERIMENT_KINDS = ("soundness", "completeness", "duality", "piracy", "counterfeit", "calculus", "npcand")


def parse_config(payload: dict[str, Any]) -> Any:
    try:
        return _CONFIG_ADAPTER.validate_python(payload)
    except ValidationError as exc:
        raise ConfigError(f"invalid experiment config: {exc}") from exc


def load_config(path: str | Path) -> Any:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return parse_config(payload)


def config_digest(config: BaseModel) -> str:
    """First 16 hex chars of sha256 over the canonical JSON dump."""
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


# ============================================================================
# RESULTS
# ============================================================================


class ResultRecord(BaseModel):
    """One grid point's outcome; CSV rows leave out the runtime and extras."""

    experiment_id: str
    kind: str
    key: str
    seed: int
    config_digest: str
    params: dict[str, Any] = Field(default_factory=dict)
    measured: dict[str, Any] = Field(default_factory=dict)
    claimed: dict[str, Any] = Field(default_factory=dict)
    outcome: Outcome = "pass"
    runtime_s: float = 0.0
    notes: list[str] = Field(default_factory=list)
    extra: dict[str, Any] = Field(default_factory=dict)

    model_config = ConfigDict(extra="forbid")

    @property
    def passed(self) -> bool:
        return self.outcome != "fail"

    def to_row(self) -> dict[str, Any]:
        row: dict[str, Any] = {
            "experiment_id": self.experiment_id,
            "kind": self.kind,
            "key": self.key,
            "outcome": self.outcome,
            "seed": self.seed,
            "config_digest": self.config_digest,
        }
        for prefix, values in (("param", self.params), ("measured", self.measured), ("claimed", self.claimed)):
            for name, value in values.items():
                row[f"{prefix}.{name}"] = value
        row["notes"] = "; ".join(self.notes)
        return row
