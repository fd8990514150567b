"""
The composed transformation chain.

amplify_gap -> product_test_collapse -> sequential_repeat -> drop_unentanglement,
each stage reporting claimed against measured (c, s).
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import structlog

from src.calculus.toy import ToyVerifier, VerifierParams
from src.calculus.transforms import (
    TransformReport,
    amplify_gap,
    drop_unentanglement,
    product_test_collapse,
    sequential_repeat,
    theorem_parameters,
)
from src.core.errors import LabError, PreconditionError, StageError
from src.core.metrics import record_result

logger = structlog.get_logger(__name__)

STAGES = ("amplify_gap", "product_test_collapse", "sequential_repeat", "drop_unentanglement")
MAX_ARITY = 3
MAX_PROOF_QUBITS = 2

StageOverride = Callable[[ToyVerifier], ToyVerifier]


@dataclass
class PipelineReport:
    input_params: VerifierParams
    k: int
    p: int
    q: int
    ell1: int
    ell2: int
    stages: list[TransformReport] = field(default_factory=list)
    final: ToyVerifier | None = None
    duration_s: float = 0.0

    @property
    def theorem(self) -> VerifierParams:
        return theorem_parameters(self.ell1, self.ell2)

    @property
    def final_measured(self) -> tuple[float, float | None]:
        last = self.stages[-1]
        return last.measured_c, last.measured_s

    @property
    def outcome(self) -> str:
        outcomes = {stage.outcome for stage in self.stages}
        if "fail" in outcomes:
            return "fail"
        return "flag" if "flag" in outcomes else "pass"

    @property
    def passed(self) -> bool:
        return self.outcome != "fail"

    def to_dict(self) -> dict[str, object]:
        measured_c, measured_s = self.final_measured
        return {
            "input": {"k": self.k, "p": self.p, "c": self.input_params.c, "s": self.input_params.s},
            "q": self.q,
            "ell1": self.ell1,
            "ell2": self.ell2,
            "stages": [stage.to_dict() for stage in self.stages],
            "final": {"c": measured_c, "s": measured_s},
            "theorem": {"c": self.theorem.c, "s": self.theorem.s},
            "pass": self.passed,
            "outcome": self.outcome,
            "duration_s": self.duration_s,
        }

    def write_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        return path


def default_q(params: VerifierParams) -> int:
    gap = params.c - params.s
    if gap <= 0:
        raise PreconditionError(f"no completeness/soundness gap: c={params.c}, s={params.s}")
    return int(math.ceil(1.0 / gap - 1e-9))


def compose_theorem_pipeline(
    v: ToyVerifier,
    q: int | None = None,
    ell1: int = 20,
    ell2: int = 40,
    stage_overrides: Mapping[str, StageOverride] | None = None,
    *,
    seed: int = 0,
) -> PipelineReport:
    """
    Run the four transformations in order.

    `stage_overrides` maps a stage name to a function applied to that stage's
    input verifier before it runs. Any error raised while a stage runs comes
    back as StageError carrying the stage name.
    """
    if v.k > MAX_ARITY or v.p > MAX_PROOF_QUBITS:
        raise PreconditionError(
            f"exact pipeline evaluation supports k <= {MAX_ARITY}, p <= {MAX_PROOF_QUBITS}; got k={v.k}, p={v.p}"
        )
    overrides = dict(stage_overrides or {})
    unknown = set(overrides) - set(STAGES)
    if unknown:
        raise PreconditionError(f"unknown pipeline stages: {', '.join(sorted(unknown))}")
    q = default_q(v.params) if q is None else q

    runners: dict[str, Callable[[ToyVerifier], tuple[ToyVerifier, TransformReport]]] = {
        "amplify_gap": lambda cur: amplify_gap(cur, q, ell1, seed=seed),
        "product_test_collapse": lambda cur: product_test_collapse(cur, seed=seed),
        "sequential_repeat": lambda cur: sequential_repeat(cur, ell2, seed=seed),
        "drop_unentanglement": lambda cur: drop_unentanglement(cur, seed=seed),
    }

    report = PipelineReport(input_params=v.params, k=v.k, p=v.p, q=q, ell1=ell1, ell2=ell2)
    log = logger.bind(label=v.label, k=v.k, p=v.p, q=q)
    start = time.perf_counter()
    current = v
    for stage in STAGES:
        try:
            if stage in overrides:
                current = overrides[stage](current)
            current, stage_report = runners[stage](current)
        except (LabError, ValueError, ArithmeticError) as exc:
            log.error("pipeline_stage_failed", stage=stage, error=str(exc))
            record_result("calculus", "error", time.perf_counter() - start)
            raise StageError(stage, exc) from exc
        report.stages.append(stage_report)
        log.debug("pipeline_stage_done", stage=stage, outcome=stage_report.outcome)
    report.final = current
    report.duration_s = time.perf_counter() - start
    record_result("calculus", report.outcome, report.duration_s)
    log.info(
        "pipeline_completed",
        outcome=report.outcome,
        final_c=report.final_measured[0],
        final_s=report.final_measured[1],
        duration_s=round(report.duration_s, 3),
    )
    return report
