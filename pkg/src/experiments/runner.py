"""
Batch experiment runner.

A config expands into grid points; each point runs in a joblib worker with its
own child seed and yields one or more result records. Records are sorted by
grid key and handed to a single writer, so the CSV body does not depend on
--jobs or on completion order.

Files written under the output directory:
- <prefix>.csv           one row per record, numbers at 12 significant digits
- <prefix>.json          full records, runtimes and pipeline stage reports
- <prefix>.queries.csv   key, trial, query_index, oracle_id, mass_set_id, mass
                         (piracy runs with export_queries)
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import numpy as np
import pandas as pd
import structlog
from joblib import Parallel, delayed

from src.calculus.pipeline import compose_theorem_pipeline
from src.calculus.product import check_useful_bound, product_max, random_psd_contraction
from src.calculus.toy import build_toy_verifier
from src.calculus.transforms import acceptance_threshold, amplified_completeness, repetition_count
from src.core.config import get_settings
from src.core.errors import CapExceededError, PreconditionError, QueryBudgetError, StageError
from src.core.metrics import record_result
from src.experiments.schemas import ResultRecord, config_digest
from src.experiments.seeds import canonical_key, child_int, child_rng
from src.gf2.linear import BitVector, dual, sample_subspace
from src.oracles.membership import QUERY_LOG_COLUMNS
from src.npcand.candidate import candidate_honest_rates
from src.piracy.counterfeit import counterfeit_experiment
from src.piracy.game import get_protocol, monte_carlo_sigma, play_pirate, run_piracy_game
from src.piracy.pirates import get_pirate
from src.piracy.povm import reduction_chain
from src.protocol.instances import make_instance
from src.protocol.vstar import honest_prove, max_cheat_probability, verify_vstar
from src.statesim.states import hadamard_all, subspace_state

logger = structlog.get_logger(__name__)

CSV_FLOAT_FORMAT = "%.12g"
BASE_COLUMNS = ["experiment_id", "kind", "key", "outcome", "seed", "config_digest", "notes"]
QUERY_COLUMNS = ["key", *QUERY_LOG_COLUMNS]
VALUE_TOLERANCE = 1e-9
MC_SIGMAS = 3.0

# A unit returns partial records: dicts with measured/claimed/outcome and
# optionally params (merged over the grid point's), notes, extra, queries.
Partial = dict[str, Any]
GridFn = Callable[[Any], list[dict[str, Any]]]
UnitFn = Callable[[Any, dict[str, Any], int], list[Partial]]


@dataclass(frozen=True)
class ExperimentKind:
    grid: GridFn
    unit: UnitFn


_KINDS: dict[str, ExperimentKind] = {}


def experiment(kind: str, grid: GridFn) -> Callable[[UnitFn], UnitFn]:
    def decorator(unit: UnitFn) -> UnitFn:
        _KINDS[kind] = ExperimentKind(grid, unit)
        return unit

    return decorator


def _outcome(*checks: str) -> str:
    if "fail" in checks:
        return "fail"
    if "flag" in checks:
        return "flag"
    return "pass"


def _check(ok: bool) -> str:
    return "pass" if ok else "fail"


# ============================================================================
# PROTOCOL SWEEPS
# ============================================================================


def _soundness_grid(config: Any) -> list[dict[str, Any]]:
    return [{"n": n, "no_kind": kind} for n in config.ns for kind in config.no_kinds]


@experiment("soundness", _soundness_grid)
def _soundness_unit(config: Any, params: dict[str, Any], seed: int) -> list[Partial]:
    n = params["n"]
    rng = np.random.default_rng(seed)
    values = [
        max_cheat_probability(make_instance(n, params["no_kind"].upper(), rng))
        for _ in range(config.instances)
    ]
    claim = 2.0 ** (-n / 4)
    worst = max(abs(v - claim) for v in values)
    return [
        {
            "measured": {"mean": float(np.mean(values)), "min": min(values), "max": max(values)},
            "claimed": {"max_cheat": claim},
            "outcome": _check(worst <= VALUE_TOLERANCE),
        }
    ]


def _completeness_grid(config: Any) -> list[dict[str, Any]]:
    return [{"n": n} for n in config.ns]


@experiment("completeness", _completeness_grid)
def _completeness_unit(config: Any, params: dict[str, Any], seed: int) -> list[Partial]:
    n = params["n"]
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(config.instances):
        inst = make_instance(n, "YES", rng)
        values.append(verify_vstar(inst, BitVector.zero(n), honest_prove(inst)).accept_probability)
    return [
        {
            "measured": {"min": min(values), "mean": float(np.mean(values))},
            "claimed": {"accept": 1.0},
            "outcome": _check(min(values) >= 1.0 - VALUE_TOLERANCE),
        }
    ]


def _duality_grid(config: Any) -> list[dict[str, Any]]:
    return [{"n": n} for n in config.ns]


@experiment("duality", _duality_grid)
def _duality_unit(config: Any, params: dict[str, Any], seed: int) -> list[Partial]:
    n = params["n"]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(config.samples):
        a = sample_subspace(n, int(rng.integers(0, n + 1)), rng)
        diff = hadamard_all(subspace_state(a)).amplitudes - subspace_state(dual(a)).amplitudes
        worst = max(worst, float(np.linalg.norm(diff)))
    return [
        {
            "measured": {"max_distance": worst},
            "claimed": {"max_distance": 0.0},
            "outcome": _check(worst <= VALUE_TOLERANCE),
        }
    ]


# ============================================================================
# PIRACY AND COUNTERFEITING
# ============================================================================


def _piracy_grid(config: Any) -> list[dict[str, Any]]:
    return [
        {"n": n, "pirate": pirate, "v1": v1, "v2": v2}
        for n in config.ns
        for pirate in config.pirates
        for v1, v2 in config.verifier_pairs
    ]


def _closed_form(pirate: str, n: int, v1: str, v2: str) -> float | None:
    if (v1, v2) != ("vstar", "vstar"):
        return None
    return {"forward-and-pad": 2.0 ** (-n / 2), "measure-resend": 2.0 ** (-n)}.get(pirate)


def _query_rows(config: Any, params: dict[str, Any], seed: int) -> list[dict[str, Any]]:
    """One instrumented pirate run, flattened for queries.csv."""
    rng = child_rng(seed, "queries")
    game_round = get_protocol(config.protocol)(params["n"], rng)
    _, setup = play_pirate(game_round, get_pirate(params["pirate"]), rng, config.budget)
    log = next(iter(setup.oracles.values())).log
    if log is None:
        return []
    frame = log.to_frame(include_member=True)
    frame.insert(0, "key", canonical_key(params))
    return frame.to_dict(orient="records")


@experiment("piracy", _piracy_grid)
def _piracy_unit(config: Any, params: dict[str, Any], seed: int) -> list[Partial]:
    n, pirate, v1, v2 = params["n"], params["pirate"], params["v1"], params["v2"]
    outcome = run_piracy_game(
        n,
        pirate,
        v1,
        v2,
        trials=config.trials,
        seed=seed,
        mode=config.mode,
        exact_instances=config.exact_instances,
        jobs=1,
        protocol=config.protocol,
        budget=config.budget,
    )
    dominance = 2.0 ** (-n / 2)
    measured: dict[str, Any] = {
        "joint_accept": outcome.joint_accept,
        "ci_low": outcome.ci_low,
        "ci_high": outcome.ci_high,
        "queries": outcome.queries,
        "mode": outcome.mode,
    }
    claimed: dict[str, Any] = {"forward_and_pad": dominance}
    checks = []
    if outcome.legal:
        checks.append(_check(outcome.ci_low <= dominance + VALUE_TOLERANCE))
    closed = _closed_form(pirate, n, v1, v2)
    if closed is not None:
        claimed["closed_form"] = closed
        slack = VALUE_TOLERANCE + MC_SIGMAS * monte_carlo_sigma(outcome)
        checks.append(_check(abs(outcome.joint_accept - closed) <= slack))
    extra: dict[str, Any] = {}
    if config.reduction_chain:
        chain = reduction_chain(n, pirate, v1, v2, seed=seed, protocol=config.protocol, budget=config.budget)
        measured.update(joint_mv=chain.joint_mv, joint_mm=chain.joint_mm, chain_bound=chain.chain_bound)
        checks.append(_check(chain.holds))
        extra["reduction_chain"] = chain.to_row()
    partial: Partial = {
        "measured": measured,
        "claimed": claimed,
        "outcome": _outcome(*checks),
        "notes": list(outcome.notes),
        "extra": extra,
    }
    if config.export_queries:
        partial["queries"] = _query_rows(config, params, seed)
    return [partial]


def _counterfeit_grid(config: Any) -> list[dict[str, Any]]:
    return [{"n": n, "attack": attack} for n in config.ns for attack in config.attacks]


@experiment("counterfeit", _counterfeit_grid)
def _counterfeit_unit(config: Any, params: dict[str, Any], seed: int) -> list[Partial]:
    curve = counterfeit_experiment(
        params["n"],
        params["attack"],
        config.budgets,
        config.trials,
        seed,
        mode=config.mode,
        predicate=config.predicate,
        jobs=1,
    )
    partials = []
    for point in curve.points:
        checks = []
        if point.matches_closed_form is not None:
            checks.append(_check(point.matches_closed_form))
        if curve.legal:
            checks.append(_check(point.below_reference))
        partials.append(
            {
                "params": {"q": point.q, "predicate": curve.predicate},
                "measured": {
                    "rate": point.rate,
                    "ci_low": point.ci_low,
                    "ci_high": point.ci_high,
                    "queries": point.queries,
                },
                "claimed": {"closed_form": point.closed_form, "reference": point.reference},
                "outcome": _outcome(*checks),
                "notes": [] if curve.legal else ["illegal-baseline"],
            }
        )
    return partials


# ============================================================================
# CALCULUS AND CANDIDATE
# ============================================================================


def _calculus_grid(config: Any) -> list[dict[str, Any]]:
    if config.study == "amplification":
        return [{"c": c, "q": q, "ell": ell} for c in config.cs for q in config.qs for ell in config.ells]
    if config.study == "useful_bound":
        return [{"dim": d} for d in config.dims]
    return [{"preset": preset, "k": k, "p": p} for preset in config.presets for k in config.ks for p in config.ps]


def _amplification_point(params: dict[str, Any]) -> Partial:
    c, q, ell = params["c"], params["q"], params["ell"]
    s = c - 1.0 / q
    if s < 0:
        raise PreconditionError(f"no soundness level leaves a 1/{q} gap below c={c:.6g}")
    runs = repetition_count(q, ell) + 1
    value = amplified_completeness(c, s, q, ell)
    claim = 1.0 - 2.0**-ell
    return {
        "params": {"s": s},
        "measured": {"completeness": value, "threshold": acceptance_threshold(c, s, runs), "runs": runs},
        "claimed": {"completeness": claim},
        "outcome": _check(value >= claim - VALUE_TOLERANCE),
    }


def _useful_bound_point(config: Any, params: dict[str, Any], seed: int) -> Partial:
    d = params["dim"]
    counts = {"pass": 0, "flag": 0, "fail": 0}
    worst_ratio = 0.0
    for i in range(config.samples):
        rng = child_rng(seed, f"contraction={i}")
        m = random_psd_contraction(d * d, rng)
        result = product_max(m, (d, d), restarts=4, seed=child_int(seed, f"seesaw={i}"))
        check = check_useful_bound(m, result, (d, d))
        counts[check.outcome] += 1
        if check.bound > 0:
            worst_ratio = max(worst_ratio, check.lambda_max / check.bound)
    return {
        "measured": {**counts, "worst_ratio": worst_ratio},
        "claimed": {"ratio_at_most": 1.0},
        "outcome": _outcome(*(name for name, count in counts.items() if count)),
    }


@experiment("calculus", _calculus_grid)
def _calculus_unit(config: Any, params: dict[str, Any], seed: int) -> list[Partial]:
    if config.study == "amplification":
        return [_amplification_point(params)]
    if config.study == "useful_bound":
        return [_useful_bound_point(config, params, seed)]

    verifier = build_toy_verifier(params["preset"], params["k"], params["p"], config.c, config.s)
    try:
        report = compose_theorem_pipeline(verifier, config.q, config.ell1, config.ell2, seed=seed)
    except StageError as exc:
        return [
            {
                "measured": {},
                "claimed": {},
                "outcome": "fail",
                "notes": [f"stage {exc.stage} failed: {exc.cause}"],
                "extra": {"failed_stage": exc.stage},
            }
        ]
    final_c, final_s = report.final_measured
    return [
        {
            "measured": {"c": final_c, "s": final_s, "duration_s": report.duration_s},
            "claimed": {"c": report.theorem.c, "s": report.theorem.s},
            "outcome": report.outcome,
            "extra": {"pipeline": report.to_dict()},
        }
    ]


def _npcand_grid(config: Any) -> list[dict[str, Any]]:
    return [{"n": n} for n in config.ns]


@experiment("npcand", _npcand_grid)
def _npcand_unit(config: Any, params: dict[str, Any], seed: int) -> list[Partial]:
    rows = candidate_honest_rates([params["n"]], config.trials, seed)
    honest = min(r["honest_accept"] for r in rows)
    zero_err = max(abs(r["zero_state_accept"] - r["zero_state_expected"]) for r in rows)
    return [
        {
            "measured": {"honest_min": honest, "zero_state_max_error": zero_err},
            "claimed": {"honest": 1.0, "zero_state": rows[0]["zero_state_expected"]},
            "outcome": _outcome(_check(honest >= 1.0 - VALUE_TOLERANCE), _check(zero_err <= VALUE_TOLERANCE)),
            "notes": ["idealized-primitive mode"],
        }
    ]


# ============================================================================
# EXECUTION
# ============================================================================


def _execute_point(config: Any, params: dict[str, Any], digest: str) -> tuple[list[ResultRecord], list[dict[str, Any]]]:
    kind = config.kind
    key = canonical_key(params)
    unit_seed = child_int(config.seed, f"{kind}|{key}")
    log = logger.bind(kind=kind, key=key)
    start = time.perf_counter()
    queries: list[dict[str, Any]] = []
    try:
        partials = _KINDS[kind].unit(config, params, unit_seed)
    except (CapExceededError, PreconditionError, QueryBudgetError) as exc:
        log.warning("grid_point_skipped", reason=str(exc))
        partials = [{"measured": {}, "claimed": {}, "outcome": "skipped", "notes": [str(exc)]}]
    runtime = time.perf_counter() - start

    records = []
    for partial in partials:
        merged = {**params, **partial.get("params", {})}
        queries.extend(partial.get("queries", []))
        record = ResultRecord(
            experiment_id=config.experiment_id,
            kind=kind,
            key=canonical_key(merged),
            seed=config.seed,
            config_digest=digest,
            params=merged,
            measured=partial["measured"],
            claimed=partial["claimed"],
            outcome=partial["outcome"],
            runtime_s=runtime / len(partials),
            notes=partial.get("notes", []),
            extra=partial.get("extra", {}),
        )
        record_result(kind, record.outcome, record.runtime_s)
        records.append(record)
    log.info("grid_point_completed", records=len(records), outcomes=sorted({r.outcome for r in records}))
    return records, queries


def _query_sort_key(row: dict[str, Any]) -> tuple[Any, ...]:
    return row["key"], row["trial"], row["query_index"], row["oracle_id"], row["mass_set_id"]


class ResultWriter:
    """The single appender for a run's result files."""

    def __init__(self, out_dir: str | Path, prefix: str) -> None:
        self.out_dir = Path(out_dir)
        self.prefix = prefix
        self.out_dir.mkdir(parents=True, exist_ok=True)

    @property
    def csv_path(self) -> Path:
        return self.out_dir / f"{self.prefix}.csv"

    @property
    def json_path(self) -> Path:
        return self.out_dir / f"{self.prefix}.json"

    @property
    def queries_path(self) -> Path:
        return self.out_dir / f"{self.prefix}.queries.csv"

    def write_csv(self, records: list[ResultRecord]) -> Path:
        frame = pd.DataFrame([r.to_row() for r in records]) if records else pd.DataFrame(columns=BASE_COLUMNS)
        generated_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
        with self.csv_path.open("w", encoding="utf-8", newline="") as handle:
            handle.write(f"# generated_at={generated_at}\n")
            frame.to_csv(handle, index=False, float_format=CSV_FLOAT_FORMAT)
        return self.csv_path

    def write_json(self, records: list[ResultRecord], config: Any, digest: str) -> Path:
        payload = {
            "config": config.model_dump(mode="json"),
            "config_digest": digest,
            "records": [r.model_dump(mode="json") for r in records],
        }
        self.json_path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default))
        return self.json_path

    def write_queries(self, rows: list[dict[str, Any]]) -> Path:
        frame = pd.DataFrame(rows, columns=QUERY_COLUMNS)
        frame.to_csv(self.queries_path, index=False, float_format=CSV_FLOAT_FORMAT)
        return self.queries_path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    raise TypeError(f"cannot serialize {type(value).__name__}")


@dataclass
class RunResult:
    records: list[ResultRecord]
    csv_path: Path
    json_path: Path
    queries_path: Path | None = None
    duration_s: float = 0.0
    counts: dict[str, int] = field(default_factory=dict)

    @property
    def exit_status(self) -> int:
        return 1 if any(r.outcome == "fail" for r in self.records) else 0


def run_experiment(config: Any, out_dir: str | Path, *, jobs: int | None = None) -> RunResult:
    """Execute every grid point of `config` and write the result files."""
    if config.kind not in _KINDS:
        raise PreconditionError(f"no runner for experiment kind {config.kind!r}")
    digest = config_digest(config)
    jobs = jobs if jobs is not None else (config.jobs or get_settings().default_jobs)
    grid = _KINDS[config.kind].grid(config)
    logger.info("experiment_started", kind=config.kind, grid_points=len(grid), jobs=jobs, config_digest=digest)

    start = time.perf_counter()
    results = Parallel(n_jobs=jobs)(delayed(_execute_point)(config, params, digest) for params in grid)
    records = sorted((r for batch, _ in results for r in batch), key=lambda r: r.key)
    queries = [row for _, rows in results for row in rows]

    writer = ResultWriter(out_dir, config.prefix)
    csv_path = writer.write_csv(records)
    json_path = writer.write_json(records, config, digest)
    queries_path = None
    if getattr(config, "export_queries", False):
        queries_path = writer.write_queries(sorted(queries, key=_query_sort_key))

    counts: dict[str, int] = {}
    for record in records:
        counts[record.outcome] = counts.get(record.outcome, 0) + 1
    result = RunResult(records, csv_path, json_path, queries_path, time.perf_counter() - start, counts)
    logger.info(
        "experiment_completed",
        kind=config.kind,
        records=len(records),
        exit_status=result.exit_status,
        duration_s=round(result.duration_s, 3),
        **counts,
    )
    return result
