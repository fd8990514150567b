"""
Summaries and plot-ready series from result files.

Reads the CSV/JSON pair a run wrote and emits:
- a per-kind outcome table (failures first, then flags, then passes)
- pipeline stage tables from the JSON sidecar, failing stages first
- (x, y, ci) series: counterfeit success vs query budget against the
  reference curve, piracy joint acceptance vs n
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import pandas as pd
import structlog

from src.core.errors import ReportError

logger = structlog.get_logger(__name__)

OUTCOME_ORDER = {"fail": 0, "flag": 1, "pass": 2, "skipped": 3}
SERIES_COLUMNS = ["series", "x", "y", "ci_low", "ci_high", "reference"]


def _resolve(path: str | Path) -> tuple[Path, Path]:
    """Accept a prefix, the CSV or the JSON; return (csv, json)."""
    path = Path(path)
    stem = path.with_suffix("") if path.suffix in {".csv", ".json"} else path
    return stem.with_suffix(".csv"), stem.with_suffix(".json")


def load_results(path: str | Path) -> pd.DataFrame:
    csv_path, _ = _resolve(path)
    if not csv_path.exists():
        raise ReportError(f"result file {csv_path} not found")
    try:
        with csv_path.open("r", encoding="utf-8") as handle:
            first = handle.readline()
        frame = pd.read_csv(csv_path, skiprows=1 if first.startswith("#") else 0)
    except (OSError, pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise ReportError(f"unreadable result file {csv_path}: {exc}") from exc
    except pd.errors.EmptyDataError:
        return pd.DataFrame(columns=["kind", "key", "outcome"])
    missing = {"kind", "key", "outcome"} - set(frame.columns)
    if missing:
        raise ReportError(f"result file {csv_path} lacks columns {sorted(missing)}")
    return frame


def load_records(path: str | Path) -> list[dict[str, Any]]:
    _, json_path = _resolve(path)
    if not json_path.exists():
        return []
    try:
        payload = json.loads(json_path.read_text())
        return list(payload["records"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ReportError(f"unreadable result sidecar {json_path}: {exc}") from exc


def order_by_outcome(frame: pd.DataFrame) -> pd.DataFrame:
    if frame.empty:
        return frame
    rank = frame["outcome"].map(OUTCOME_ORDER).fillna(len(OUTCOME_ORDER))
    return frame.assign(_rank=rank).sort_values(["_rank", "key"], kind="stable").drop(columns="_rank")


def summary_table(frame: pd.DataFrame) -> pd.DataFrame:
    """Outcome counts per kind, in failure-first column order."""
    if frame.empty:
        return pd.DataFrame(columns=["kind", *OUTCOME_ORDER])
    counts = frame.groupby(["kind", "outcome"]).size().unstack(fill_value=0)
    for outcome in OUTCOME_ORDER:
        if outcome not in counts.columns:
            counts[outcome] = 0
    return counts[list(OUTCOME_ORDER)].reset_index()


def stage_table(records: list[dict[str, Any]]) -> pd.DataFrame:
    rows = []
    for record in records:
        extra = record.get("extra", {})
        if "failed_stage" in extra:
            rows.append(
                {
                    "key": record["key"],
                    "stage": extra["failed_stage"],
                    "outcome": "fail",
                    "claimed_c": None,
                    "claimed_s": None,
                    "measured_c": None,
                    "measured_s": None,
                }
            )
        for stage in extra.get("pipeline", {}).get("stages", []):
            rows.append(
                {
                    "key": record["key"],
                    "stage": stage["stage"],
                    "outcome": stage["outcome"],
                    "claimed_c": stage["claimed"]["c"],
                    "claimed_s": stage["claimed"]["s"],
                    "measured_c": stage["measured"]["c"],
                    "measured_s": stage["measured"]["s"],
                }
            )
    frame = pd.DataFrame(
        rows, columns=["key", "stage", "outcome", "claimed_c", "claimed_s", "measured_c", "measured_s"]
    )
    return order_by_outcome(frame)


def plot_series(frame: pd.DataFrame) -> pd.DataFrame:
    """Plot-ready (x, y, ci) rows; rendering is left to the caller."""
    parts = []
    counterfeit = frame[frame["kind"] == "counterfeit"] if "kind" in frame else frame.iloc[0:0]
    if not counterfeit.empty:
        for (n, attack), group in counterfeit.groupby(["param.n", "param.attack"], sort=True):
            group = group.sort_values("param.q")
            parts.append(
                pd.DataFrame(
                    {
                        "series": f"counterfeit|n={n}|attack={attack}",
                        "x": group["param.q"].to_numpy(),
                        "y": group["measured.rate"].to_numpy(),
                        "ci_low": group["measured.ci_low"].to_numpy(),
                        "ci_high": group["measured.ci_high"].to_numpy(),
                        "reference": group["claimed.reference"].to_numpy(),
                    }
                )
            )
    piracy = frame[frame["kind"] == "piracy"] if "kind" in frame else frame.iloc[0:0]
    if not piracy.empty:
        for (pirate, v1, v2), group in piracy.groupby(["param.pirate", "param.v1", "param.v2"], sort=True):
            group = group.sort_values("param.n")
            parts.append(
                pd.DataFrame(
                    {
                        "series": f"piracy|pirate={pirate}|v1={v1}|v2={v2}",
                        "x": group["param.n"].to_numpy(),
                        "y": group["measured.joint_accept"].to_numpy(),
                        "ci_low": group["measured.ci_low"].to_numpy(),
                        "ci_high": group["measured.ci_high"].to_numpy(),
                        "reference": group["claimed.forward_and_pad"].to_numpy(),
                    }
                )
            )
    if not parts:
        return pd.DataFrame(columns=SERIES_COLUMNS)
    return pd.concat(parts, ignore_index=True)[SERIES_COLUMNS]


@dataclass
class Report:
    summary: pd.DataFrame
    records: pd.DataFrame
    stages: pd.DataFrame
    series: pd.DataFrame
    written: list[Path] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return bool((self.records["outcome"] == "fail").any()) if not self.records.empty else False

    def render(self) -> str:
        lines = ["== Outcomes by kind ==", self.summary.to_string(index=False)]
        if not self.records.empty:
            columns = [c for c in ("outcome", "kind", "key", "notes") if c in self.records.columns]
            lines += ["", "== Records ==", self.records[columns].to_string(index=False)]
        if not self.stages.empty:
            lines += ["", "== Pipeline stages ==", self.stages.to_string(index=False)]
        if self.written:
            lines += ["", "Series written: " + ", ".join(str(p) for p in self.written)]
        return "\n".join(lines)


def build_report(path: str | Path, *, series_out: str | Path | None = None) -> Report:
    frame = load_results(path)
    records = order_by_outcome(frame)
    report = Report(
        summary=summary_table(frame),
        records=records,
        stages=stage_table(load_records(path)),
        series=plot_series(frame),
    )
    if series_out is not None and not report.series.empty:
        target = Path(series_out)
        target.parent.mkdir(parents=True, exist_ok=True)
        report.series.to_csv(target, index=False, float_format="%.12g")
        report.written.append(target)
    logger.info("report_built", source=str(path), records=len(frame), series=len(report.series))
    return report
