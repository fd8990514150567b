"""
Prometheus metrics for the lab.
All lab metrics defined in one place; a batch run dumps them to a text file.
"""

from __future__ import annotations

from pathlib import Path

from prometheus_client import REGISTRY, Counter, Histogram, Info, generate_latest

from src.core.config import get_settings

# ============================================================================
# ORACLE METRICS
# ============================================================================

oracle_queries_total = Counter(
    "lab_oracle_queries_total",
    "Coherent membership-oracle applications",
    ["oracle_id"],
)

# ============================================================================
# EXPERIMENT METRICS
# ============================================================================

experiment_records_total = Counter(
    "lab_experiment_records_total",
    "Result records emitted by experiment kind and outcome",
    ["kind", "outcome"],  # outcome: pass, fail, flag, skipped
)

grid_point_duration_seconds = Histogram(
    "lab_grid_point_duration_seconds",
    "Wall time of one experiment grid point",
    ["kind"],
    buckets=[0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 15.0, 60.0, 120.0],
)

bound_checks_total = Counter(
    "lab_bound_checks_total",
    "Asserted bound checks by check name and outcome",
    ["check", "outcome"],
)

# ============================================================================
# BUILD INFO
# ============================================================================

lab_info = Info("lab", "Simulation lab build information")
lab_info.info({"version": "0.1.0", "mode": "exact-simulation"})


def record_query(oracle_id: str) -> None:
    if get_settings().metrics_enabled:
        oracle_queries_total.labels(oracle_id=oracle_id).inc()


def record_check(check: str, outcome: str) -> None:
    if get_settings().metrics_enabled:
        bound_checks_total.labels(check=check, outcome=outcome).inc()


def record_result(kind: str, outcome: str, duration_s: float) -> None:
    if get_settings().metrics_enabled:
        experiment_records_total.labels(kind=kind, outcome=outcome).inc()
        grid_point_duration_seconds.labels(kind=kind).observe(duration_s)


def write_metrics_textfile(path: str | Path) -> Path:
    """Write the current registry in Prometheus text format."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(generate_latest(REGISTRY))
    return target
