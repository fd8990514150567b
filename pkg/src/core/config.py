"""Central lab settings: resource caps, tolerances and logging options."""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from src.core.errors import ConfigError


def _load_env_file() -> None:
    env_path = Path(__file__).resolve().parents[2] / ".env"
    if not env_path.exists():
        return

    with env_path.open("r", encoding="utf-8") as env_file:
        for raw_line in env_file:
            line = raw_line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue

            key, value = line.split("=", 1)
            os.environ.setdefault(key.strip(), value.strip().strip('"').strip("'"))


_load_env_file()


@dataclass(frozen=True)
class LabSettings:
    environment: str
    log_level: str
    enumeration_cap_dim: int
    statevector_cap_qubits: int
    joint_cap_qubits: int
    eigensolver_cap_dim: int
    power_iteration_budget: int
    tolerance: float
    default_jobs: int
    metrics_enabled: bool

    @property
    def enumeration_cap(self) -> int:
        return 1 << self.enumeration_cap_dim

    def invalid_fields(self) -> list[str]:
        invalid: list[str] = []
        if self.enumeration_cap_dim <= 0:
            invalid.append("LAB_ENUMERATION_CAP_DIM")
        if self.statevector_cap_qubits <= 0:
            invalid.append("LAB_STATEVECTOR_CAP_QUBITS")
        if self.joint_cap_qubits < self.statevector_cap_qubits:
            invalid.append("LAB_JOINT_CAP_QUBITS")
        if self.eigensolver_cap_dim <= 0:
            invalid.append("LAB_EIGENSOLVER_CAP_DIM")
        if self.power_iteration_budget <= 0:
            invalid.append("LAB_POWER_ITERATION_BUDGET")
        if not 0.0 < self.tolerance <= 1e-3:
            invalid.append("LAB_TOLERANCE")
        if self.default_jobs == 0:
            invalid.append("LAB_DEFAULT_JOBS")
        return invalid

    def validate(self) -> None:
        invalid = self.invalid_fields()
        if invalid:
            raise ConfigError("Invalid lab configuration: " + ", ".join(invalid))


def _flag(name: str, default: str) -> bool:
    return os.getenv(name, default).lower() in {"1", "true", "yes"}


@lru_cache(maxsize=1)
def get_settings() -> LabSettings:
    """Return cached lab settings read from LAB_* environment variables."""
    settings = LabSettings(
        environment=os.getenv("LAB_ENVIRONMENT", "development"),
        log_level=os.getenv("LAB_LOG_LEVEL", "INFO").upper(),
        enumeration_cap_dim=int(os.getenv("LAB_ENUMERATION_CAP_DIM", "20")),
        statevector_cap_qubits=int(os.getenv("LAB_STATEVECTOR_CAP_QUBITS", "20")),
        joint_cap_qubits=int(os.getenv("LAB_JOINT_CAP_QUBITS", "24")),
        eigensolver_cap_dim=int(os.getenv("LAB_EIGENSOLVER_CAP_DIM", "4096")),
        power_iteration_budget=int(os.getenv("LAB_POWER_ITERATION_BUDGET", "2000")),
        tolerance=float(os.getenv("LAB_TOLERANCE", "1e-9")),
        default_jobs=int(os.getenv("LAB_DEFAULT_JOBS", "1")),
        metrics_enabled=_flag("LAB_METRICS_ENABLED", "true"),
    )
    settings.validate()
    return settings
