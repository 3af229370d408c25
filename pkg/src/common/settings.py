"""Environment-driven defaults for solvers, guards and worker pools."""

import logging
import os
from typing import Literal

from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)

OdeMethod = Literal["RK45", "DOP853", "RK23"]
LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR"]


def _read(name: str, cast, default):
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(raw.strip())
    except ValueError as exc:
        raise ValueError(f"{name} has invalid value {raw!r}: {exc}") from exc


class Settings(BaseModel):
    """Runtime defaults. Library calls take explicit arguments; these only seed them."""

    workers: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    ode_rtol: float = Field(default=1e-12, gt=0)
    ode_atol: float = Field(default=1e-13, gt=0)
    ode_method: OdeMethod = "DOP853"
    dirichlet_guard: float = Field(default=1e-6, ge=0)
    max_vertices: int = Field(default=1_000_000, ge=1)
    log_level: LogLevel = "INFO"

    @classmethod
    def from_env(cls) -> "Settings":
        """Create settings from QTREE_* environment variables."""
        values = {
            "workers": _read("QTREE_WORKERS", int, None),
            "ode_rtol": _read("QTREE_ODE_RTOL", float, None),
            "ode_atol": _read("QTREE_ODE_ATOL", float, None),
            "ode_method": _read("QTREE_ODE_METHOD", str, None),
            "dirichlet_guard": _read("QTREE_DIRICHLET_GUARD", float, None),
            "max_vertices": _read("QTREE_MAX_VERTICES", int, None),
            "log_level": _read("QTREE_LOG_LEVEL", str.upper, None),
        }
        settings = cls(**{k: v for k, v in values.items() if v is not None})
        logger.debug(f"Settings loaded: {settings.model_dump()}")
        return settings


DEFAULT = Settings()
