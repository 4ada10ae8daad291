"""Application configuration."""

from functools import lru_cache
from typing import Literal

from pydantic import AliasChoices, Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Toolkit settings loaded from FLUXGAP_* environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="FLUXGAP_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Logging
    log_level: str = Field(
        default="WARNING",
        validation_alias=AliasChoices("FLUXGAP_LOG", "FLUXGAP_LOG_LEVEL"),
    )

    # Geometry sampling
    boundary_samples: int = 1024
    cone_samples: int = 256
    convexity_tol: float = 1e-12
    geometry_tol: float = 1e-3  # relative, tied to 1024-sample resolution
    arc_segments: int = 64  # per quarter circle when realizing arcs as polygons
    injectivity_samples: int = 512
    injectivity_tol: float = 1e-4

    # Mesh
    min_angle_deg: float = 20.0
    debug_mesh_checks: bool = True
    polar_rings: int = 8

    # Solver
    discretization: Literal["gauge", "quadrature"] = "gauge"
    eigensolver: Literal["shift_invert", "lobpcg"] = "shift_invert"
    solver_tol: float = 1e-8
    solver_max_iterations: int = 2000
    zero_eigenvalue_tol: float = 1e-7
    seed: int = 0x5EED
    pole_warning_factor: float = 2.0

    # Oracle
    oracle_rtol: float = 1e-10
    oracle_bracket_attempts: int = 4

    # Partition
    equidistant_tol: float = 1e-9
    partition_check_tol: float = 0.05
    piece_h_factor: float = 0.125  # staircase spacing relative to beta
    level_set_nudge: float = 1e-9

    # Harness
    svg_size: int = 1000
    persist_timing: bool = False
    default_jobs: int = 1


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
