from functools import lru_cache
from typing import Tuple

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Sampling
    samples: int = 200
    seed: int = 42
    margin: float = 1e-3
    sample_extent: float = 1.0  # window half-width for unbounded coordinates
    load_samples: int = 20

    # Contact checks
    contact_threshold: float = 1e-10
    reeb_tol: float = 1e-10
    lie_tol: float = 1e-6
    rescale_tol: float = 1e-8
    section_tol: float = 1e-10
    reduction_tol: float = 1e-8
    transversality_tol: float = 1e-8

    # Flows and periods
    rk4_step: float = 1e-3
    period_horizon: float = 100.0
    return_tol: float = 1e-4
    refined_return_tol: float = 1e-8
    period_orbits: int = 20
    verify_orbits: int = 6

    # Quadrature and finite differences
    quadrature_grid: Tuple[int, int] = (64, 64)
    fd_step: float = 1e-5
    integrality_tol: float = 1e-6

    log_level: str = "WARNING"

    class Config:
        env_prefix = "CONTACT_"
        env_file = ".env"
        case_sensitive = False


@lru_cache()
def get_settings():
    return Settings()
