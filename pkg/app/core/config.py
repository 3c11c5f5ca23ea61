# app/core/config.py

from pydantic_settings import BaseSettings
import os
import logging


def _get_env_file() -> str:
    """환경에 따라 적절한 .env 파일을 반환"""
    environment = os.getenv("ENVIRONMENT", "development")

    if environment == "production":
        return ".env.production"
    elif environment == "development":
        return ".env.development"
    else:
        # 기본값으로 .env 파일 사용
        return ".env"


class Settings(BaseSettings):
    # Application
    app_name: str = "Radial Moser Lab"
    api_prefix: str = "/api/v1"
    debug: bool = False
    log_level: str = "INFO"
    allowed_origins: str = "*"

    # Grids (build_grid 기본값)
    grid_n: int = 2000
    grid_grading: float = 0.99

    # Adaptive weighted quadrature
    quad_panels: int = 40
    quad_grading: float = 0.7
    quad_order: int = 8
    quad_tol: float = 1e-10
    quad_max_depth: int = 48
    quad_max_panels: int = 4000

    # Panel grids (Green 역연산자, PDE 풀이)
    panel_order: int = 16
    panel_count: int = 120
    panel_floor: float = 1e-8

    # Reproducibility / outputs
    seed: int = 0
    output_dir: str = "results"
    workers: int = 1

    # Optimizer (maximize_lmu)
    opt_max_iters: int = 50000
    opt_tol: float = 1e-10
    opt_restarts: int = 3
    opt_nodes: int = 240

    # Moser sequences
    moser_eps: float = 0.05

    # Regime classification
    regime_tol: float = 1e-12

    # PDE solvers
    pde_tol: float = 1e-12
    pde_max_iters: int = 500
    pde_damping: float = 0.5

    @property
    def allowed_origins_list(self) -> list[str]:
        return [origin.strip() for origin in self.allowed_origins.split(",") if origin.strip()]

    def __init__(self, **kwargs):
        env_file = _get_env_file()
        logger = logging.getLogger(__name__)
        logger.info(f"🔧 Loading environment: {os.getenv('ENVIRONMENT', 'development')}")
        logger.info(f"📁 Using env file: {env_file}")

        super().__init__(_env_file=env_file, **kwargs)

    class Config:
        case_sensitive = False
        extra = "ignore"


settings = Settings()
