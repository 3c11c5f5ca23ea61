# app/schemas/pde.py

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from app.core.config import settings
from app.core.constants import COEFFICIENT_CATALOG, NONLINEARITY_CATALOG


class PowerProblem(BaseModel):
    """Δ_α²u = r^{θ−α} g(r)|u|^{p−2}u, Navier 조건"""
    alpha: float = Field(..., ge=3)
    theta: float
    p: float = Field(2.0, ge=2)
    R: float = Field(1.0, gt=0)
    coefficient: str = "one"
    coefficient_param: float = Field(1.0, ge=0)

    class Config:
        frozen = True

    @field_validator("coefficient")
    @classmethod
    def validate_coefficient(cls, v):
        if v not in COEFFICIENT_CATALOG:
            raise ValueError(f"Unknown coefficient: {v}")
        return v

    @model_validator(mode="after")
    def validate_window(self):
        if not self.theta > self.alpha - 1:
            raise ValueError(f"theta must exceed alpha - 1: theta={self.theta}, alpha={self.alpha}")
        if self.alpha > 3 and not self.p < 2 * (self.theta + 1) / (self.alpha - 3):
            raise ValueError(f"p must be below 2(theta+1)/(alpha-3): p={self.p}")
        return self


class ExpProblem(BaseModel):
    """Δ₃²u = r^{θ−3} f(r,u), |f(r,t)| ≤ c₁e^{μ(m_Δt)²}

    m_delta 가 None 이면 estimate_m_delta 로 계산한다.
    """
    theta: float = Field(..., gt=2)
    nonlinearity: str = "linear"
    a: float = Field(0.5, ge=0)
    mu: float = Field(0.5, ge=0)
    c1: float = Field(10.0, gt=0)
    R: float = Field(1.0, gt=0)
    m_delta: Optional[float] = Field(None, gt=0)

    class Config:
        frozen = True

    @field_validator("nonlinearity")
    @classmethod
    def validate_nonlinearity(cls, v):
        if v not in NONLINEARITY_CATALOG:
            raise ValueError(f"Unknown nonlinearity: {v}")
        return v

    @model_validator(mode="after")
    def validate_mu(self):
        if not self.mu < self.theta + 1:
            raise ValueError(f"mu must be below theta + 1: mu={self.mu}, theta={self.theta}")
        return self

    @property
    def alpha(self) -> float:
        return 3.0


class SourceProblem(BaseModel):
    """Δ_α²u = λ·h(r) (고정 강제항)"""
    alpha: float = Field(..., gt=-1)
    R: float = Field(1.0, gt=0)
    source: Any

    class Config:
        frozen = True
        arbitrary_types_allowed = True

    @property
    def theta(self) -> float:
        return self.alpha


class SolverConfig(BaseModel):
    n: Optional[int] = Field(None, ge=64)
    tol: float = Field(settings.pde_tol, gt=0)
    max_iters: int = Field(settings.pde_max_iters, ge=1)
    damping: float = Field(settings.pde_damping, ge=0, lt=1)
    seed: int = settings.seed
    restarts: int = Field(settings.opt_restarts, ge=1)
    ascent_iters: int = Field(settings.opt_max_iters, ge=1)
    ascent_tol: float = Field(settings.opt_tol, gt=0)


class EndpointDiagnostics(BaseModel):
    u_R: float
    delta_R: float
    u1_0: float
    ddelta_0: float
    u2_0: float
    u3_0: float
    delta_0: float
    defect: float
    stable: bool = True


class SolveReport(BaseModel):
    """풀이 결과

    u 는 격자 노드 값(GridFunction), solution 은 Green 역연산자 합성으로 만든 RadialFunction.
    multiplier 는 반환된 u 에 대해 Δ²u = κ r^{θ−α} f(r,u) 를 만족하는 κ.
    """
    u: Any
    solution: Any
    lam: float
    multiplier: float
    rayleigh: Optional[float] = None
    residual: float
    relative_residual: float
    endpoints: Optional[EndpointDiagnostics] = None
    iterations: int
    converged: bool
    scaling: Dict[str, Any] = {}
    restart_values: List[float] = []

    class Config:
        from_attributes = True
        arbitrary_types_allowed = True
