# app/schemas/moser.py

from typing import Any, List, Optional

from pydantic import BaseModel, Field, field_validator


class MoserSequenceParams(BaseModel):
    """ψ_{m,ε}(r) = H(log(R/r)/log m) 파라미터

    phi 가 None 이면 profile_phi(k) 의 최소 차수 프로파일을 사용한다.
    """
    m: float = Field(..., gt=1)
    eps: float = Field(0.05, gt=0, lt=0.5)
    k: int = Field(..., ge=1)
    R: float = Field(1.0, gt=0)
    phi: Optional[List[float]] = None

    class Config:
        frozen = True

    @field_validator("phi")
    @classmethod
    def validate_phi(cls, v):
        if v is not None and len(v) < 2:
            raise ValueError("phi needs at least two coefficients")
        return v


class OptimizerConfig(BaseModel):
    max_iters: int = Field(50000, ge=1)
    tol: float = Field(1e-10, gt=0)
    seed: int = 0
    restarts: int = Field(3, ge=1)
    nodes: int = Field(240, ge=16)


class MaximizeReport(BaseModel):
    value: float
    maximizer: Any
    norm: float
    iterations: int
    converged: bool
    restart_values: List[float] = []

    class Config:
        from_attributes = True
        arbitrary_types_allowed = True


class SequenceNormReport(BaseModel):
    norm_p: float
    rescaled: float
    bound: float
    lower_order: float
    log_m: float

    @property
    def within_bound(self) -> bool:
        return self.rescaled <= self.bound


class BlowupRow(BaseModel):
    m: float
    value: float
    lower_bound: float
    norm: float
    capped: bool = False


class BlowupTable(BaseModel):
    mu: float
    mu0: float
    rows: List[BlowupRow]
    predicted_exponent: float
    empirical_exponent: Optional[float] = None

    @property
    def values(self) -> List[float]:
        return [row.value for row in self.rows]


class CriticalRow(BaseModel):
    name: str
    R: float
    admissible: bool
    norm: Optional[float] = None
    value: Optional[float] = None
    reason: str = ""
