# app/schemas/spaces.py

import math
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator


class Regime(str, Enum):
    SOBOLEV = "Sobolev"
    ATM = "AdamsTrudingerMoser"
    MORREY = "Morrey"


class SpaceParams(BaseModel):
    """X^{k,p}_R(α₀,…,α_k) 와 측도 r^θ dr 파라미터"""
    k: int = Field(..., ge=1)
    p: float = Field(..., ge=1)
    R: float = Field(..., gt=0)
    alphas: List[float]
    theta: float = Field(0.0, gt=-1)

    class Config:
        frozen = True

    @field_validator("alphas")
    @classmethod
    def validate_alphas(cls, v, info):
        k = info.data.get("k")
        if k is not None and len(v) != k + 1:
            raise ValueError(f"Expected {k + 1} weights alpha_0..alpha_k, got {len(v)}")
        for j, a in enumerate(v):
            if not math.isfinite(a):
                raise ValueError(f"Invalid weight alpha_{j}: {a}")
            # α₀ = −1 은 PDE 절의 X_ATM, X_S 공간에서만 사용
            if a > -1 or (j == 0 and a == -1):
                continue
            raise ValueError(f"Weight alpha_{j} must exceed -1: {a}")
        return v

    @property
    def sigma(self) -> float:
        return self.alphas[-1] - self.k * self.p + 1

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1) if self.p > 1 else math.inf


class EmbeddingReport(BaseModel):
    regime: Regime
    exponent: float
    unbounded: bool = False
    holder: Optional[float] = None


class HardyCheck(BaseModel):
    p: float
    alpha: float
    constant: float
    ratio: float
    passed: bool
