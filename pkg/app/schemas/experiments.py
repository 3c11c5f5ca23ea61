# app/schemas/experiments.py

import math
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from app.core.config import settings
from app.core.constants import (
    COEFFICIENT_CATALOG,
    DEFAULT_M_LIST,
    EXPERIMENTS,
    NONLINEARITY_CATALOG,
    STOCHASTIC_EXPERIMENTS,
)
from app.schemas.pde import ExpProblem, PowerProblem
from app.schemas.spaces import SpaceParams


def _split(v):
    """INI 값 "1, 2, 3" → ["1", "2", "3"]"""
    if isinstance(v, str):
        return [item.strip() for item in v.split(",") if item.strip()]
    return v


class ExperimentParams(BaseModel):
    """실험 파라미터 공통 베이스. 알 수 없는 키는 거부한다."""
    tol: float = Field(1e-10, gt=0)

    class Config:
        extra = "forbid"
        frozen = True


# ------------------------------------------------------------------
# 공간 / 임베딩
# ------------------------------------------------------------------

class RegimesParams(ExperimentParams):
    k: int = Field(1, ge=1)
    p: float = Field(2.0, ge=1)
    theta: float = Field(0.0, gt=-1)
    R: float = Field(1.0, gt=0)
    alpha_lower: float = Field(0.0, gt=-1)
    alpha_top: List[float] = [0.0, 0.5, 1.0, 1.5, 3.0]

    @field_validator("alpha_top", mode="before")
    @classmethod
    def split_lists(cls, v):
        return _split(v)

    @model_validator(mode="after")
    def validate_spaces(self):
        for a in self.alpha_top:
            self.space(a)
        return self

    def space(self, alpha_top: float) -> SpaceParams:
        return SpaceParams(
            k=self.k, p=self.p, R=self.R, alphas=[self.alpha_lower] * self.k + [alpha_top], theta=self.theta
        )


class NormsParams(ExperimentParams):
    k: int = Field(1, ge=1)
    p: float = Field(2.0, ge=1)
    theta: float = Field(0.0, gt=-1)
    R: float = Field(1.0, gt=0)
    alphas: List[float] = [0.0, 1.0]

    @field_validator("alphas", mode="before")
    @classmethod
    def split_lists(cls, v):
        return _split(v)

    @model_validator(mode="after")
    def validate_alphas(self):
        if len(self.alphas) != self.k + 1:
            raise ValueError(f"alphas needs {self.k + 1} entries, got {len(self.alphas)}")
        self.space()
        return self

    def space(self) -> SpaceParams:
        return SpaceParams(k=self.k, p=self.p, R=self.R, alphas=self.alphas, theta=self.theta)


class HardyParams(ExperimentParams):
    """(p, α) 쌍은 INI 에서 "2:3, 2:5" 형태"""
    tol: float = Field(1e-6, gt=0)
    R: float = Field(1.0, gt=0)
    pairs: List[Tuple[float, float]] = [(2.0, 3.0), (2.0, 5.0), (3.0, 4.0)]
    deltas: List[float] = [0.05, 0.05, 0.02]
    fraction: float = Field(0.95, gt=0, le=1)

    @field_validator("pairs", mode="before")
    @classmethod
    def split_pairs(cls, v):
        if isinstance(v, str):
            return [tuple(item.split(":")) for item in _split(v)]
        return v

    @field_validator("deltas", mode="before")
    @classmethod
    def split_lists(cls, v):
        return _split(v)

    @model_validator(mode="after")
    def validate_lengths(self):
        if len(self.deltas) != len(self.pairs):
            raise ValueError(f"deltas needs one entry per pair ({len(self.pairs)}), got {len(self.deltas)}")
        return self


class SharpnessParams(ExperimentParams):
    """X^{1,1}_R(1,2) 에서 u = t^{−2/q} 의 절단 노름"""
    tol: float = Field(0.01, gt=0)
    R: float = Field(1.0, gt=0)
    q_list: List[float] = [1.5, 2.0]
    lowers: List[float] = [1e-2, 1e-3, 1e-4, 1e-5]

    @field_validator("q_list", "lowers", mode="before")
    @classmethod
    def split_lists(cls, v):
        return _split(v)

    @field_validator("q_list")
    @classmethod
    def validate_q(cls, v):
        for q in v:
            if not q > 1:
                raise ValueError(f"Invalid q: {q}")
        return v

    @field_validator("lowers")
    @classmethod
    def validate_lowers(cls, v):
        if len(v) < 2 or any(a <= 0 for a in v):
            raise ValueError(f"lowers needs at least two positive cutoffs: {v}")
        return sorted(v, reverse=True)


# ------------------------------------------------------------------
# Moser
# ------------------------------------------------------------------

class AtmSpaceParams(ExperimentParams):
    """ATM 공간 X^{k,p}_R. alphas 가 없으면 모든 가중치를 kp−1 로 둔다."""
    k: int = Field(1, ge=1)
    p: float = Field(2.0, gt=1)
    theta: float = Field(0.0, gt=-1)
    R: float = Field(1.0, gt=0)
    alphas: Optional[List[float]] = None
    eps: float = Field(settings.moser_eps, gt=0, lt=0.5)

    @field_validator("alphas", mode="before")
    @classmethod
    def split_alphas(cls, v):
        return _split(v)

    @model_validator(mode="after")
    def validate_space(self):
        self.space()
        return self

    @property
    def weights(self) -> List[float]:
        if self.alphas is not None:
            return list(self.alphas)
        return [self.k * self.p - 1] * (self.k + 1)

    def space(self) -> SpaceParams:
        return SpaceParams(k=self.k, p=self.p, R=self.R, alphas=self.weights, theta=self.theta)


class MoserNormsParams(AtmSpaceParams):
    log_m: List[float] = [10.0, 20.0]
    rescaled_floor: float = 1.0
    slack: float = Field(0.5, ge=0)

    @field_validator("log_m", mode="before")
    @classmethod
    def split_lists(cls, v):
        return _split(v)

    @field_validator("log_m")
    @classmethod
    def validate_log_m(cls, v):
        if any(not x > 0 for x in v):
            raise ValueError(f"log_m values must be positive: {v}")
        return v


class BlowupParams(AtmSpaceParams):
    mu_list: List[float] = [0.5, 1.5]
    m_list: List[float] = list(DEFAULT_M_LIST)
    growth_factor: float = Field(10.0, gt=1)
    stable_factor: float = Field(2.0, gt=1)

    @field_validator("mu_list", "m_list", mode="before")
    @classmethod
    def split_lists(cls, v):
        return _split(v)

    @field_validator("m_list")
    @classmethod
    def validate_m(cls, v):
        if len(v) < 2 or any(m <= 1 for m in v):
            raise ValueError(f"m_list needs at least two values above 1: {v}")
        return sorted(v)


class MaximizeParams(AtmSpaceParams):
    mu_fraction: float = Field(0.5, ge=0, lt=1)
    restarts: int = Field(settings.opt_restarts, ge=1)
    max_iters: int = Field(settings.opt_max_iters, ge=1)
    opt_tol: float = Field(settings.opt_tol, gt=0)
    nodes: int = Field(settings.opt_nodes, ge=16)
    agreement: float = Field(1e-3, gt=0)
    norm_tol: float = Field(1e-6, gt=0)


class CriticalK1Params(ExperimentParams):
    tol: float = Field(1e-8, gt=0)
    A: float = Field(2.0, ge=1)
    theta: float = Field(0.0, gt=-1)
    alpha0: float = Field(0.0, gt=-1)
    p: float = Field(2.0, ge=2)
    R_list: List[float] = [0.5, 1.0, 2.0]
    T: float = Field(8.0, gt=0)
    energy_tol: float = Field(1e-9, ge=0)

    @field_validator("R_list", mode="before")
    @classmethod
    def split_lists(cls, v):
        return _split(v)


# ------------------------------------------------------------------
# 연산자 / 상수
# ------------------------------------------------------------------

class NavierConstantsParams(ExperimentParams):
    tol: float = Field(1e-12, gt=0)
    k_list: List[int] = [1, 2]
    theta_list: List[float] = [0.0, 1.0, 2.5]
    gamma_list: List[float] = [3.0, 4.0, 5.5]
    p_list: List[float] = [2.0, 3.0, 4.0]
    product_k: List[int] = [4, 6]
    product_gammas: List[float] = [7.0, 9.5]
    product_tol: float = Field(1e-10, gt=0)

    @field_validator(
        "k_list", "theta_list", "gamma_list", "p_list", "product_k", "product_gammas", mode="before"
    )
    @classmethod
    def split_lists(cls, v):
        return _split(v)


class CoefficientsParams(ExperimentParams):
    tol: float = Field(1e-12, gt=0)
    gammas: List[float] = [2.5, 3.5, 5.5, 7.25]
    n: int = Field(6, ge=1)
    convention: str = "stated"
    psi_levels: int = Field(2, ge=0)
    psi_m: float = Field(100.0, gt=1)
    psi_tol: float = Field(1e-8, gt=0)

    @field_validator("gammas", mode="before")
    @classmethod
    def split_lists(cls, v):
        return _split(v)

    @field_validator("convention")
    @classmethod
    def validate_convention(cls, v):
        if v not in ("stated", "operator"):
            raise ValueError(f"Unknown coefficient convention: {v}")
        return v


class GreenRoundtripParams(ExperimentParams):
    tol: float = Field(1e-6, gt=0)
    gammas: List[float] = [2.0, 3.0, 5.0]
    n: int = Field(settings.grid_n, ge=64)
    samples: int = Field(10, ge=1)
    terms: int = Field(6, ge=1)
    R: float = Field(1.0, gt=0)
    # 원점 패널의 반올림 오차가 노드 이계 미분에서 증폭되지 않는 하한
    floor: float = Field(1e-4, gt=0, lt=1)

    @field_validator("gammas", mode="before")
    @classmethod
    def split_lists(cls, v):
        return _split(v)

    @field_validator("gammas")
    @classmethod
    def validate_gammas(cls, v):
        for g in v:
            if not g > -1:
                raise ValueError(f"Invalid gamma: {g}")
        return v


# ------------------------------------------------------------------
# PDE
# ------------------------------------------------------------------

class PowerProblemConfig(ExperimentParams):
    tol: float = Field(1e-6, gt=0)
    alpha: float = Field(3.0, ge=3)
    theta: float = 3.0
    p: float = Field(2.0, ge=2)
    R: float = Field(1.0, gt=0)
    coefficient: str = "one"
    coefficient_param: float = Field(1.0, ge=0)
    n_list: List[int] = []
    boundary_tol: float = Field(1e-8, gt=0)
    defect_tol: float = Field(1e-3, gt=0)
    # 이 이하의 |u‴(0⁺)|/|Δ_αu(0)| 는 세분화 단조성 검사에서 제외
    u3_floor: float = Field(1e-6, gt=0)
    weak_tol: float = Field(1e-5, gt=0)

    @field_validator("n_list", mode="before")
    @classmethod
    def split_lists(cls, v):
        return _split(v)

    @field_validator("coefficient")
    @classmethod
    def validate_coefficient(cls, v):
        if v not in COEFFICIENT_CATALOG:
            raise ValueError(f"Unknown coefficient: {v}")
        return v

    @model_validator(mode="after")
    def validate_problem(self):
        self.problem()
        return self

    def problem(self) -> PowerProblem:
        return PowerProblem(
            alpha=self.alpha,
            theta=self.theta,
            p=self.p,
            R=self.R,
            coefficient=self.coefficient,
            coefficient_param=self.coefficient_param,
        )


class ExpProblemConfig(ExperimentParams):
    tol: float = Field(1e-10, gt=0)
    theta: float = Field(3.0, gt=2)
    nonlinearity: str = "exp_quadratic"
    a: float = Field(0.5, ge=0)
    mu: float = Field(0.5, ge=0)
    c1: float = Field(10.0, gt=0)
    R: float = Field(1.0, gt=0)
    m_delta: Optional[float] = Field(None, gt=0)
    n: Optional[int] = Field(None, ge=64)
    restarts: int = Field(settings.opt_restarts, ge=1)
    restart_tol: float = Field(1e-3, gt=0)
    linear_tol: float = Field(1e-4, gt=0)

    @field_validator("nonlinearity")
    @classmethod
    def validate_nonlinearity(cls, v):
        if v not in NONLINEARITY_CATALOG:
            raise ValueError(f"Unknown nonlinearity: {v}")
        return v

    @model_validator(mode="after")
    def validate_problem(self):
        self.problem()
        return self

    def problem(self) -> ExpProblem:
        return ExpProblem(
            theta=self.theta,
            nonlinearity=self.nonlinearity,
            a=self.a,
            mu=self.mu,
            c1=self.c1,
            R=self.R,
            m_delta=self.m_delta,
        )


# ------------------------------------------------------------------
# 실행 설정 / 결과
# ------------------------------------------------------------------

class ExperimentConfig(BaseModel):
    """실험 하나의 실행 설정

    params 는 실험별 모델(EXPERIMENT_PARAMS)로 검증된다. seed 는 확률적 실험에서 필수.
    """
    experiment: str
    params: Dict[str, Any] = {}
    out: str = settings.output_dir
    seed: Optional[int] = Field(None, ge=0)
    tol: Optional[float] = Field(None, gt=0)
    grid_n: Optional[int] = Field(None, ge=64)
    workers: int = Field(settings.workers, ge=1)

    class Config:
        extra = "forbid"

    @field_validator("experiment")
    @classmethod
    def validate_experiment(cls, v):
        if v not in EXPERIMENTS:
            raise ValueError(f"Unknown experiment: {v}")
        return v

    @model_validator(mode="after")
    def validate_seed(self):
        if self.experiment in STOCHASTIC_EXPERIMENTS and self.seed is None:
            raise ValueError(f"seed is required for stochastic experiment {self.experiment}")
        return self


class ExperimentSummary(BaseModel):
    experiment: str
    passed: bool
    status: str
    failures: List[str] = []
    metrics: Dict[str, Any] = {}
    rows: int = 0
    seed: Optional[int] = None

    class Config:
        from_attributes = True

    def as_lines(self) -> List[str]:
        """정렬된 key = value 줄"""
        flat: Dict[str, Any] = {
            "experiment": self.experiment,
            "passed": self.passed,
            "status": self.status,
            "failures": ",".join(self.failures) or "none",
            "rows": self.rows,
            "seed": "none" if self.seed is None else self.seed,
        }
        for key, value in self.metrics.items():
            flat[f"metric.{key}"] = value
        return [f"{key} = {format_value(flat[key])}" for key in sorted(flat)]


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.12g}"
    return str(value)


# 실험 이름 → 파라미터 모델
EXPERIMENT_PARAMS = {
    "regimes": RegimesParams,
    "norms": NormsParams,
    "verify-hardy": HardyParams,
    "verify-embedding-sharpness": SharpnessParams,
    "moser-norms": MoserNormsParams,
    "blowup": BlowupParams,
    "maximize": MaximizeParams,
    "critical-k1": CriticalK1Params,
    "navier-constants": NavierConstantsParams,
    "coefficients": CoefficientsParams,
    "green-roundtrip": GreenRoundtripParams,
    "solve-power": PowerProblemConfig,
    "solve-exp": ExpProblemConfig,
}
