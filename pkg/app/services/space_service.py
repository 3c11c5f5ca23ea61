# app/services/space_service.py

import logging
import math
from typing import Callable, Sequence

import numpy as np

from app.core.config import settings
from app.schemas.spaces import EmbeddingReport, Regime, SpaceParams
from app.services.function_service import RadialFunction, power
from app.services.quadrature_service import (
    EstimationFailure,
    build_grid,
    integrate_interval,
    integrate_weighted,
)

logger = logging.getLogger(__name__)


class SpaceError(Exception):
    """가중 Sobolev 공간 관련 예외"""
    pass


class RegimeError(SpaceError, ValueError):
    """연산이 지원하지 않는 regime"""
    pass


class HardyConstraintError(SpaceError, ValueError):
    """Hardy 형 부등식의 파라미터 조건 위반"""
    pass


class DegenerateRatioError(SpaceError):
    """비율의 분모 노름이 0 인데 분자는 0 이 아님"""
    pass


class DivergentIntegralError(SpaceError):
    """노름의 j 차 항 적분이 발산

    Attributes:
        j: 도함수 차수
        estimate: 마지막 적분 추정값
    """

    def __init__(self, j: int, estimate: float):
        super().__init__(f"Weighted integral of derivative {j} diverges (last estimate {estimate:.6g})")
        self.j = j
        self.estimate = estimate


def regime(params: SpaceParams, tol: float | None = None) -> Regime:
    """σ = α_k − kp + 1 의 부호로 regime 결정"""
    tol = settings.regime_tol if tol is None else tol
    sigma = params.sigma
    if abs(sigma) <= tol:
        return Regime.ATM
    return Regime.SOBOLEV if sigma > 0 else Regime.MORREY


def power_integral(
    f: Callable[[np.ndarray], np.ndarray],
    q: float,
    theta: float,
    R: float,
    lower: float = 0.0,
    breakpoints: Sequence[float] = (),
) -> float:
    """∫_lower^R |f|^q r^θ dr

    θ ≤ −1 이면 r^θ 를 피적분함수에 넣고 가중치 0 으로 적분한다.
    """
    if theta > -1 or lower > 0:
        return integrate_weighted(lambda r: np.abs(f(r)) ** q, theta, R, lower=lower, breakpoints=breakpoints)
    return integrate_weighted(lambda r: np.abs(f(r)) ** q * r ** theta, 0.0, R, breakpoints=breakpoints)


def weighted_lq_norm(u: RadialFunction, q: float, theta: float, R: float | None = None, lower: float = 0.0) -> float:
    """∥u∥_{L^q_θ(lower,R)}"""
    R = R or u.R
    return power_integral(u, q, theta, R, lower, u.breakpoints) ** (1.0 / q)


def sobolev_norm(u: RadialFunction, params: SpaceParams, lower: float = 0.0) -> float:
    """∥u∥_{X^{k,p}_R} = (Σ_j ∥u^{(j)}∥^p_{L^p_{α_j}})^{1/p}

    Args:
        lower: 0 보다 크면 [lower, R] 로 절단한 노름

    Raises:
        DivergentIntegralError: j 차 항이 발산
    """
    return sum(_norm_terms(u, params, lower)) ** (1.0 / params.p)


def _norm_terms(u: RadialFunction, params: SpaceParams, lower: float = 0.0) -> list[float]:
    terms = []
    for j, alpha in enumerate(params.alphas):
        try:
            terms.append(power_integral(u.derivative(j), params.p, alpha, params.R, lower, u.breakpoints))
        except EstimationFailure as e:
            logger.warning(f"⚠️ Norm term j={j} of {u.name or 'function'} failed: {e}")
            raise DivergentIntegralError(j, e.estimate) from e
    return terms


def embedding_exponent(params: SpaceParams) -> EmbeddingReport:
    """임베딩 지수

    Sobolev: p* = (θ+1)p/σ, ATM: 모든 q<∞ (unbounded), Morrey: Hölder 지수
    γ = min{1+⌊(α_k+1)/p⌋−(α_k+1)/p, 1−1/p}
    """
    reg = regime(params)
    if reg == Regime.SOBOLEV:
        return EmbeddingReport(regime=reg, exponent=(params.theta + 1) * params.p / params.sigma)
    if reg == Regime.ATM:
        return EmbeddingReport(regime=reg, exponent=math.inf, unbounded=True)
    s = (params.alphas[-1] + 1) / params.p
    holder = min(1 + math.floor(s) - s, 1 - 1 / params.p)
    return EmbeddingReport(regime=reg, exponent=holder, holder=holder)


def hardy_constant(p: float, alpha: float) -> float:
    """(∫|u|^p r^{α−p})^{1/p} ≤ C (∫|u′|^p r^α)^{1/p} 의 최적 상수 p/(α−p+1)"""
    if not p > 1:
        raise HardyConstraintError(f"Hardy constant needs p > 1: {p}")
    if not alpha - p + 1 > 0:
        raise HardyConstraintError(f"Hardy constant needs alpha - p + 1 > 0: alpha={alpha}, p={p}")
    return p / (alpha - p + 1)


def hardy_ratio(u: RadialFunction, p: float, alpha: float, R: float | None = None) -> float:
    """∥u∥_{L^p_{α−p}} / ∥u′∥_{L^p_α}. 0/0 은 0"""
    R = R or u.R
    u_end = float(u(np.array([R]))[0])
    if abs(u_end) > 1e-12:
        logger.debug(f"🔍 hardy_ratio on function with u(R)={u_end:.3e}")
    num = power_integral(u, p, alpha - p, R, breakpoints=u.breakpoints) ** (1.0 / p)
    den = power_integral(u.derivative(1), p, alpha, R, breakpoints=u.breakpoints) ** (1.0 / p)
    if den == 0:
        if num == 0:
            return 0.0
        raise DegenerateRatioError("hardy_ratio denominator vanishes for a nonzero function")
    return num / den


def hardy_extremal_family(p: float, alpha: float, R: float, delta: float) -> RadialFunction:
    """u_δ(r) = r^{−s+δ} − R^{−s+δ}, s = (α−p+1)/p. δ→0⁺ 에서 비율이 상수에 접근"""
    s = (alpha - p + 1) / p
    if not 0 < delta < s:
        raise ValueError(f"Invalid delta {delta} for s={s}")
    b = -s + delta
    base = power(b, R, order=1)
    shift = R ** b
    return RadialFunction(
        (lambda r: base(r) - shift, base.derivative(1)),
        R,
        name=f"hardy-extremal(delta={delta:g})",
    )


def hardy_admissible(p: float, q: float, theta: float, alpha: float, side: str) -> bool:
    """가중 Hardy 부등식 (∫|u|^q r^θ)^{1/q} ≤ C(∫|u′|^p r^α)^{1/p} 성립 조건

    Args:
        side: "origin-vanishing" (u(0⁺)=0) 또는 "boundary-vanishing" (u(R)=0)
    """
    if p < 1 or q < 1:
        raise ValueError(f"Invalid exponents p={p}, q={q}")
    s = alpha - p + 1
    if side == "origin-vanishing":
        if s >= 0:
            return False
        bound = (theta + 1) * p / s
        return q >= bound if p <= q else q > bound
    if side == "boundary-vanishing":
        if theta > -1 and s <= 0:
            return True
        if s <= 0:
            return False
        bound = (theta + 1) * p / s
        return q <= bound if p <= q else q < bound
    raise ValueError(f"Invalid side: {side}")


def pointwise_bound_ratio(u: RadialFunction, params: SpaceParams, n: int | None = None) -> float:
    """반지름 점별 추정의 격자 상한 비율

    Sobolev: sup |u(t)|·t^{σ/p} / ∥u∥
    ATM: sup (|u(t)| − |log(t/R)|^{(p−1)/p}∥u^{(k)}∥_{L^p_{α_k}})₊ / ∥u∥

    노름은 격자 범위 [min node, R] 로 절단해 계산한다.
    """
    reg = regime(params)
    if reg == Regime.MORREY:
        raise RegimeError("pointwise_bound_ratio does not apply in the Morrey regime; use morrey_ratio")

    grid = build_grid(params.R, settings.grid_n if n is None else n, settings.grid_grading)
    t = grid.nodes
    lower = grid.min_node
    terms = _norm_terms(u, params, lower)
    norm = sum(terms) ** (1.0 / params.p)
    if norm == 0:
        return 0.0
    values = np.abs(u(t))

    if reg == Regime.SOBOLEV:
        ratio = values * t ** (params.sigma / params.p) / norm
    else:
        top = terms[-1] ** (1.0 / params.p)
        envelope = np.abs(np.log(t / params.R)) ** ((params.p - 1) / params.p) * top
        ratio = np.maximum(values - envelope, 0.0) / norm
    return float(ratio.max())


def morrey_exponent(p: float, alpha1: float) -> float:
    return min(1 - (alpha1 + 1) / p, 1 - 1 / p)


def morrey_ratio(u: RadialFunction, params: SpaceParams, n: int | None = None) -> float:
    """max |u(r)−u(s)| / (|r−s|^γ ∥u′∥_{L^p_{α₁}}) over node pairs"""
    if params.k != 1 or regime(params) != Regime.MORREY or not params.p > 1:
        raise RegimeError("morrey_ratio needs k=1, p>1 and alpha_1 - p + 1 < 0")
    gamma = morrey_exponent(params.p, params.alphas[1])
    grad = weighted_lq_norm(RadialFunction((u.derivative(1),), u.R, u.breakpoints), params.p, params.alphas[1])
    if grad == 0:
        return 0.0

    grid = build_grid(params.R, settings.grid_n if n is None else n, settings.grid_grading)
    x = grid.nodes
    values = u(x)
    best = 0.0
    for i in range(len(x) - 1):
        dv = np.abs(values[i + 1:] - values[i])
        dx = x[i + 1:] - x[i]
        best = max(best, float((dv / dx ** gamma).max()))
    return best / grad


def morrey_constant(p: float, alpha1: float) -> float:
    """Morrey 추정의 명시적 상수 (0 ≤ α₁ < p−1)"""
    if not (0 <= alpha1 < p - 1):
        raise HardyConstraintError(f"Morrey constant needs 0 <= alpha_1 < p - 1: alpha_1={alpha1}, p={p}")
    d = p - 1 - alpha1
    return ((p - 1) / d) ** ((p - 1) / p) * 2 * p / d


def _dual_power_norm(alpha: float, p: float, a: float, b: float) -> float:
    """∥r^{−α/p}∥_{L^{p′}(a,b)}"""
    if p == 1:
        return max(a ** -alpha, b ** -alpha)
    q = p / (p - 1)
    return integrate_interval(lambda r: r ** (-alpha * q / p), a, b) ** (1.0 / q)


def boundary_bound_constant(alpha0: float, alpha1: float, p: float, R: float) -> float:
    """|u(R)| ≤ C ∥u∥_{X^{1,p}_R} 의 평균값 상수"""
    return _dual_power_norm(alpha1, p, R / 2, R) + (2 / R) * _dual_power_norm(alpha0, p, R / 2, R)


def boundary_ratio(u: RadialFunction, params: SpaceParams) -> float:
    """|u(R)| / ∥u∥_{X^{1,p}_R}"""
    sub = SpaceParams(k=1, p=params.p, R=params.R, alphas=list(params.alphas[:2]), theta=params.theta)
    norm = sobolev_norm(u, sub)
    if norm == 0:
        return 0.0
    return abs(float(u(np.array([params.R]))[0])) / norm


def hardy_type_ratio(u: RadialFunction, params: SpaceParams, j: int) -> float:
    """∥u^{(k−j)}/t^j∥_{L^p_{α_k}} / (Σ_{i=k−j}^k ∥u^{(i)}∥^p_{L^p_{α_i}})^{1/p}"""
    k, p = params.k, params.p
    if not 1 <= j <= k:
        raise ValueError(f"Invalid order j={j} for k={k}")
    if not params.alphas[-1] - j * p + 1 > 0:
        raise HardyConstraintError(f"Hardy-type ratio needs alpha_k - j p + 1 > 0 (j={j})")
    num = power_integral(u.derivative(k - j), p, params.alphas[-1] - j * p, params.R, breakpoints=u.breakpoints)
    den = sum(
        power_integral(u.derivative(i), p, params.alphas[i], params.R, breakpoints=u.breakpoints)
        for i in range(k - j, k + 1)
    )
    if den == 0:
        return 0.0
    return (num / den) ** (1.0 / p)


def weights_admissible(params: SpaceParams) -> bool:
    """α_{j−1} ≥ α_j − p (j=1..k) 이면 두 항 노름과 전체 노름이 동치"""
    a = params.alphas
    return all(a[j - 1] >= a[j] - params.p for j in range(1, params.k + 1))
