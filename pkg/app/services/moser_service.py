# app/services/moser_service.py

import logging
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import sparse
from scipy.optimize import linprog
from scipy.sparse.linalg import splu
from sklearn.linear_model import LinearRegression

from app.core.config import settings
from app.core.constants import (
    DEFAULT_M_LIST,
    LUXEMBURG_BRACKET,
    LUXEMBURG_MAX_BISECTIONS,
    PHI_EXTRA_DEGREE_CAP,
    PHI_SCAN_POINTS,
)
from app.schemas.moser import (
    BlowupRow,
    BlowupTable,
    CriticalRow,
    MaximizeReport,
    MoserSequenceParams,
    OptimizerConfig,
    SequenceNormReport,
)
from app.schemas.spaces import Regime, SpaceParams
from app.services.function_service import GridFunction, RadialFunction, compose_log
from app.services.quadrature_service import (
    EstimationFailure,
    build_grid,
    integrate_interval,
    integrate_weighted,
)
from app.services.space_service import (
    DivergentIntegralError,
    RegimeError,
    power_integral,
    regime,
    sobolev_norm,
)
from app.utils.ascent import projected_ascent

logger = logging.getLogger(__name__)

Evaluator = Callable[[np.ndarray], np.ndarray]


class MoserError(Exception):
    """Moser 함수열 / 지수 함수형 관련 예외"""
    pass


class PhiConstructionError(MoserError, ValueError):
    """차수 상한 내에서 φ′ ≥ 0 인 프로파일을 찾지 못함"""
    pass


class KAMembershipError(MoserError, ValueError):
    """u(R) ≤ A·u(r) (또는 w(0) ≤ A·w(t)) 조건 위반"""
    pass


class LuxemburgBracketError(MoserError):
    """Luxemburg 이분법 구간을 찾지 못함"""
    pass


class OptimizationError(MoserError):
    pass


def conjugate(p: float) -> float:
    return p / (p - 1)


def mu0(theta: float, k: int, p: float) -> float:
    """경계 조건 없는 공간의 최적 상수 μ₀ = (θ+1)[(k−1)!]^{p/(p−1)}"""
    if not theta > -1:
        raise ValueError(f"Invalid theta: {theta}")
    if not p > 1:
        raise ValueError(f"Invalid p: {p}")
    if k < 1:
        raise ValueError(f"Invalid k: {k}")
    return (theta + 1) * math.factorial(k - 1) ** conjugate(p)


def moser_functional(u: RadialFunction, mu: float, p: float, theta: float, R: float | None = None) -> float:
    """∫_0^R exp(μ|u|^{p′}) r^θ dr

    Raises:
        EstimationFailure: 원점에서 피적분함수가 적분 불가능하게 증가
    """
    if mu < 0:
        raise ValueError(f"Invalid mu: {mu}")
    R = R or u.R
    q = conjugate(p)

    def integrand(r):
        with np.errstate(over="ignore"):
            return np.exp(mu * np.abs(u(r)) ** q)

    return integrate_weighted(integrand, theta, R, breakpoints=u.breakpoints)


def _falling(n: np.ndarray, j: int) -> np.ndarray:
    out = np.ones_like(n, dtype=float)
    for i in range(j):
        out = out * (n - i)
    return out


def _phi_is_monotone(phi: Polynomial, scan: np.ndarray) -> bool:
    return bool(np.all(phi.deriv()(scan) >= -1e-12))


def profile_phi(k: int) -> Polynomial:
    """φ(t) = t^{k+2}q(t) 형태의 최소 차수 컷오프 프로파일

    φ(0)=…=φ^{(k+1)}(0)=0, φ(1)=φ′(1)=1, φ″(1)=…=φ^{(k−1)}(1)=0.
    최소 차수에서 φ′ ≥ 0 이 깨지면 차수를 올려 min φ′/t^{k+1} 를 최대화하는 LP 로 다시 푼다.

    Raises:
        PhiConstructionError: 차수 상한까지 단조 프로파일이 없음
    """
    if k < 1:
        raise ValueError(f"Invalid k: {k}")
    n_cond = 2 + max(0, k - 2)
    scan = np.linspace(0.0, 1.0, PHI_SCAN_POINTS)

    for extra in range(PHI_EXTRA_DEGREE_CAP + 1):
        degrees = np.arange(k + 2, k + 2 + n_cond + extra, dtype=float)
        orders = [0, 1] + list(range(2, k))
        A = np.array([_falling(degrees, j) for j in orders])
        b = np.array([1.0, 1.0] + [0.0] * (len(orders) - 2))

        if extra == 0:
            coeffs = np.linalg.solve(A, b)
        else:
            # 변수 (c, s): max s  s.t. Σ c_i (deg_i) t^{deg_i−k−2} ≥ s
            shifted = np.power.outer(scan, degrees - (k + 2))
            G = shifted * degrees[None, :]
            n_var = len(degrees)
            res = linprog(
                c=np.concatenate([np.zeros(n_var), [-1.0]]),
                A_ub=np.hstack([-G, np.ones((len(scan), 1))]),
                b_ub=np.zeros(len(scan)),
                A_eq=np.hstack([A, np.zeros((A.shape[0], 1))]),
                b_eq=b,
                bounds=[(-1e4, 1e4)] * n_var + [(None, 1.0)],
                method="highs",
            )
            if not res.success:
                continue
            coeffs = res.x[:n_var]

        full = np.zeros(int(degrees[-1]) + 1)
        full[degrees.astype(int)] = coeffs
        phi = Polynomial(full)
        if _phi_is_monotone(phi, scan):
            if extra:
                logger.info(f"🔧 profile_phi(k={k}) needed {extra} extra degrees")
            return phi

    raise PhiConstructionError(f"No monotone cutoff profile for k={k} within degree cap")


def check_phi(phi: Polynomial, k: int, tol: float = 1e-10) -> None:
    """컷오프 프로파일 조건 검증"""
    coef = np.zeros(max(k + 2, len(phi.coef)))
    coef[: len(phi.coef)] = phi.coef
    if np.any(coef[: k + 2] != 0):
        raise PhiConstructionError(f"phi must vanish to order {k + 1} at 0")
    if abs(phi(1.0) - 1) > tol or abs(phi.deriv()(1.0) - 1) > tol:
        raise PhiConstructionError("phi must satisfy phi(1) = phi'(1) = 1")
    for j in range(2, k):
        if abs(phi.deriv(j)(1.0)) > tol:
            raise PhiConstructionError(f"phi derivative {j} must vanish at 1")
    if not _phi_is_monotone(phi, np.linspace(0.0, 1.0, PHI_SCAN_POINTS)):
        raise PhiConstructionError("phi' must be nonnegative on [0, 1]")


def phi_sup_derivative(phi: Polynomial) -> float:
    """∥φ′∥_∞ on [0,1]"""
    scan = np.linspace(0.0, 1.0, PHI_SCAN_POINTS)
    return float(np.abs(phi.deriv()(scan)).max())


def resolve_phi(params: MoserSequenceParams) -> Polynomial:
    if params.phi is None:
        return profile_phi(params.k)
    phi = Polynomial(params.phi)
    check_phi(phi, params.k)
    return phi


def profile_derivative(phi: Polynomial, eps: float, j: int) -> Evaluator:
    """H^{(j)}. H(t) = εφ(t/ε) (0<t≤ε), t (ε<t≤1−ε), 1−εφ((1−t)/ε) (1−ε<t≤1), 1 (t>1)"""
    dphi = phi.deriv(j) if j else phi

    def h(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        left = (t > 0) & (t <= eps)
        mid = (t > eps) & (t <= 1 - eps)
        right = (t > 1 - eps) & (t <= 1)
        out[left] = eps ** (1 - j) * dphi(t[left] / eps)
        out[right] = -((-1) ** j) * eps ** (1 - j) * dphi((1 - t[right]) / eps)
        if j == 0:
            out[mid] = t[mid]
            out[right] += 1.0
            out[t > 1] = 1.0
        elif j == 1:
            out[mid] = 1.0
        return out

    return h


def moser_sequence(params: MoserSequenceParams, order: int | None = None) -> RadialFunction:
    """ψ_{m,ε}(r) = H(log(R/r)/log m), 연쇄법칙 도함수 포함

    (0, R/m] 에서 1, r=R 에서 0.
    """
    order = params.k if order is None else order
    phi = resolve_phi(params)
    L = math.log(params.m)
    R = params.R
    derivs = [profile_derivative(phi, params.eps, j) for j in range(order + 1)]
    bps = (R * params.m ** (-params.eps), R * params.m ** (-(1 - params.eps)), R / params.m)
    return compose_log(derivs, R, L, order, bps, name=f"moser(m={params.m:.6g}, eps={params.eps:g})")


def _check_atm_space(space: SpaceParams) -> None:
    if regime(space) != Regime.ATM:
        raise RegimeError(f"Adams-Trudinger-Moser regime required, sigma={space.sigma}")
    for i in range(space.k):
        if not space.alphas[i] - i * space.p + 1 > 0:
            raise RegimeError(f"Lower-order weight alpha_{i} - {i}p + 1 must be positive")


def sequence_norm_report(params: MoserSequenceParams, space: SpaceParams) -> SequenceNormReport:
    """∥ψ∥^p, (log m)^{p−1}∥ψ∥^p 와 상한 [(k−1)!]^p(1+2^pε∥φ′∥^p_∞)"""
    _check_atm_space(space)
    if params.k != space.k or params.R != space.R:
        raise ValueError("Moser sequence and space disagree on k or R")
    psi = moser_sequence(params)
    p = space.p
    norm_p = sobolev_norm(psi, space) ** p
    log_m = math.log(params.m)
    phi = resolve_phi(params)
    bound = math.factorial(space.k - 1) ** p * (1 + 2 ** p * params.eps * phi_sup_derivative(phi) ** p)
    lower_order = power_integral(psi, p, space.alphas[0], space.R, breakpoints=psi.breakpoints)
    return SequenceNormReport(
        norm_p=norm_p,
        rescaled=norm_p * log_m ** (p - 1),
        bound=bound,
        lower_order=lower_order,
        log_m=log_m,
    )


def blowup_table(
    mu: float,
    space: SpaceParams,
    m_list: Sequence[float] | None = None,
    eps: float | None = None,
) -> BlowupTable:
    """정규화된 Moser 함수열 u_m = ψ/∥ψ∥ 에서의 함수형 값

    각 행은 함수형 값과 ∫_0^{R/m} 에서 얻는 하한 e^{μ∥ψ∥^{−p′}}(R/m)^{θ+1}/(θ+1) 을 담는다.
    발산하는 적분은 마지막 추정값과 capped=True 로 기록한다.
    """
    _check_atm_space(space)
    m_list = list(m_list or DEFAULT_M_LIST)
    eps = settings.moser_eps if eps is None else eps
    theta, p, R = space.theta, space.p, space.R
    q = conjugate(p)
    m0 = mu0(theta, space.k, p)

    rows = []
    phi = profile_phi(space.k)
    for m in m_list:
        params = MoserSequenceParams(m=m, eps=eps, k=space.k, R=R)
        psi = moser_sequence(params)
        norm = sobolev_norm(psi, space)
        u = psi.scale(1.0 / norm)
        capped = False
        try:
            value = moser_functional(u, mu, p, theta, R)
        except EstimationFailure as e:
            logger.warning(f"⚠️ Functional capped at m={m:g}: {e}")
            value, capped = e.estimate, True
        lower = math.exp(mu * norm ** (-q)) * (R / m) ** (theta + 1) / (theta + 1)
        rows.append(BlowupRow(m=m, value=value, lower_bound=lower, norm=norm, capped=capped))

    factor = 1 + 2 ** p * eps * phi_sup_derivative(phi) ** p
    predicted = (theta + 1) * (mu / m0 * factor ** (-1.0 / (p - 1)) - 1)

    empirical = None
    finite = [r for r in rows if np.isfinite(r.value) and r.value > 0]
    if len(finite) >= 2:
        X = np.log([[r.m] for r in finite])
        y = np.log([r.value for r in finite])
        empirical = float(LinearRegression().fit(X, y).coef_[0])

    logger.info(f"📊 Blow-up table mu={mu:g} (mu0={m0:g}): {[f'{r.value:.4g}' for r in rows]}")
    return BlowupTable(mu=mu, mu0=m0, rows=rows, predicted_exponent=predicted, empirical_exponent=empirical)


# ------------------------------------------------------------------
# ℓ_μ 최대화
# ------------------------------------------------------------------

def _moments(edges: np.ndarray, alpha: float) -> np.ndarray:
    """∫_{e_i}^{e_{i+1}} r^α dr"""
    a, b = edges[:-1], edges[1:]
    if alpha == -1:
        if np.any(a <= 0):
            raise ValueError("Weight r^-1 is not integrable at the origin")
        return np.log(b / a)
    if alpha < -1 and np.any(a <= 0):
        raise ValueError(f"Weight r^{alpha} is not integrable at the origin")
    return (b ** (alpha + 1) - a ** (alpha + 1)) / (alpha + 1)


class DiscreteSobolevNorm:
    """등급 격자 위 nodal 값의 X^{k,p}_R 노름

    j=0 항은 dual cell 집중 가중치, j≥1 항은 연속 차분 (k=1 이면 P1 함수의 정확한 노름).
    """

    def __init__(self, x: np.ndarray, space: SpaceParams):
        self.x = x
        self.p = space.p
        R = space.R
        n = len(x)
        dual = np.concatenate([[0.0], 0.5 * (x[:-1] + x[1:]), [R]])
        self.ops = [(sparse.identity(n, format="csr"), _moments(dual, space.alphas[0]))]
        pts = x
        D = sparse.identity(n, format="csr")
        for j in range(1, space.k + 1):
            h = np.diff(pts)
            local = sparse.diags([-1.0 / h, 1.0 / h], [0, 1], shape=(len(pts) - 1, len(pts)))
            D = (local @ D).tocsr()
            self.ops.append((D, _moments(pts, space.alphas[j])))
            pts = 0.5 * (pts[:-1] + pts[1:])
        metric = sum(Dj.T @ sparse.diags(Wj) @ Dj for Dj, Wj in self.ops)
        self._solver = splu(sparse.csc_matrix(metric))

    def power(self, u: np.ndarray) -> float:
        return float(sum(Wj @ np.abs(Dj @ u) ** self.p for Dj, Wj in self.ops))

    def __call__(self, u: np.ndarray) -> float:
        return self.power(u) ** (1.0 / self.p)

    def project(self, u: np.ndarray) -> np.ndarray:
        n = self(u)
        return u / n if n > 0 else u

    def precondition(self, g: np.ndarray) -> np.ndarray:
        return self._solver.solve(g)


def _start_profiles(x: np.ndarray, R: float, restart: int, seed: int) -> np.ndarray:
    if restart == 0:
        return np.ones_like(x)
    rng = np.random.default_rng(seed + restart)
    L = np.log(R / x)
    basis = np.vstack([np.ones_like(x), 1 - x / R, (1 + L) ** 0.25, np.log1p(L)])
    return rng.uniform(0.1, 1.0, size=basis.shape[0]) @ basis


def maximize_lmu(mu: float, space: SpaceParams, opt: OptimizerConfig | None = None) -> MaximizeReport:
    """ℓ_μ = sup_{∥u∥≤1} ∫ e^{μ|u|^{p′}} r^θ dr 의 격자 근사 최대화

    단위 구면으로의 rescaling 사영 + Sobolev 경사 (backtracking). restart 0 은 상수,
    나머지는 seed 로 고정된 양의 프로파일 조합에서 시작한다.
    """
    _check_atm_space(space)
    m0 = mu0(space.theta, space.k, space.p)
    if not 0 <= mu < m0:
        raise ValueError(f"maximize_lmu needs 0 <= mu < mu0={m0}: {mu}")
    opt = opt or OptimizerConfig(
        max_iters=settings.opt_max_iters,
        tol=settings.opt_tol,
        seed=settings.seed,
        restarts=settings.opt_restarts,
        nodes=settings.opt_nodes,
    )

    R, theta, q = space.R, space.theta, conjugate(space.p)
    grading = 1e-8 ** (1.0 / (opt.nodes - 1))
    grid = build_grid(R, opt.nodes, grading)
    x = grid.nodes
    dual = np.concatenate([[0.0], 0.5 * (x[:-1] + x[1:]), [R]])
    weights = _moments(dual, theta)
    norm = DiscreteSobolevNorm(x, space)

    def objective(u):
        with np.errstate(over="ignore"):
            return float(weights @ np.exp(mu * np.abs(u) ** q))

    def gradient(u):
        a = np.abs(u)
        with np.errstate(over="ignore"):
            return weights * mu * q * a ** (q - 1) * np.sign(u) * np.exp(mu * a ** q)

    best = None
    values = []
    for restart in range(opt.restarts):
        x0 = _start_profiles(x, R, restart, opt.seed)
        result = projected_ascent(
            objective, gradient, norm.project, x0,
            precondition=norm.precondition, max_iters=opt.max_iters, tol=opt.tol,
        )
        values.append(result.value)
        logger.info(f"🎯 Restart {restart}: value={result.value:.12g} after {result.iterations} iterations")
        if best is None or result.value > best.value:
            best = result

    if not np.isfinite(best.value):
        raise OptimizationError(f"maximize_lmu produced a non-finite value for mu={mu}")
    if not best.converged:
        logger.warning(f"⚠️ maximize_lmu hit the iteration cap ({opt.max_iters})")
    return MaximizeReport(
        value=best.value,
        maximizer=GridFunction(grid, best.x),
        norm=norm(best.x),
        iterations=best.iterations,
        converged=best.converged,
        restart_values=values,
    )


# ------------------------------------------------------------------
# 반직선 변환 (k=1 임계 경우)
# ------------------------------------------------------------------

@dataclass(frozen=True)
class HalfLineFunction:
    """w(t), t ∈ [0,∞) 와 w′(t). r = R·e^{−t/(θ+1)} 로 (0,R] 와 대응"""
    value: Evaluator
    derivative: Evaluator
    theta: float
    R: float
    name: str = ""

    def __call__(self, t) -> np.ndarray:
        return np.asarray(self.value(np.asarray(t, dtype=float)), dtype=float)

    def to_radius(self, t) -> np.ndarray:
        return self.R * np.exp(-np.asarray(t, dtype=float) / (self.theta + 1))

    def to_time(self, r) -> np.ndarray:
        return -(self.theta + 1) * np.log(np.asarray(r, dtype=float) / self.R)

    def integrate(self, g: Callable[[np.ndarray], np.ndarray]) -> float:
        """∫_0^∞ g(t) dt = ∫_0^R g(t(r)) (θ+1)/r dr"""
        c = self.theta + 1
        return integrate_weighted(lambda r: g(self.to_time(r)) * c / r, 0.0, self.R)


def halfline_transform(u: RadialFunction, theta: float, p: float, R: float | None = None) -> HalfLineFunction:
    """w(t) = (θ+1)^{(p−1)/p}·u(R e^{−t/(θ+1)})"""
    if not theta > -1:
        raise ValueError(f"Invalid theta: {theta}")
    R = R or u.R
    c = (theta + 1) ** ((p - 1) / p)
    du = u.derivative(1) if u.order >= 1 else None

    def value(t):
        return c * u(R * np.exp(-np.asarray(t, dtype=float) / (theta + 1)))

    def derivative(t):
        if du is None:
            raise ValueError("halfline derivative needs u'")
        r = R * np.exp(-np.asarray(t, dtype=float) / (theta + 1))
        return -c * du(r) * r / (theta + 1)

    return HalfLineFunction(value, derivative, theta, R, name=f"halfline({u.name})")


def halfline_identity(u: RadialFunction, theta: float, p: float, R: float | None = None, T: float = 8.0) -> tuple[float, float]:
    """절단된 양변
    ∫_{R e^{−T/(θ+1)}}^R e^{(θ+1)|u|^{p′}} r^θ dr  vs  R^{θ+1}/(θ+1) ∫_0^T e^{|w|^{p′}−t} dt
    """
    R = R or u.R
    q = conjugate(p)
    w = halfline_transform(u, theta, p, R)
    lower = R * math.exp(-T / (theta + 1))

    def left_integrand(r):
        with np.errstate(over="ignore"):
            return np.exp((theta + 1) * np.abs(u(r)) ** q)

    def right_integrand(t):
        with np.errstate(over="ignore"):
            return np.exp(np.abs(w(t)) ** q - t)

    left = integrate_weighted(left_integrand, theta, R, lower=lower, breakpoints=u.breakpoints)
    bps = sorted({0.0, T} | {float(w.to_time(b)) for b in u.breakpoints if lower < b < R})
    right = sum(integrate_interval(right_integrand, a, b) for a, b in zip(bps[:-1], bps[1:]))
    return left, R ** (theta + 1) / (theta + 1) * right


def composite_norm(w: HalfLineFunction, alpha0: float, p: float) -> float:
    """(R^{α₀+1}/(θ+1)^p ∫|w|^p e^{−(α₀+1)t/(θ+1)} dt + ∫|w′|^p dt)^{1/p}

    u 의 X^{1,p}_R(α₀, p−1) 노름과 같다.
    """
    c = w.theta + 1
    lower = w.R ** (alpha0 + 1) / c ** p * w.integrate(
        lambda t: np.abs(w(t)) ** p * np.exp(-(alpha0 + 1) * t / c)
    )
    top = w.integrate(lambda t: np.abs(w.derivative(t)) ** p)
    return (lower + top) ** (1.0 / p)


def c1_constant(A: float, theta: float, alpha0: float, p: float, R: float) -> float:
    """C₁ = (θ+1)[(α₀+1)A^p/R^{α₀+1}]^{1/(p−1)}"""
    return (theta + 1) * ((alpha0 + 1) * A ** p / R ** (alpha0 + 1)) ** (1.0 / (p - 1))


@dataclass(frozen=True)
class RampExtension:
    """w̃(t) = w(0)t/C₁ (0 ≤ t ≤ C₁), w(t−C₁) (t > C₁)"""
    base: HalfLineFunction
    C1: float
    w0: float
    p: float

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        ramp = self.w0 * t / self.C1
        shifted = self.base(np.maximum(t - self.C1, 0.0))
        return np.where(t <= self.C1, ramp, shifted)

    def derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.where(
            t <= self.C1,
            self.w0 / self.C1,
            self.base.derivative(np.maximum(t - self.C1, 0.0)),
        )

    @property
    def ramp_energy(self) -> float:
        """∫_0^{C₁}|w̃′|^p = |w(0)|^p/C₁^{p−1}"""
        return abs(self.w0) ** self.p / self.C1 ** (self.p - 1)

    def energy(self) -> float:
        """∫_0^∞|w̃′|^p"""
        return self.ramp_energy + self.base.integrate(lambda t: np.abs(self.base.derivative(t)) ** self.p)


def _sample_times(w: HalfLineFunction, n: int | None = None) -> np.ndarray:
    grid = build_grid(w.R, settings.grid_n if n is None else n, settings.grid_grading)
    return w.to_time(grid.nodes)


def extend_ramp(w: HalfLineFunction, A: float, theta: float, alpha0: float, p: float, R: float) -> RampExtension:
    """K̃_A 의 w 를 선형 ramp 로 확장

    Raises:
        KAMembershipError: w < 0 또는 w(0) > A·w(t)
    """
    t = _sample_times(w)
    values = w(t)
    w0 = float(w(np.array([0.0]))[0])
    if np.any(values < -1e-14):
        raise KAMembershipError(f"{w.name or 'w'} takes negative values")
    if np.any(w0 > A * values + 1e-12):
        raise KAMembershipError(f"{w.name or 'w'} violates w(0) <= A w(t) for A={A}")
    return RampExtension(base=w, C1=c1_constant(A, theta, alpha0, p, R), w0=w0, p=p)


# ------------------------------------------------------------------
# Luxemburg 노름
# ------------------------------------------------------------------

def luxemburg_norm(
    u: RadialFunction,
    theta: float,
    p: float,
    R: float | None = None,
    literal: bool = False,
) -> float:
    """inf{δ>0 : ∫Φ̂(u/δ) r^θ dr ≤ 1}, Φ̂(t) = exp(|t|^{p′}) − 1

    literal=True 이면 Φ(t) = exp(|t|^{p′}) 를 그대로 사용한다 (Φ(0)=1 이므로
    R^{θ+1}/(θ+1) > 1 이면 조건을 만족하는 δ 가 없다).

    Raises:
        LuxemburgBracketError: δ ∈ [1e−9, 1e9] 안에서 구간을 찾지 못함
    """
    if not theta > -1:
        raise ValueError(f"Invalid theta: {theta}")
    R = R or u.R
    q = conjugate(p)
    lo, hi = LUXEMBURG_BRACKET

    def modular(delta: float) -> float:
        def integrand(r):
            with np.errstate(over="ignore"):
                z = np.abs(u(r) / delta) ** q
                return np.exp(z) if literal else np.expm1(z)
        try:
            return integrate_weighted(integrand, theta, R, breakpoints=u.breakpoints)
        except EstimationFailure:
            return math.inf

    f_hi = modular(hi)
    if not literal and f_hi == 0:
        return 0.0
    if f_hi > 1:
        raise LuxemburgBracketError(f"Modular at delta={hi:g} is {f_hi:.6g} > 1")
    if modular(lo) <= 1:
        raise LuxemburgBracketError(f"Modular at delta={lo:g} is already <= 1")

    log_lo, log_hi = math.log(lo), math.log(hi)
    for _ in range(LUXEMBURG_MAX_BISECTIONS):
        mid = 0.5 * (log_lo + log_hi)
        if modular(math.exp(mid)) > 1:
            log_lo = mid
        else:
            log_hi = mid
        if log_hi - log_lo < 1e-14:
            break
    return math.exp(log_hi)


# ------------------------------------------------------------------
# 임계 k=1 스윕
# ------------------------------------------------------------------

def in_k_a(u: RadialFunction, A: float, R: float | None = None) -> bool:
    """u(R) ≤ A·u(r) (격자 검사)"""
    R = R or u.R
    grid = build_grid(R, settings.grid_n, settings.grid_grading)
    return bool(np.all(u(np.array([R]))[0] <= A * u(grid.nodes) + 1e-12))


def critical_k1_sweep(
    A: float,
    theta: float,
    alpha0: float,
    p: float,
    R: float,
    corpus: Mapping[str, RadialFunction],
) -> list[CriticalRow]:
    """μ = θ+1 에서 K_A 코퍼스의 ∫ e^{(θ+1)|u|^{p′}} r^θ dr / R^{θ+1}

    코퍼스 원소는 X^{1,p}_R(α₀, p−1) 노름으로 정규화한다. K_A 위반이나 발산하는 노름은
    admissible=False 로 기록하고 건너뛴다.
    """
    if p < 2:
        raise ValueError(f"critical_k1_sweep needs p >= 2: {p}")
    space = SpaceParams(k=1, p=p, R=R, alphas=[alpha0, p - 1], theta=theta)
    rows = []
    for name, u in corpus.items():
        if not in_k_a(u, A, R):
            rows.append(CriticalRow(name=name, R=R, admissible=False, reason="K_A"))
            continue
        try:
            norm = sobolev_norm(u, space)
        except DivergentIntegralError as e:
            rows.append(CriticalRow(name=name, R=R, admissible=False, reason=f"divergent-norm-{e.j}"))
            continue
        scaled = u.scale(1.0 / norm) if norm > 0 else u
        try:
            value = moser_functional(scaled, theta + 1, p, theta, R) / R ** (theta + 1)
        except EstimationFailure as e:
            logger.error(f"❌ Critical functional diverged for {name}: {e}")
            rows.append(CriticalRow(name=name, R=R, admissible=True, norm=norm, reason="divergent-functional"))
            continue
        rows.append(CriticalRow(name=name, R=R, admissible=True, norm=norm, value=value))
    return rows
