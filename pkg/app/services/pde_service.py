# app/services/pde_service.py

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Union

import numpy as np
from scipy.linalg import eigvalsh, null_space
from scipy.optimize import minimize_scalar

from app.core.constants import M_DELTA_NODES, RELIABLE_NODE_FLOOR, RESIDUAL_TRIM, WEAK_FORM_TESTS
from app.schemas.pde import (
    EndpointDiagnostics,
    ExpProblem,
    PowerProblem,
    SolveReport,
    SolverConfig,
    SourceProblem,
)
from app.schemas.spaces import SpaceParams
from app.services.function_service import (
    GridFunction,
    PanelInterpolant,
    RadialFunction,
    derivative,
)
from app.services.operator_service import GreenOperator, delta_gamma, green_inverse
from app.services.quadrature_service import PanelGrid, build_panel_grid
from app.services.space_service import sobolev_norm, weighted_lq_norm
from app.utils.ascent import projected_ascent

logger = logging.getLogger(__name__)

Problem = Union[PowerProblem, ExpProblem, SourceProblem]

X_ATM_ALPHAS = [-1.0, 1.0, 3.0]


class PdeError(Exception):
    """Navier 문제 풀이 관련 예외"""
    pass


class StagnationError(PdeError):
    """반복값이 0 이 되거나 유한하지 않음"""
    pass


class OscillationError(PdeError):
    """감쇠 없이 반복값이 진동"""
    pass


class GrowthBoundViolation(PdeError, ValueError):
    """|f(r,t)| ≤ c₁e^{μ(m_Δt)²} 위반"""
    pass


# ---------------------------------------------------------------------------
# 계수 g, 비선형항 f 카탈로그
# ---------------------------------------------------------------------------

COEFFICIENT_MAP: Dict[str, Callable[[np.ndarray, float, float], np.ndarray]] = {
    "one": lambda r, R, a: np.ones(np.shape(r)),
    "linear": lambda r, R, a: 1.0 + a * np.asarray(r) / R,
    "quadratic_bump": lambda r, R, a: 1.0 + 4.0 * a * (np.asarray(r) / R) * (1.0 - np.asarray(r) / R),
}

COEFFICIENT_INFO = {
    "one": {"formula": "g(r) = 1"},
    "linear": {"formula": "g(r) = 1 + a r/R"},
    "quadratic_bump": {"formula": "g(r) = 1 + 4a (r/R)(1 - r/R)"},
}


def _exp_quadratic(t, b):
    return t * np.exp(b * t * t)


def _exp_quadratic_primitive(t, b):
    if b == 0:
        return 0.5 * t * t
    return np.expm1(b * t * t) / (2.0 * b)


# (f, F) with b = a·m_Δ² for exp_quadratic
NONLINEARITY_MAP: Dict[str, tuple[Callable, Callable]] = {
    "linear": (lambda t, b: t, lambda t, b: 0.5 * t * t),
    "exp_quadratic": (_exp_quadratic, _exp_quadratic_primitive),
    "sinh": (lambda t, b: np.sinh(t), lambda t, b: np.cosh(t) - 1.0),
}

NONLINEARITY_INFO = {
    "linear": {"formula": "f = t", "primitive": "F = t^2/2"},
    "exp_quadratic": {"formula": "f = t exp(a (m t)^2)", "primitive": "F = (exp(a (m t)^2) - 1)/(2 a m^2)"},
    "sinh": {"formula": "f = sinh(t)", "primitive": "F = cosh(t) - 1"},
}


def coefficient(problem: PowerProblem) -> Callable[[np.ndarray], np.ndarray]:
    g = COEFFICIENT_MAP[problem.coefficient]
    return lambda r: g(r, problem.R, problem.coefficient_param)


@dataclass(frozen=True)
class Nonlinearity:
    """f(r,t) 와 원시함수 F, 성장 조건 검사 포함"""
    name: str
    a: float
    m_delta: float
    mu: float
    c1: float

    @property
    def b(self) -> float:
        return self.a * self.m_delta ** 2

    def f(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            values = NONLINEARITY_MAP[self.name][0](t, self.b)
            bound = self.c1 * np.exp(self.mu * (self.m_delta * t) ** 2)
        if np.any(~np.isfinite(values)) or np.any(np.abs(values) > bound * (1 + 1e-12)):
            raise GrowthBoundViolation(
                f"Nonlinearity {self.name} exceeds c1*exp(mu*(m_delta*t)^2) (max |t|={np.max(np.abs(t)):.6g})"
            )
        return values

    def F(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            return NONLINEARITY_MAP[self.name][1](t, self.b)


def nonlinearity(problem: ExpProblem, m_delta: float) -> Nonlinearity:
    return Nonlinearity(problem.nonlinearity, problem.a, m_delta, problem.mu, problem.c1)


def _forcing(problem: Problem, m_delta: float | None = None) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """(r, u) ↦ r^{θ−α} 를 제외한 우변"""
    if isinstance(problem, PowerProblem):
        g, p = coefficient(problem), problem.p
        return lambda r, u: g(r) * np.abs(u) ** (p - 2) * u
    if isinstance(problem, ExpProblem):
        m = m_delta or problem.m_delta
        if m is None:
            raise ValueError("Exponential problem needs m_delta for its nonlinearity")
        nl = nonlinearity(problem, m)
        return lambda r, u: nl.f(u)
    if isinstance(problem, SourceProblem):
        return lambda r, u: np.asarray(problem.source(r), dtype=float)
    raise TypeError(f"Unsupported problem type: {type(problem).__name__}")


# ---------------------------------------------------------------------------
# 잔차와 끝점 진단
# ---------------------------------------------------------------------------

def _residual_nodes(grid: PanelGrid) -> np.ndarray:
    """양 끝 RESIDUAL_TRIM 개를 제외한 노드 인덱스"""
    order = np.argsort(grid.nodes)
    return order[RESIDUAL_TRIM:-RESIDUAL_TRIM]


def bilaplacian(u: Union[RadialFunction, GridFunction], alpha: float, r: np.ndarray) -> np.ndarray:
    """Δ_α²u(r)

    RadialFunction 은 delta_gamma 두 번, GridFunction 은 격자 도함수로
    u'''' + 2αu‴/r + (α²−2α)(u″/r² − u′/r³).
    """
    if isinstance(u, RadialFunction):
        return delta_gamma(delta_gamma(u, alpha), alpha)(r)
    x = u.nodes
    d = [derivative(u, j).values for j in range(1, 5)]
    full = d[3] + 2 * alpha * d[2] / x + (alpha ** 2 - 2 * alpha) * (d[1] / x ** 2 - d[0] / x ** 3)
    return np.interp(r, x, full)


def _values(u: Union[RadialFunction, GridFunction], r: np.ndarray) -> np.ndarray:
    if isinstance(u, RadialFunction):
        return u(r)
    return np.interp(r, u.nodes, u.values)


def _weighted_norm(values: np.ndarray, grid: PanelGrid, idx: np.ndarray, alpha: float) -> float:
    w = grid.quadrature_weights()[idx] * grid.nodes[idx] ** alpha
    return float(math.sqrt(np.sum(w * values ** 2)))


def residual(
    u: Union[RadialFunction, GridFunction],
    lam: float,
    problem: Problem,
    grid: PanelGrid | None = None,
    relative: bool = False,
    m_delta: float | None = None,
) -> float:
    """∥Δ_α²u − λ r^{θ−α} f(r,u)∥_{L²_α}, 양 끝 노드를 제외한 내부 노드에서

    Args:
        relative: True 면 ∥λ r^{θ−α} f(r,u)∥ 로 나눈 값
    """
    if grid is None:
        grid = u.grid if isinstance(u, GridFunction) and isinstance(u.grid, PanelGrid) else build_panel_grid(problem.R)
    alpha, theta = problem.alpha, problem.theta
    idx = _residual_nodes(grid)
    r = grid.nodes[idx]
    rhs = lam * r ** (theta - alpha) * _forcing(problem, m_delta)(r, _values(u, r))
    lhs = bilaplacian(u, alpha, r)
    res = _weighted_norm(lhs - rhs, grid, idx, alpha)
    if not relative:
        return res
    scale = _weighted_norm(rhs, grid, idx, alpha)
    return res / scale if scale > 0 else res


def _extrapolate_origin(f: Callable, radii: np.ndarray, odd: bool = False) -> float:
    """2차 다항식 외삽값 f(0⁺). 짝 함수는 r², 홀 함수는 r 에 대해 맞춘다"""
    values = np.asarray(f(radii), dtype=float)
    coeffs = np.polyfit(radii if odd else radii ** 2, values, 2)
    return float(coeffs[-1])


def endpoint_diagnostics(
    u: Union[RadialFunction, GridFunction],
    alpha: float,
    grid: PanelGrid | None = None,
) -> EndpointDiagnostics:
    """u(R), Δ_αu(R) 와 원점 외삽 u′, u″, u‴, (Δ_αu)′, 결손 u″(0)+Δ_αu(0)/(α+1)

    신뢰 노드(r ≥ RELIABLE_NODE_FLOOR·R) 중 가장 작은 r₁ 과 2r₁, 4r₁ 근처 노드로 외삽하고,
    2r₁, 4r₁, 8r₁ 로 다시 외삽한 값과 비교해 stable 을 정한다.
    """
    if isinstance(u, GridFunction):
        if not isinstance(u.grid, PanelGrid):
            raise ValueError("Endpoint diagnostics need a PanelGrid for grid functions")
        grid = grid or u.grid
        u = PanelInterpolant(u.grid, u.values).as_radial()
    if u.order < 3:
        raise ValueError(f"Endpoint diagnostics need three derivatives, got order {u.order}")
    R = u.R
    grid = grid or build_panel_grid(R)
    delta = delta_gamma(u, alpha)

    x = np.sort(grid.nodes[grid.nodes >= RELIABLE_NODE_FLOOR * R])
    r1 = x[0]

    def pick(factors):
        return np.array([x[np.argmin(np.abs(x - f * r1))] for f in factors])

    first, second = pick((1, 2, 4)), pick((2, 4, 8))
    quantities = {
        "u1_0": u.derivative(1),
        "u2_0": u.derivative(2),
        "u3_0": u.derivative(3),
        "delta_0": delta.derivative(0),
        "ddelta_0": delta.derivative(1),
    }
    # u′, u‴, (Δ_αu)′ 는 원점에서 홀 함수
    odd = {"u1_0", "u3_0", "ddelta_0"}
    values = {name: _extrapolate_origin(f, first, name in odd) for name, f in quantities.items()}
    check = {name: _extrapolate_origin(f, second, name in odd) for name, f in quantities.items()}

    scale = max(abs(values["u2_0"]), abs(values["delta_0"]), 1e-300)
    stable = all(abs(values[k] - check[k]) <= 1e-3 * scale for k in quantities)
    if not stable:
        logger.warning("⚠️ Origin extrapolation unstable between node sets")

    R_arr = np.array([R])
    return EndpointDiagnostics(
        u_R=float(u(R_arr)[0]),
        delta_R=float(delta(R_arr)[0]),
        defect=values["u2_0"] + values["delta_0"] / (alpha + 1),
        stable=stable,
        **values,
    )


# ---------------------------------------------------------------------------
# m_Δ 추정
# ---------------------------------------------------------------------------

def _x_atm(space: SpaceParams | None, R: float | None) -> SpaceParams:
    if space is None:
        return SpaceParams(k=2, p=2, R=R or 1.0, alphas=X_ATM_ALPHAS)
    if space.k != 2 or space.p != 2 or list(space.alphas) != X_ATM_ALPHAS:
        raise ValueError(f"m_delta is defined on X^(2,2)(-1,1,3), got k={space.k}, p={space.p}, alphas={space.alphas}")
    return space


def m_delta_ratio(u: RadialFunction, space: SpaceParams | None = None) -> float:
    """∥Δ₃u∥_{L²_3} / ∥u∥_{X^{2,2}_R}"""
    space = _x_atm(space, u.R)
    return weighted_lq_norm(delta_gamma(u, 3.0), 2.0, 3.0, space.R) / sobolev_norm(u, space)


def estimate_m_delta(space: SpaceParams | None = None, R: float | None = None, n: int | None = None) -> float:
    """m_Δ = inf ∥u∥_{Δ₃} / ∥u∥_{X^{2,2}_R}

    u = G₃(w) 로 매개화하고 (u(R)=0, r³u′→0), u(0)=0 제약의 영공간에서
    z = √(qw·x³)·w 좌표의 대칭 고유값 문제로 푼다. m_Δ = 1/√ν_max.
    """
    space = _x_atm(space, R)
    grid = build_panel_grid(space.R, n=n or M_DELTA_NODES)
    G = GreenOperator(grid, 3.0)
    x, qw = grid.nodes, grid.quadrature_weights()
    d = np.sqrt(qw[:-1] * x[:-1] ** 3)

    blocks = [
        (G.matrix()[:, :-1], -1.0),
        (G.derivative_matrix(1)[:, :-1], 1.0),
        (G.derivative_matrix(2)[:, :-1], 3.0),
    ]
    B = np.zeros((x.size - 1, x.size - 1))
    for U, alpha in blocks:
        Us = U / d[None, :]
        B += Us.T @ ((qw * x ** alpha)[:, None] * Us)

    Z = null_space((G.origin_row()[:-1] / d)[None, :])
    nu = eigvalsh(Z.T @ B @ Z)
    if not np.isfinite(nu[-1]) or nu[-1] <= 0:
        raise PdeError(f"m_delta eigenproblem failed (largest eigenvalue {nu[-1]})")
    m = 1.0 / math.sqrt(nu[-1])
    logger.info(f"📐 m_delta estimate {m:.8g} on {grid.n} nodes")
    return m


# ---------------------------------------------------------------------------
# 거듭제곱 비선형 문제
# ---------------------------------------------------------------------------

def rayleigh_quotient(u: RadialFunction, problem: PowerProblem, grid: PanelGrid | None = None) -> float:
    """∥Δ_αu∥²_{L²_α} / (∫g|u|^p r^θ)^{2/p}"""
    grid = grid or build_panel_grid(problem.R)
    x = grid.nodes
    num = grid.integrate(delta_gamma(u, problem.alpha)(x) ** 2, problem.alpha)
    den = grid.integrate(coefficient(problem)(x) * np.abs(u(x)) ** problem.p, problem.theta)
    return num / den ** (2.0 / problem.p)


def _navier_solution(source: Callable, kappa: float, alpha: float, R: float, grid: PanelGrid, extra: float) -> RadialFunction:
    """κ·G_α(G_α(r^{e}·source))"""
    inner = green_inverse(source, alpha, R, grid, extra=extra)
    return green_inverse(inner, alpha, R, grid).scale(kappa)


def _power_scaling(u1: RadialFunction, lam: float, problem: PowerProblem, grid: PanelGrid) -> tuple[float, dict]:
    """λ=1 형태 Δ²(cu) = r^{θ−α}g|cu|^{p−2}cu 의 상대 잔차를 최소화하는 c

    c 로 나눈 잔차 ∥L − c^{p−2}N∥/∥L∥ 을 쓴다. c→0 의 자명한 최소를 피한다.
    """
    p = problem.p
    idx = _residual_nodes(grid)
    r = grid.nodes[idx]
    L = bilaplacian(u1, problem.alpha, r)
    N = r ** (problem.theta - problem.alpha) * _forcing(problem)(r, u1(r))

    scale = _weighted_norm(L, grid, idx, problem.alpha) or 1.0

    def res(c: float) -> float:
        return _weighted_norm(L - c ** (p - 2) * N, grid, idx, problem.alpha) / scale

    candidates = {"1/(p-2)": lam ** (1.0 / (p - 2)), "1/(p-1)": lam ** (1.0 / (p - 1))}
    residuals = {label: res(c) for label, c in candidates.items()}
    center = math.log(candidates["1/(p-2)"])
    opt = minimize_scalar(lambda s: res(math.exp(s)), bounds=(center - 10.0, center + 10.0), method="bounded",
                          options={"xatol": 1e-12})
    c_opt = math.exp(opt.x)
    matched = min(candidates, key=lambda k: abs(math.log(candidates[k]) - opt.x))
    logger.info(f"📏 Residual-minimizing scale c={c_opt:.10g} matches exponent {matched}")
    return c_opt, {
        "c": c_opt,
        "exponent": matched,
        "residual_p_minus_2": residuals["1/(p-2)"],
        "residual_p_minus_1": residuals["1/(p-1)"],
        "residual_opt": res(c_opt),
    }


def solve_power(problem: PowerProblem, cfg: SolverConfig | None = None) -> SolveReport:
    """정규화 고정점 반복 u ← T(u)/∥T(u)∥_{Δ_α}, T(u) = G_α(G_α(r^{θ−α}g|u|^{p−2}u))

    p=2 이면 역거듭제곱 반복이다. 진동이 감지되면 감쇠 cfg.damping 을 켠다.

    Raises:
        StagnationError: T(u) 가 0 이거나 유한하지 않음
        OscillationError: damping=0 인데 반복값이 진동
    """
    cfg = SolverConfig() if cfg is None else cfg
    alpha, theta, p, R = problem.alpha, problem.theta, problem.p, problem.R
    extra = theta - alpha
    grid = build_panel_grid(R, n=cfg.n)
    G = GreenOperator(grid, alpha)
    x = grid.nodes
    g = coefficient(problem)
    gx = g(x)

    def delta_norm(w):
        return math.sqrt(grid.integrate(w * w, alpha))

    def T(u):
        w = G.apply(gx * np.abs(u) ** (p - 2) * u, extra)
        return G.apply(w), w

    logger.info(f"🔧 Power problem alpha={alpha}, theta={theta}, p={p} on {grid.n} nodes")
    w = G.apply(np.ones_like(x), extra)
    u = G.apply(w)
    c = delta_norm(w)
    u, w = u / c, w / c

    converged, damping_on = False, False
    diff_prev = math.inf
    it = 0
    for it in range(1, cfg.max_iters + 1):
        Tu, Tw = T(u)
        c = delta_norm(Tw)
        if not math.isfinite(c) or c == 0:
            raise StagnationError(f"Fixed-point map vanished or diverged at iteration {it}")
        u_new, w_new = Tu / c, Tw / c
        diff = float(np.max(np.abs(u_new - u)) / np.max(np.abs(u_new)))
        if diff > diff_prev and not damping_on and diff > cfg.tol:
            if cfg.damping == 0:
                raise OscillationError(f"Iterates oscillate at iteration {it} (change {diff:.3e})")
            damping_on = True
            logger.info(f"🔁 Damping {cfg.damping} engaged at iteration {it}")
        if damping_on:
            w_new = (1 - cfg.damping) * w + cfg.damping * w_new
            u_new = (1 - cfg.damping) * u + cfg.damping * u_new
            c = delta_norm(w_new)
            u_new, w_new = u_new / c, w_new / c
        u, w = u_new, w_new
        if diff < cfg.tol:
            converged = True
            break
        diff_prev = diff

    if not converged:
        logger.warning(f"⚠️ Power iteration stopped after {it} iterations without reaching tol={cfg.tol}")

    Tu, Tw = T(u)
    kappa_n = 1.0 / delta_norm(Tw)
    P_int = grid.integrate(gx * np.abs(u) ** p, theta)
    s = P_int ** (-1.0 / p)
    lam = kappa_n * s ** (2 - p)
    rayleigh = s * s

    interp = PanelInterpolant(grid, u)
    source = lambda r: g(r) * np.abs(interp(r)) ** (p - 2) * interp(r)
    u1 = _navier_solution(source, kappa_n * s, alpha, R, grid, extra)

    if p == 2:
        solution, multiplier, scaling = u1, lam, {"c": 1.0, "exponent": "none"}
    else:
        c_opt, scaling = _power_scaling(u1, lam, problem, grid)
        solution, multiplier = u1.scale(c_opt), lam * c_opt ** (2 - p)

    report = SolveReport(
        u=GridFunction(grid, solution(x)),
        solution=solution,
        lam=lam,
        multiplier=multiplier,
        rayleigh=rayleigh,
        residual=residual(solution, multiplier, problem, grid),
        relative_residual=residual(solution, multiplier, problem, grid, relative=True),
        endpoints=endpoint_diagnostics(solution, alpha, grid),
        iterations=it,
        converged=converged,
        scaling=scaling,
    )
    logger.info(f"✅ Power problem m_hat={rayleigh:.10g}, residual={report.relative_residual:.3e}")
    return report


# ---------------------------------------------------------------------------
# 지수 비선형 문제
# ---------------------------------------------------------------------------

def exp_functional(u: GridFunction, problem: ExpProblem, m_delta: float | None = None) -> float:
    """∫_0^R F(r,u) r^θ dr"""
    m = m_delta or problem.m_delta
    if m is None:
        raise ValueError("Exponential problem needs m_delta for its nonlinearity")
    nl = nonlinearity(problem, m)
    return u.grid.integrate(nl.F(u.values), problem.theta)


def _start_source(x: np.ndarray, R: float, restart: int, seed: int) -> np.ndarray:
    if restart == 0:
        return np.ones_like(x)
    rng = np.random.default_rng(seed + restart)
    c = rng.uniform(0.5, 1.5, size=3)
    t = x / R
    return c[0] + c[1] * (1 - t) + c[2] * (1 - t) ** 2


def solve_exp(problem: ExpProblem, cfg: SolverConfig | None = None) -> SolveReport:
    """max ∫F(r,u)r^θ dr, ∥u∥_{Δ₃} = 1

    u = G₃(w), z = √(qw·x³)·w 로 구면 제약을 유클리드 단위구로 바꾼 뒤
    사영 경사 상승 후 z ← ∇J/|∇J| 고정점으로 다듬는다. λ = ∫f(r,u)u r^θ dr.

    Raises:
        GrowthBoundViolation: f 평가에서 성장 조건 위반
    """
    cfg = SolverConfig() if cfg is None else cfg
    m_delta = problem.m_delta or estimate_m_delta(R=problem.R)
    problem = problem.model_copy(update={"m_delta": m_delta})
    nl = nonlinearity(problem, m_delta)
    theta, R = problem.theta, problem.R
    grid = build_panel_grid(R, n=cfg.n)
    G = GreenOperator(grid, 3.0)
    x, qw = grid.nodes, grid.quadrature_weights()
    d = np.sqrt(qw[:-1] * x[:-1] ** 3)
    B = G.matrix()[:, :-1] / d[None, :]
    wt = qw * x ** theta

    def objective(z):
        return float(wt @ nl.F(B @ z))

    def gradient(z):
        return B.T @ (wt * nl.f(B @ z))

    def project(z):
        return z / np.linalg.norm(z)

    def polish(z):
        value = objective(z)
        for _ in range(cfg.max_iters):
            gz = gradient(z)
            z_new = project(gz)
            new_value = objective(z_new)
            if new_value < value * (1 - 1e-14):
                break
            step = float(np.linalg.norm(z_new - z))
            z, value = z_new, new_value
            if step < cfg.tol:
                break
        return z

    logger.info(f"🔧 Exponential problem {problem.nonlinearity}, theta={theta}, m_delta={m_delta:.6g}")
    best_z, best_value, values, iterations, converged = None, -math.inf, [], 0, False
    for restart in range(cfg.restarts):
        z0 = d * _start_source(x, R, restart, cfg.seed)[:-1]
        result = projected_ascent(objective, gradient, project, z0, max_iters=cfg.ascent_iters, tol=cfg.ascent_tol)
        z = polish(result.x)
        value = objective(z)
        values.append(value)
        logger.debug(f"🔁 Restart {restart}: value={value:.12g}, iterations={result.iterations}")
        if value > best_value:
            best_z, best_value = z, value
            iterations, converged = result.iterations, result.converged

    u_nodes = B @ best_z
    lam = grid.integrate(nl.f(u_nodes) * u_nodes, theta)
    kappa = 1.0 / lam

    interp = PanelInterpolant(grid, u_nodes)
    solution = _navier_solution(lambda r: nl.f(interp(r)), kappa, 3.0, R, grid, theta - 3.0)

    report = SolveReport(
        u=GridFunction(grid, u_nodes),
        solution=solution,
        lam=lam,
        multiplier=kappa,
        residual=residual(solution, kappa, problem, grid),
        relative_residual=residual(solution, kappa, problem, grid, relative=True),
        endpoints=endpoint_diagnostics(solution, 3.0, grid),
        iterations=iterations,
        converged=converged,
        scaling={"m_delta": m_delta},
        restart_values=values,
    )
    logger.info(f"✅ Exponential problem lambda={lam:.10g}, restarts={values}")
    return report


def weak_form_check(
    report: SolveReport,
    problem: Union[PowerProblem, ExpProblem],
    n_tests: int = WEAK_FORM_TESTS,
    m_delta: float | None = None,
) -> float:
    """max_j |∫Δ_αuΔ_αv_j r^α − κ∫f(r,u)v_j r^θ| / ∥v_j∥_{Δ_α}, v_j = G(G(cos(jπr/R)))"""
    grid = report.u.grid
    alpha, theta, R = problem.alpha, problem.theta, problem.R
    G = GreenOperator(grid, alpha)
    x = grid.nodes
    u = report.u.values
    delta_u = delta_gamma(report.solution, alpha)(x)
    force = _forcing(problem, m_delta)(x, u)

    worst = 0.0
    for j in range(1, n_tests + 1):
        delta_v = G.apply(np.cos(j * math.pi * x / R))
        v = G.apply(delta_v)
        lhs = grid.integrate(delta_u * delta_v, alpha)
        rhs = report.multiplier * grid.integrate(force * v, theta)
        norm_v = math.sqrt(grid.integrate(delta_v ** 2, alpha))
        worst = max(worst, abs(lhs - rhs) / norm_v)
    return worst
