# app/services/operator_service.py

import logging
import math
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
from scipy.special import gammaln, gammasgn

from app.schemas.moser import MoserSequenceParams
from app.services.function_service import (
    DerivativeOrderError,
    Evaluator,
    GridFunction,
    PanelInterpolant,
    RadialFunction,
    derivative,
)
from app.services.moser_service import conjugate, profile_derivative, resolve_phi
from app.services.quadrature_service import CumulativeIntegral, PanelGrid, build_panel_grid

logger = logging.getLogger(__name__)

# 닫힌 꼴과 점화식 비교 허용 오차
CLOSED_FORM_RTOL = 1e-12


class OperatorError(Exception):
    """Δ_γ 연산자 관련 예외"""
    pass


class GammaPoleError(OperatorError, ValueError):
    """Γ 함수 인자가 0 이하의 정수"""
    pass


class ParameterConstraintError(OperatorError, ValueError):
    """γ, p, θ 제약 위반"""
    pass


class GreenInverseError(OperatorError):
    """내부 적분 ∫_0^t v s^γ ds 가 발산하거나 유한하지 않음"""
    pass


def _as_derivatives(u: RadialFunction, need: int) -> tuple:
    if u.order < need:
        raise DerivativeOrderError(f"Need {need} derivatives, function has order {u.order}")
    return u.derivatives


def delta_gamma(u: RadialFunction, gamma: float) -> RadialFunction:
    """Δ_γ u = −u″ − γu′/r

    (Δ_γ u)^{(j)} = −u^{(j+2)} − γ Σ_i C(j,i) (−1)^i i! r^{−i−1} u^{(j+1−i)}

    Raises:
        DerivativeOrderError: u 의 도함수 차수 < 2
    """
    derivs = _as_derivatives(u, 2)
    out_order = u.order - 2

    def make(j: int) -> Evaluator:
        def f(r):
            r = np.asarray(r, dtype=float)
            total = -np.asarray(derivs[j + 2](r), dtype=float)
            for i in range(j + 1):
                c = math.comb(j, i) * (-1) ** i * math.factorial(i)
                total = total - gamma * c * r ** (-i - 1) * np.asarray(derivs[j + 1 - i](r), dtype=float)
            return total
        return f

    return RadialFunction(
        tuple(make(j) for j in range(out_order + 1)),
        u.R,
        u.breakpoints,
        f"Δ_{gamma:g}({u.name})" if u.name else "",
    )


def shift_derivative(u: RadialFunction) -> RadialFunction:
    """u′ 를 RadialFunction 으로"""
    derivs = _as_derivatives(u, 1)
    return RadialFunction(derivs[1:], u.R, u.breakpoints, f"({u.name})′" if u.name else "")


def nabla_gamma_k(u: RadialFunction, gamma: float, k: int) -> RadialFunction:
    """∇_γ^k u: k 짝수면 Δ_γ^{k/2}u, 홀수면 (Δ_γ^{(k−1)/2}u)′"""
    if k < 0:
        raise ValueError(f"Invalid gradient order: {k}")
    _as_derivatives(u, k)
    out = u
    for _ in range(k // 2):
        out = delta_gamma(out, gamma)
    if k % 2:
        out = shift_derivative(out)
    return out


def delta_gamma_nodal(u: GridFunction, gamma: float) -> GridFunction:
    """노드 값만으로 Δ_γ u = −u″ − γu′/r (격자 미분)

    u 의 해석적 도함수를 쓰지 않으므로 green_inverse 의 값 경로를 독립적으로 검사한다.
    """
    x = u.nodes
    d1 = derivative(u, 1).values
    d2 = derivative(u, 2).values
    return GridFunction(u.grid, -d2 - gamma * d1 / x)


def roundtrip_error(u: GridFunction, v_values: np.ndarray, gamma: float) -> float:
    """∥Δ_γ u − v∥ / ∥v∥ in L²_γ, Δ_γ u 는 delta_gamma_nodal"""
    grid = u.grid
    v_values = np.asarray(v_values, dtype=float)
    diff = delta_gamma_nodal(u, gamma).values - v_values
    scale = grid.integrate(v_values * v_values, gamma)
    if not scale > 0:
        raise GreenInverseError("Round-trip source vanishes on the grid")
    return math.sqrt(grid.integrate(diff * diff, gamma) / scale)


def _h_coefficients(order: int, gamma: float, extra: float) -> list[tuple[float, list[float]]]:
    """h = r^{−γ}I, I′ = r^{γ+e}v 일 때

    h^{(m)} = a_m r^{−γ−m} I + Σ_l b_{m,l} r^{e−l} v^{(m−1−l)}
    """
    a, b = 1.0, []
    table = [(a, list(b))]
    for m in range(order):
        nb = [0.0] * (m + 1)
        for l in range(m + 1):
            prev = b[l] if l < m else 0.0
            left = b[l - 1] if 1 <= l <= m else 0.0
            nb[l] = (a if l == m else 0.0) + prev + (extra - (l - 1)) * left
        a = a * (-gamma - m)
        b = nb
        table.append((a, list(b)))
    return table


def _source_derivatives(v, R: float) -> tuple[tuple, tuple]:
    if isinstance(v, RadialFunction):
        return v.derivatives, v.breakpoints
    if isinstance(v, PanelInterpolant):
        return v.as_radial().derivatives, ()
    if isinstance(v, GridFunction):
        if not isinstance(v.grid, PanelGrid):
            raise ValueError("GridFunction sources need a PanelGrid for interpolation")
        return PanelInterpolant(v.grid, v.values).as_radial().derivatives, ()
    if callable(v):
        return (v,), ()
    raise TypeError(f"Unsupported source type: {type(v).__name__}")


def green_inverse(
    v,
    gamma: float,
    R: float,
    grid: PanelGrid | None = None,
    extra: float = 0.0,
) -> RadialFunction:
    """Δ_γ u = r^{e}·v, u(R) = 0, r^γu′ → 0 의 해

    u(r) = ∫_r^R t^{−γ} ∫_0^t v(s) s^{γ+e} ds dt

    u′ = −r^{−γ}I, 고차 도함수는 h = r^{−γ}I 의 미분 점화식으로 계산한다.
    값 u 는 노드에서의 h 를 패널 보간하여 꼬리 적분한다.

    Args:
        v: 콜러블, RadialFunction, GridFunction(PanelGrid) 또는 PanelInterpolant
        extra: 원점 특이 인자 r^e 를 적분 가중치로 옮긴 지수

    Raises:
        GreenInverseError: γ+e ≤ −1 또는 내부 적분이 유한하지 않음
    """
    if not gamma + extra > -1:
        raise GreenInverseError(f"Inner integral diverges at the origin: gamma + extra = {gamma + extra}")
    grid = grid or build_panel_grid(R)
    if not math.isclose(grid.R, R, rel_tol=1e-14):
        raise ValueError(f"Grid radius {grid.R} differs from R={R}")

    v_derivs, bps = _source_derivatives(v, R)
    inner = CumulativeIntegral(v_derivs[0], gamma + extra, grid)
    I_nodes = inner.at_nodes()
    if not np.all(np.isfinite(I_nodes)):
        raise GreenInverseError("Inner integral is not finite on the grid")

    x = grid.nodes
    h = PanelInterpolant(grid, x ** (-gamma) * I_nodes)
    panel_totals = h.antiderivative(grid.edges[1:])
    suffix = np.concatenate([np.cumsum(panel_totals[::-1])[::-1][1:], [0.0]])

    def value(r):
        r = grid.check_domain(r)
        k = grid.panel_index(r)
        out = suffix[k] + panel_totals[k] - h.antiderivative(r)
        return np.where(r == R, 0.0, out)

    order = len(v_derivs) - 1 + 2
    coeffs = _h_coefficients(order - 1, gamma, extra)

    def make(j: int) -> Evaluator:
        a_m, b_m = coeffs[j - 1]
        m = j - 1

        def f(r):
            r = np.asarray(r, dtype=float)
            out = a_m * r ** (-gamma - m) * inner(r)
            for l, bl in enumerate(b_m):
                if bl != 0.0:
                    out = out + bl * r ** (extra - l) * np.asarray(v_derivs[m - 1 - l](r), dtype=float)
            return -out
        return f

    derivs = (value,) + tuple(make(j) for j in range(1, order + 1))
    return RadialFunction(derivs, float(R), bps, f"G_{gamma:g}")


class GreenOperator:
    """PanelGrid 위의 이산 Green 역연산자

    source = r^e·w 를 노드값 w 로 받아 u = G_γ(source), u′, u″ 를 노드에서 계산한다.
    """

    def __init__(self, grid: PanelGrid, gamma: float):
        if not gamma > -1:
            raise ParameterConstraintError(f"Green operator needs gamma > -1: {gamma}")
        self.grid = grid
        self.gamma = float(gamma)
        self._xg = grid.nodes ** (-self.gamma)
        self._cache: dict = {}

    def cumulative(self, values: np.ndarray, extra: float = 0.0) -> np.ndarray:
        return self.grid.cumulative_apply(values, self.gamma + extra)

    def apply(self, values: np.ndarray, extra: float = 0.0) -> np.ndarray:
        return self.grid.tail_apply(self._xg * self.cumulative(values, extra))

    def first_derivative(self, values: np.ndarray, extra: float = 0.0) -> np.ndarray:
        return -self._xg * self.cumulative(values, extra)

    def second_derivative(self, values: np.ndarray, extra: float = 0.0) -> np.ndarray:
        x = self.grid.nodes
        return self.gamma * self._xg / x * self.cumulative(values, extra) - x ** extra * np.asarray(values, dtype=float)

    def _weighted_cumulative(self, extra: float) -> np.ndarray:
        return self._xg[:, None] * self.grid.cumulative_matrix(self.gamma + extra)

    def matrix(self, extra: float = 0.0) -> np.ndarray:
        key = ("G", float(extra))
        if key not in self._cache:
            self._cache[key] = self.grid.tail_matrix() @ self._weighted_cumulative(extra)
        return self._cache[key]

    def derivative_matrix(self, j: int, extra: float = 0.0) -> np.ndarray:
        """u′ (j=1), u″ (j=2) 노드 행렬"""
        W = self._weighted_cumulative(extra)
        if j == 1:
            return -W
        if j == 2:
            x = self.grid.nodes
            return self.gamma * W / x[:, None] - np.diag(x ** extra)
        raise DerivativeOrderError(f"Green operator derivative matrices cover j=1,2: {j}")

    def origin_row(self, extra: float = 0.0) -> np.ndarray:
        """u(0) = ∫_0^R h dt 를 주는 행 벡터"""
        return self.grid.cumulative_matrix(0.0)[-1] @ self._weighted_cumulative(extra)


def _pole(z: float) -> bool:
    return z <= 0 and float(z).is_integer()


def gamma_ratio(num_args: Sequence[float], den_args: Sequence[float]) -> float:
    """Π Γ(num) / Π Γ(den), 로그 감마와 부호 추적

    Raises:
        GammaPoleError: 인자가 0 이하의 정수
    """
    for z in list(num_args) + list(den_args):
        if _pole(z):
            raise GammaPoleError(f"Gamma pole at argument {z}")
    log_value = float(np.sum(gammaln(num_args)) - np.sum(gammaln(den_args)))
    sign = float(np.prod(gammasgn(num_args)) * np.prod(gammasgn(den_args)))
    return sign * math.exp(log_value)


@dataclass
class CoefficientTable:
    """Δ_γ^n ψ = r^{−2n} Σ_{i=1}^{2n} c_{in} (log m)^{−i} H^{(i)} 의 계수 c_{in}

    levels[n−1][i−1] = c_{in}
    """
    gamma: float
    n: int
    convention: str
    levels: List[np.ndarray]
    closed_form: List[float | None] = field(default_factory=list)
    mismatch: List[bool] = field(default_factory=list)

    def c(self, i: int, n: int) -> float:
        if not (1 <= n <= self.n and 1 <= i <= 2 * n):
            raise IndexError(f"Coefficient c_({i},{n}) outside table of depth {self.n}")
        return float(self.levels[n - 1][i - 1])

    @property
    def consistent(self) -> bool:
        return not any(self.mismatch)


def c1n_closed_form(gamma: float, n: int) -> float:
    """c_{1n} = −2^{2n−1} Γ(n)Γ((γ+1)/2) / Γ((γ+1−2n)/2)

    분모만 극점이면 1/Γ = 0 이므로 0. 분자 극점은 GammaPoleError.
    """
    if _pole((gamma + 1 - 2 * n) / 2) and not _pole((gamma + 1) / 2):
        return 0.0
    return -(2.0 ** (2 * n - 1)) * gamma_ratio([n, (gamma + 1) / 2], [(gamma + 1 - 2 * n) / 2])


def coefficient_table(gamma: float, n: int, convention: str = "stated") -> CoefficientTable:
    """c_{in} 점화식 테이블

    c_{i,n+1} = −2n(2n+1)c_{in} − (4n+1)c_{i−1,n} − c_{i−2,n} + 2nγc_{in} + γc_{i−1,n}

    convention="stated" 는 c₁₁ = −(γ−1), "operator" 는 ψ 를 직접 미분한 c₁₁ = +(γ−1).
    c_{1n} 은 닫힌 꼴과 비교한다. 분자 Γ 극점이면 점화식 값을 유지하고 불일치로 표시한다.
    """
    if n < 1:
        raise ValueError(f"Invalid table depth: {n}")
    if convention == "stated":
        c11 = -(gamma - 1)
    elif convention == "operator":
        c11 = gamma - 1
    else:
        raise ValueError(f"Unknown coefficient convention: {convention}")

    levels = [np.array([c11, -1.0])]
    for level in range(1, n):
        prev = np.concatenate([[0.0, 0.0], levels[-1], [0.0, 0.0]])
        size = 2 * (level + 1)
        nxt = np.zeros(size)
        for i in range(1, size + 1):
            c_i, c_im1, c_im2 = prev[i + 1], prev[i], prev[i - 1]
            nxt[i - 1] = (
                -2 * level * (2 * level + 1) * c_i
                - (4 * level + 1) * c_im1
                - c_im2
                + 2 * level * gamma * c_i
                + gamma * c_im1
            )
        levels.append(nxt)

    sign = 1.0 if convention == "stated" else -1.0
    closed, mismatch = [], []
    for level, row in enumerate(levels, start=1):
        try:
            cf = sign * c1n_closed_form(gamma, level)
        except GammaPoleError:
            logger.warning(f"⚠️ Gamma pole in closed form for c_1{level} at gamma={gamma}")
            closed.append(None)
            mismatch.append(True)
            continue
        closed.append(cf)
        scale = max(abs(cf), abs(row[0]), 1e-300)
        mismatch.append(abs(cf - row[0]) > CLOSED_FORM_RTOL * scale)

    return CoefficientTable(gamma=float(gamma), n=n, convention=convention, levels=levels, closed_form=closed, mismatch=mismatch)


def iterated_laplacian_psi(seq: MoserSequenceParams, gamma: float, n: int) -> RadialFunction:
    """Δ_γ^n ψ_{m,ε}(r) = r^{−2n} Σ_{i=1}^{2n} c_{in}/(log m)^i H^{(i)}(log(R/r)/log m)

    계수는 ψ 를 직접 미분한 부호 규약(c₁₁ = γ−1)을 따른다.

    Raises:
        DerivativeOrderError: 2n 이 프로파일 다항식 차수를 넘음
    """
    if n < 1:
        raise ValueError(f"Invalid iteration count: {n}")
    phi = resolve_phi(seq)
    if 2 * n > phi.degree():
        raise DerivativeOrderError(f"Profile of degree {phi.degree()} cannot supply {2 * n} derivatives")
    table = coefficient_table(gamma, n, convention="operator")
    L = math.log(seq.m)
    R = seq.R
    coeffs = table.levels[n - 1]
    h_derivs = [profile_derivative(phi, seq.eps, i) for i in range(1, 2 * n + 1)]

    def f(r):
        r = np.asarray(r, dtype=float)
        t = np.log(R / r) / L
        out = np.zeros(r.shape)
        for i, (c, h) in enumerate(zip(coeffs, h_derivs), start=1):
            out = out + c * L ** (-i) * h(t)
        return out * r ** (-2 * n)

    bps = (R * seq.m ** (-seq.eps), R * seq.m ** (-(1 - seq.eps)), R / seq.m)
    return RadialFunction((f,), R, bps, f"Δ^{n}ψ")


def _check_navier(theta: float, gamma: float, p: float, k: int) -> None:
    if k < 1:
        raise ParameterConstraintError(f"Invalid order k: {k}")
    if not p > 1:
        raise ParameterConstraintError(f"Navier constants need p > 1: {p}")
    if not theta > -1:
        raise ParameterConstraintError(f"Invalid theta: {theta}")
    bound = k - 1 if k % 2 == 0 else k - 2
    if not gamma > bound:
        raise ParameterConstraintError(f"gamma must exceed {bound} for k={k}: {gamma}")


def navier_base(gamma: float, k: int) -> float:
    """k 홀수: 2^{k−1}Γ((k+1)/2)Γ((γ+1)/2)/Γ((γ+2−k)/2)
    k 짝수: 2^{k−1}Γ(k/2)Γ((γ+1)/2)/Γ((γ+1−k)/2)
    """
    if k % 2:
        return 2.0 ** (k - 1) * gamma_ratio([(k + 1) / 2, (gamma + 1) / 2], [(gamma + 2 - k) / 2])
    return 2.0 ** (k - 1) * gamma_ratio([k / 2, (gamma + 1) / 2], [(gamma + 1 - k) / 2])


def mu0_navier(theta: float, gamma: float, p: float, k: int) -> float:
    """Navier 조건 하의 날카로운 상수 μ₀ = (θ+1)·base^{p′}"""
    _check_navier(theta, gamma, p, k)
    if k == 1:
        return float(theta + 1)
    return float((theta + 1) * navier_base(gamma, k) ** conjugate(p))


def comparison_constant(gamma: float, q: float) -> float:
    """C_{γ,q} = q² / ((q−1)(γ+1)(γ−2q+1))"""
    if not q > 1:
        raise ParameterConstraintError(f"Comparison constant needs q > 1: {q}")
    if not gamma - 2 * q + 1 > 0:
        raise ParameterConstraintError(f"Comparison constant needs gamma - 2q + 1 > 0: gamma={gamma}, q={q}")
    return q * q / ((q - 1) * (gamma + 1) * (gamma - 2 * q + 1))


def chain_constants(p: float, alpha: float, gamma: float, j: int) -> list[float]:
    """C_i = p² / ([(γ+1)p − (α−2(i−1)p+1)](α−2ip+1)), i = 1..j−1"""
    if not p > 1:
        raise ParameterConstraintError(f"Chain constants need p > 1: {p}")
    if j < 1:
        raise ParameterConstraintError(f"Invalid chain length: {j}")
    if j >= 2:
        if not alpha > 2 * (j - 1) * p - 1:
            raise ParameterConstraintError(f"Chain needs alpha > 2(j-1)p - 1: alpha={alpha}, j={j}")
        if not gamma > (alpha - p + 1) / p:
            raise ParameterConstraintError(f"Chain needs gamma > (alpha - p + 1)/p: gamma={gamma}")
    out = []
    for i in range(1, j):
        left = (gamma + 1) * p - (alpha - 2 * (i - 1) * p + 1)
        right = alpha - 2 * i * p + 1
        out.append(p * p / (left * right))
    return out


def product_identity(k: int, gamma: float, p: float) -> tuple[float, float]:
    """C_i 사슬 값과 Γ 공식 값

    k=2j: (γ−1)Π C_i^{−1}, α = kp−1
    k=2j+1: (γ−1)((α_k−p+1)/p)Π C_i^{−1}, α_k = kp−1, α = α_k−p

    Returns:
        (chain, gamma_formula)
    """
    if k < 2:
        raise ParameterConstraintError(f"Product identity needs k >= 2: {k}")
    _check_navier(0.0, gamma, p, k)
    j = k // 2
    alpha_k = k * p - 1
    if k % 2 == 0:
        chain = (gamma - 1) * float(np.prod([1.0 / c for c in chain_constants(p, alpha_k, gamma, j)]))
    else:
        alpha = alpha_k - p
        chain = (gamma - 1) * (alpha_k - p + 1) / p * float(
            np.prod([1.0 / c for c in chain_constants(p, alpha, gamma, j)])
        )
    return float(chain), navier_base(gamma, k)
