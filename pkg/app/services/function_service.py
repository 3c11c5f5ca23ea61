# app/services/function_service.py

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import legendre as npleg

from app.services.quadrature_service import Grid, PanelGrid

logger = logging.getLogger(__name__)

Evaluator = Callable[[np.ndarray], np.ndarray]

MAX_GRID_DERIVATIVE = 4

# 도함수 차수별 스텐실 크기 (비균등 차분)
_STENCIL_SIZE = {1: 3, 2: 5, 3: 5, 4: 7}


class FunctionError(Exception):
    """함수 표현 관련 예외"""
    pass


class DerivativeOrderError(FunctionError, ValueError):
    """요청한 도함수 차수가 지원 범위를 넘음"""
    pass


class GridTooSmallError(FunctionError, ValueError):
    """차분 스텐실을 만들 노드가 부족함"""
    pass


def _as_array(f: Evaluator, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return np.array(np.broadcast_to(np.asarray(f(r), dtype=float), r.shape))


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """(0,R] 위의 함수와 도함수 u, u′, …, u^{(k)} 평가자

    breakpoints 는 도함수가 불연속일 수 있는 반지름 (적분 패널 경계로 사용).
    """
    derivatives: tuple[Evaluator, ...]
    R: float
    breakpoints: tuple[float, ...] = ()
    name: str = ""

    def __post_init__(self):
        if not self.derivatives:
            raise ValueError("RadialFunction needs at least the value evaluator")
        if not self.R > 0:
            raise ValueError(f"Invalid radius: {self.R}")

    @property
    def order(self) -> int:
        return len(self.derivatives) - 1

    def __call__(self, r) -> np.ndarray:
        return _as_array(self.derivatives[0], r)

    def derivative(self, j: int) -> Evaluator:
        if j < 0 or j > self.order:
            raise DerivativeOrderError(f"Derivative order {j} exceeds available order {self.order}")
        f = self.derivatives[j]
        return lambda r: _as_array(f, r)

    def evaluate(self, r, j: int = 0) -> np.ndarray:
        return self.derivative(j)(r)

    def truncate(self, order: int) -> "RadialFunction":
        if order > self.order:
            raise DerivativeOrderError(f"Cannot extend order {self.order} to {order}")
        return RadialFunction(self.derivatives[: order + 1], self.R, self.breakpoints, self.name)

    def scale(self, c: float) -> "RadialFunction":
        derivs = tuple((lambda r, f=f: c * _as_array(f, r)) for f in self.derivatives)
        return RadialFunction(derivs, self.R, self.breakpoints, self.name)

    def add(self, other: "RadialFunction") -> "RadialFunction":
        if other.R != self.R:
            raise ValueError(f"Radius mismatch: {self.R} vs {other.R}")
        k = min(self.order, other.order)
        derivs = tuple(
            (lambda r, f=f, g=g: _as_array(f, r) + _as_array(g, r))
            for f, g in zip(self.derivatives[: k + 1], other.derivatives[: k + 1])
        )
        bps = tuple(sorted(set(self.breakpoints) | set(other.breakpoints)))
        return RadialFunction(derivs, self.R, bps)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """격자 노드 위의 값"""
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.nodes.shape:
            raise ValueError(f"Value count {values.size} differs from node count {self.grid.n}")
        if not np.all(np.isfinite(values)):
            raise ValueError("GridFunction values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def scale(self, c: float) -> "GridFunction":
        return GridFunction(self.grid, c * self.values)


def from_analytic(u: RadialFunction, g: Grid) -> GridFunction:
    """해석적 함수를 격자 노드에서 샘플링"""
    if not np.isclose(u.R, g.R, rtol=1e-14, atol=0):
        raise ValueError(f"Domain mismatch: function R={u.R}, grid R={g.R}")
    return GridFunction(g, u(g.nodes))


def fornberg_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """점 z 에서 0..m 차 도함수를 근사하는 유한차분 가중치

    Returns:
        shape (len(x), m+1) 가중치 행렬
    """
    n = len(x)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def _finite_difference(x: np.ndarray, y: np.ndarray, j: int) -> np.ndarray:
    n = len(x)
    size = min(_STENCIL_SIZE[j], n)
    out = np.empty(n)
    for i in range(n):
        start = min(max(i - size // 2, 0), n - size)
        idx = slice(start, start + size)
        w = fornberg_weights(x[i], x[idx], j)[:, j]
        out[i] = w @ y[idx]
    return out


class PanelInterpolant:
    """패널별 Legendre 보간 (PanelGrid 전용)

    도함수는 패널 내 스펙트럴 미분으로 계산한다.
    """

    def __init__(self, grid: PanelGrid, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.nodes.shape:
            raise ValueError(f"Value count {values.size} differs from node count {grid.n}")
        self.grid = grid
        P, q = grid.n_panels, grid.order
        coeffs = values[:-1].reshape(P, q) @ grid.vandermonde_inverse().T
        self._coeffs = [coeffs]
        for j in range(1, MAX_GRID_DERIVATIVE + 1):
            d = npleg.legder(coeffs, m=j, axis=1)
            self._coeffs.append(np.pad(d, ((0, 0), (0, q - d.shape[1]))))

    def evaluate(self, r, j: int = 0) -> np.ndarray:
        if j > MAX_GRID_DERIVATIVE:
            raise DerivativeOrderError(f"Derivative order {j} exceeds {MAX_GRID_DERIVATIVE}")
        r = self.grid.check_domain(r)
        shape = r.shape
        r = r.ravel()
        k = self.grid.panel_index(r)
        xi = self.grid.to_reference(r, k)
        V = npleg.legvander(xi, self.grid.order - 1)
        vals = np.einsum("nl,nl->n", V, self._coeffs[j][k]) / self.grid.half_widths[k] ** j
        return vals.reshape(shape)

    def __call__(self, r) -> np.ndarray:
        return self.evaluate(r, 0)

    def antiderivative(self, r) -> np.ndarray:
        """∫_{a_k}^r (보간식) dt, r 이 속한 패널 k 의 왼쪽 끝에서부터"""
        r = np.asarray(r, dtype=float)
        k = self.grid.panel_index(r)
        xi = self.grid.to_reference(r, k)
        integ = npleg.legint(self._coeffs[0], m=1, lbnd=-1, axis=1)
        V = npleg.legvander(xi, integ.shape[1] - 1)
        return np.einsum("nl,nl->n", V.reshape(-1, integ.shape[1]), integ[k.ravel()]).reshape(r.shape) * self.grid.half_widths[k]

    def as_radial(self, order: int = MAX_GRID_DERIVATIVE) -> RadialFunction:
        derivs = tuple((lambda r, j=j: self.evaluate(r, j)) for j in range(order + 1))
        return RadialFunction(derivs, self.grid.R, name="panel-interpolant")


def derivative(u: GridFunction, j: int) -> GridFunction:
    """격자 함수의 j 차 도함수

    PanelGrid 는 패널 스펙트럴 미분, 일반 Grid 는 Fornberg 가중치의 비균등 차분
    (내부 중심, 양 끝 한쪽 스텐실).

    Raises:
        DerivativeOrderError: j > 4
        GridTooSmallError: 노드 수 < j+2
    """
    if j < 0 or j > MAX_GRID_DERIVATIVE:
        raise DerivativeOrderError(f"Grid derivative order must be in 0..{MAX_GRID_DERIVATIVE}: {j}")
    if u.grid.n < j + 2:
        raise GridTooSmallError(f"Grid with {u.grid.n} nodes too small for derivative order {j}")
    if j == 0:
        return u
    if isinstance(u.grid, PanelGrid):
        return GridFunction(u.grid, PanelInterpolant(u.grid, u.values).evaluate(u.grid.nodes, j))
    return GridFunction(u.grid, _finite_difference(u.grid.nodes, u.values, j))


def constant(c: float, R: float, order: int = 4) -> RadialFunction:
    derivs = (lambda r: np.full(np.shape(r), c, dtype=float),) + tuple(
        (lambda r: np.zeros(np.shape(r))) for _ in range(order)
    )
    return RadialFunction(derivs, R, name=f"constant({c:g})")


def power(s: float, R: float, order: int = 4, coefficient: float = 1.0) -> RadialFunction:
    """c·r^s 와 도함수 c·s(s−1)…(s−j+1) r^{s−j}"""

    def make(j: int) -> Evaluator:
        falling = float(np.prod([s - i for i in range(j)])) if j else 1.0
        return lambda r: coefficient * falling * np.asarray(r, dtype=float) ** (s - j)

    return RadialFunction(tuple(make(j) for j in range(order + 1)), R, name=f"r^{s:g}")


def polynomial(coefficients: Sequence[float], R: float, order: int = 4) -> RadialFunction:
    """Σ c_i r^i"""
    p = Polynomial(coefficients)
    derivs = tuple((lambda r, q=p.deriv(j): q(np.asarray(r, dtype=float))) for j in range(order + 1))
    return RadialFunction(derivs, R, name="polynomial")


def cosine_series(coefficients: Sequence[float], R: float, order: int = 4) -> RadialFunction:
    """Σ_j a_j cos(jπr/R), j=0.."""

    def make(d: int) -> Evaluator:
        def f(r):
            r = np.asarray(r, dtype=float)
            out = np.zeros(r.shape)
            for j, a in enumerate(coefficients):
                w = j * np.pi / R
                # d 차 도함수: w^d cos(wr + dπ/2)
                out = out + a * w ** d * np.cos(w * r + d * np.pi / 2)
            return out
        return f

    return RadialFunction(tuple(make(d) for d in range(order + 1)), R, name="cosine-series")


def compose_log(profile_derivs: Sequence[Evaluator], R: float, L: float, order: int, breakpoints=(), name="") -> RadialFunction:
    """ψ(r) = H(log(R/r)/L) 와 연쇄법칙 도함수

    ψ^{(i)}(r) = r^{−i} Σ_j c(j,i) L^{−j} H^{(j)}(t),
    c(1,1) = −1, c(j,i+1) = −i·c(j,i) − c(j−1,i).
    """
    c = {(0, 0): 1.0}
    table = [c]
    for i in range(order):
        nxt = {}
        for (j, ii), val in table[-1].items():
            nxt[(j, i + 1)] = nxt.get((j, i + 1), 0.0) - i * val
            nxt[(j + 1, i + 1)] = nxt.get((j + 1, i + 1), 0.0) - val
        table.append(nxt)

    def make(i: int) -> Evaluator:
        coeffs = {j: v for (j, _), v in table[i].items() if v != 0.0}

        def f(r):
            r = np.asarray(r, dtype=float)
            t = np.log(R / r) / L
            if i == 0:
                return profile_derivs[0](t)
            out = np.zeros(r.shape)
            for j, v in coeffs.items():
                out = out + v * L ** (-j) * profile_derivs[j](t)
            return out * r ** (-i)
        return f

    return RadialFunction(tuple(make(i) for i in range(order + 1)), R, tuple(breakpoints), name)
