# app/services/quadrature_service.py

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.special import roots_jacobi, roots_legendre

from app.core.config import settings
from app.core.constants import QUAD_RADIUS_FLOOR

logger = logging.getLogger(__name__)

Integrand = Callable[[np.ndarray], np.ndarray]

_TINY = 1e-300


class QuadratureError(Exception):
    """적분 관련 예외"""
    pass


class EstimationFailure(QuadratureError):
    """최대 세분 이후에도 수렴하지 않은 적분

    Attributes:
        estimate: 마지막 추정값
        error_bound: 오차 한계 추정
    """

    def __init__(self, message: str, estimate: float, error_bound: float):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class QuadratureDomainError(QuadratureError, ValueError):
    """(0,R] 밖에서의 평가"""
    pass


@lru_cache(maxsize=None)
def _legendre_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=256)
def _jacobi_rule(order: int, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """[0,1] 위 가중치 x^θ 의 Gauss–Jacobi 규칙"""
    xi, w = roots_jacobi(order, 0.0, theta)
    x = 0.5 * (1.0 + xi)
    w = w / 2.0 ** (theta + 1.0)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _evaluate(f: Integrand, r: np.ndarray) -> np.ndarray:
    values = np.broadcast_to(np.asarray(f(r), dtype=float), r.shape)
    if not np.all(np.isfinite(values)):
        raise EstimationFailure("non-finite integrand value", float("inf"), float("inf"))
    return values


def _legendre_panels(f: Integrand, a: np.ndarray, b: np.ndarray, theta: float, order: int) -> np.ndarray:
    x, w = _legendre_rule(order)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    r = mid[:, None] + half[:, None] * x[None, :]
    with np.errstate(over="ignore", invalid="ignore"):
        vals = _evaluate(f, r) * r ** theta
    return half * (vals @ w)


def _jacobi_origin(f: Integrand, theta: float, e: float, order: int) -> float:
    """∫_0^e f(s) s^θ ds"""
    x, w = _jacobi_rule(order, float(theta))
    with np.errstate(over="ignore", invalid="ignore"):
        vals = _evaluate(f, e * x)
    return float(e ** (theta + 1.0) * (vals @ w))


def _integrate_panels(
    f: Integrand,
    edges: np.ndarray,
    theta: float,
    tol: float,
    order: int,
    max_depth: int,
) -> tuple[np.ndarray, np.ndarray]:
    """패널별 적응 반분 적분

    Returns:
        (패널별 값, 패널별 오차 추정)
    """
    n = len(edges) - 1
    a = edges[:-1].copy()
    b = edges[1:].copy()
    owner = np.arange(n)
    values = np.zeros(n)
    errors = np.zeros(n)
    span = edges[-1] - edges[0]
    scale = None

    for depth in range(max_depth + 1):
        m = len(a)
        mid = 0.5 * (a + b)
        coarse = _legendre_panels(f, a, b, theta, order)
        halves = _legendre_panels(f, np.concatenate([a, mid]), np.concatenate([mid, b]), theta, order)
        fine = halves[:m] + halves[m:]
        err = np.abs(fine - coarse)
        if scale is None:
            scale = max(float(np.abs(fine).sum()), _TINY)
        share = tol * scale * (b - a) / span
        ok = (err <= tol * np.abs(fine)) | (err <= share)
        if depth == max_depth:
            if not ok.all():
                logger.debug(f"⚠️ {int((~ok).sum())} panels hit max depth {max_depth}")
            ok[:] = True
        np.add.at(values, owner[ok], fine[ok])
        np.add.at(errors, owner[ok], err[ok])
        keep = ~ok
        if not keep.any():
            break
        a, b = np.concatenate([a[keep], mid[keep]]), np.concatenate([mid[keep], b[keep]])
        owner = np.concatenate([owner[keep], owner[keep]])

    return values, errors


@dataclass(frozen=True, eq=False)
class Grid:
    """(0,R] 위의 격자. 노드는 엄격히 증가하고 마지막 노드는 R"""
    nodes: np.ndarray
    R: float
    grading: float

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size == 0:
            raise ValueError("Grid needs a nonempty 1-d node array")
        if nodes[0] <= 0:
            raise ValueError(f"Grid nodes must be positive: min node {nodes[0]}")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("Grid nodes must be strictly increasing")
        if nodes[-1] != self.R:
            raise ValueError(f"Last grid node {nodes[-1]} differs from R={self.R}")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n(self) -> int:
        return int(self.nodes.size)

    @property
    def min_node(self) -> float:
        return float(self.nodes[0])

    def check_domain(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0) or np.any(r > self.R):
            raise QuadratureDomainError(f"Evaluation outside (0, {self.R}]")
        return r


def build_grid(R: float, n: int, grading: float) -> Grid:
    """원점 쪽으로 기하 등급화된 격자 생성

    Args:
        R: 반지름
        n: 노드 수 (16 이상)
        grading: 기하 비율. 1 이면 균등 격자

    Returns:
        r_i = R·g^{n−i} (i=1..n) 노드의 Grid
    """
    if not R > 0:
        raise ValueError(f"Invalid radius: {R}")
    if n < 16:
        raise ValueError(f"Grid needs at least 16 nodes: {n}")
    if not (0 < grading <= 1):
        raise ValueError(f"Invalid grading ratio: {grading}")

    i = np.arange(1, n + 1)
    if grading == 1:
        nodes = R * i / n
    else:
        nodes = R * grading ** (n - i).astype(float)
        if nodes[0] <= 0:
            raise ValueError(f"Grading {grading} underflows with n={n}")
    nodes[-1] = R
    return Grid(nodes=nodes, R=float(R), grading=float(grading))


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """가중치 r^θ 에 대한 등급화 패널 규칙

    첫 패널 [0, e_P] 는 Gauss–Jacobi, 나머지는 Gauss–Legendre × r^θ.
    """
    edges: np.ndarray
    theta: float
    order: int

    def __post_init__(self):
        if not self.theta > -1:
            raise ValueError(f"Weight exponent must exceed -1: {self.theta}")

    @property
    def R(self) -> float:
        return float(self.edges[-1])

    def nodes_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """원점 패널과 사다리 패널의 (노드, 양의 가중치)"""
        xj, wj = _jacobi_rule(self.order, float(self.theta))
        e = self.edges[0]
        origin_nodes = e * xj
        origin_weights = e ** (self.theta + 1.0) * wj

        x, w = _legendre_rule(self.order)
        a, b = self.edges[:-1], self.edges[1:]
        half = 0.5 * (b - a)
        r = 0.5 * (a + b)[:, None] + half[:, None] * x[None, :]
        weights = half[:, None] * w[None, :] * r ** self.theta
        return np.concatenate([origin_nodes, r.ravel()]), np.concatenate([origin_weights, weights.ravel()])

    def apply(self, f: Integrand) -> float:
        """고정 규칙 적용 (적응 세분 없음)"""
        nodes, weights = self.nodes_weights()
        return float(_evaluate(f, nodes) @ weights)


def build_rule(
    theta: float,
    R: float,
    panels: int | None = None,
    grading: float | None = None,
    order: int | None = None,
    breakpoints: Sequence[float] = (),
) -> QuadratureRule:
    if not R > 0:
        raise ValueError(f"Invalid radius: {R}")
    panels = settings.quad_panels if panels is None else panels
    grading = settings.quad_grading if grading is None else grading
    order = settings.quad_order if order is None else order
    if panels < 1 or order < 1 or not (0 < grading < 1):
        raise ValueError(f"Invalid quadrature rule: panels={panels}, grading={grading}, order={order}")

    extra = [float(b) for b in breakpoints if 0 < b < R]
    if extra and min(extra) < R * grading ** panels:
        # 가장 작은 breakpoint 아래까지 사다리 연장
        panels = int(np.ceil(np.log(min(extra) / R) / np.log(grading))) + 2
    ladder = R * grading ** np.arange(panels + 1, dtype=float)
    edges = np.unique(np.concatenate([ladder, extra]))
    return QuadratureRule(edges=edges, theta=float(theta), order=int(order))


def _tolerance(tol: float | None) -> float:
    tol = settings.quad_tol if tol is None else tol
    if not tol > 0:
        raise ValueError(f"Quadrature tolerance must be positive: {tol}")
    return tol


def _check_converged(total: float, bound: float, magnitude: float, tol: float, where: str) -> None:
    """오차 추정 합이 10·tol·규모를 넘으면 EstimationFailure"""
    if not bound <= 10 * tol * max(abs(total), magnitude, _TINY):
        logger.warning(f"⚠️ Quadrature on {where} did not converge: estimate={total:.6e}, bound={bound:.3e}")
        raise EstimationFailure(f"panel refinement did not converge on {where}", total, bound)


def integrate_weighted(
    f: Integrand,
    theta: float,
    R: float,
    tol: float | None = None,
    lower: float = 0.0,
    breakpoints: Sequence[float] = (),
) -> float:
    """∫_lower^R f(r) r^θ dr

    기하 사다리 패널 + 패널 반분 적응. lower=0 이면 원점 쪽으로 사다리를 연장하고
    잔여 적분을 Gauss–Jacobi 와 기하급수 외삽 두 방식으로 추정해 비교한다.

    Raises:
        EstimationFailure: 세분 한계 내에서 수렴하지 못함
    """
    tol = _tolerance(tol)
    if not R > 0:
        raise ValueError(f"Invalid radius: {R}")
    if lower < 0 or lower >= R:
        raise ValueError(f"Invalid lower limit {lower} for R={R}")
    if lower == 0 and not theta > -1:
        raise ValueError(f"Weight exponent must exceed -1: {theta}")

    order = settings.quad_order
    max_depth = settings.quad_max_depth
    rule = build_rule(theta, R, breakpoints=breakpoints)
    edges = rule.edges
    if lower > 0:
        edges = np.unique(np.concatenate([[lower], edges[edges > lower]]))

    values, errors = _integrate_panels(f, edges, theta, tol, order, max_depth)
    total = float(values.sum())
    bound = float(errors.sum())

    magnitude = float(np.abs(values).sum())
    if lower > 0:
        _check_converged(total, bound, magnitude, tol, f"[{lower}, {R}]")
        return total

    remainder, rem_bound = _origin_remainder(f, theta, float(edges[0]), R, total, tol, order, max_depth)
    _check_converged(total + remainder, bound + rem_bound, magnitude + abs(remainder), tol, f"(0, {R}]")
    return total + remainder


def _origin_remainder(
    f: Integrand,
    theta: float,
    e: float,
    R: float,
    total: float,
    tol: float,
    order: int,
    max_depth: int,
) -> tuple[float, float]:
    """원점 잔여 ∫_0^e f r^θ dr 추정

    사다리를 계속 내려가며 (a) Gauss–Jacobi 잔여와 (b) 마지막 패널 기여의
    기하급수 꼬리 c·q/(1−q) 를 비교한다. 둘이 일치하거나 꼬리 비율이 안정되면 채택.
    """
    grading = settings.quad_grading
    contributions: list[float] = []
    bound = 0.0
    batch = 4

    while True:
        lo = e * grading ** batch
        sub = e * grading ** np.arange(batch, -1, -1, dtype=float)
        vals, errs = _integrate_panels(f, sub, theta, tol, order, max_depth)
        contributions.extend(vals[::-1].tolist())
        total += float(vals.sum())
        bound += float(errs.sum())
        e = lo

        thresh = tol * max(abs(total), _TINY)
        jac = _jacobi_origin(f, theta, e, order)

        tail = None
        tail_err = float("inf")
        c2, c1, c0 = contributions[-3], contributions[-2], contributions[-1]
        if c1 != 0 and c2 != 0 and c0 * c1 > 0 and c1 * c2 > 0:
            q = c0 / c1
            q_prev = c1 / c2
            if 0 < q < 1:
                tail = c0 * q / (1 - q)
                tail_err = 10 * abs(q - q_prev) * abs(c0) / (1 - q) ** 2

        if tail is not None and abs(jac - tail) <= thresh:
            return jac, bound
        if tail is not None and tail_err <= thresh:
            return tail, bound + tail_err
        if abs(jac) <= thresh and abs(c0) <= thresh:
            return jac, bound

        if len(contributions) >= 8:
            recent = np.array(contributions[-5:])
            ratios = recent[1:] / np.where(recent[:-1] == 0, np.nan, recent[:-1])
            if np.all(ratios >= 1):
                raise EstimationFailure("integrand not integrable at the origin", total, float("inf"))

        if e < QUAD_RADIUS_FLOOR * R or len(contributions) > settings.quad_max_panels:
            estimate = total + (tail if tail is not None else jac)
            logger.warning(f"⚠️ Origin remainder unresolved at r={e:.3e}")
            raise EstimationFailure("origin remainder did not converge", estimate, abs(jac - (tail or 0.0)))


def integrate_interval(f: Integrand, a: float, b: float, tol: float | None = None, panels: int = 16) -> float:
    """유한 구간 [a,b] 위의 적응 Gauss–Legendre 적분"""
    tol = _tolerance(tol)
    if not b > a:
        raise ValueError(f"Invalid interval [{a}, {b}]")
    edges = np.linspace(a, b, panels + 1)
    values, errors = _integrate_panels(f, edges, 0.0, tol, settings.quad_order, settings.quad_max_depth)
    total = float(values.sum())
    bound = float(errors.sum())
    _check_converged(total, bound, float(np.abs(values).sum()), tol, f"[{a}, {b}]")
    return total


@dataclass(frozen=True, eq=False)
class PanelGrid(Grid):
    """패널별 Gauss–Legendre 노드 + R 로 이루어진 격자

    첫 패널 [0, e₁] 는 가중 적분에서 Gauss–Jacobi 로 처리된다.
    """
    edges: np.ndarray = None
    order: int = 16
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_panels(self) -> int:
        return len(self.edges) - 1

    @property
    def gauss_nodes(self) -> np.ndarray:
        return self.nodes[:-1].reshape(self.n_panels, self.order)

    @property
    def half_widths(self) -> np.ndarray:
        return 0.5 * np.diff(self.edges)

    def panel_index(self, r: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.edges, r, side="left") - 1
        return np.clip(idx, 0, self.n_panels - 1)

    def to_reference(self, r: np.ndarray, k: np.ndarray) -> np.ndarray:
        a = self.edges[k]
        return (r - a) / self.half_widths[k] - 1.0

    def vandermonde_inverse(self) -> np.ndarray:
        if "vinv" not in self._cache:
            x, _ = _legendre_rule(self.order)
            self._cache["vinv"] = np.linalg.inv(npleg.legvander(x, self.order - 1))
        return self._cache["vinv"]

    def quadrature_weights(self) -> np.ndarray:
        """∫ f dr ≈ Σ w_i f(x_i). R 노드의 가중치는 0"""
        if "qw" not in self._cache:
            _, w = _legendre_rule(self.order)
            qw = (self.half_widths[:, None] * w[None, :]).ravel()
            self._cache["qw"] = np.concatenate([qw, [0.0]])
        return self._cache["qw"]

    def lagrange_basis(self, r: np.ndarray, k: np.ndarray) -> np.ndarray:
        """패널 k 의 Lagrange 기저값, shape r.shape + (order,)"""
        xi = self.to_reference(r, k)
        return npleg.legvander(xi, self.order - 1) @ self.vandermonde_inverse()

    def partial_moment(self, v: Integrand, gamma: float, a: np.ndarray, t: np.ndarray) -> np.ndarray:
        """∫_a^t v(s) s^γ ds. a=0 인 항은 Gauss–Jacobi, 나머지는 Gauss–Legendre"""
        a = np.asarray(a, dtype=float)
        t = np.asarray(t, dtype=float)
        a, t = np.broadcast_arrays(a, t)
        m = self.order + 8
        out = np.zeros(t.shape)

        origin = a == 0
        if origin.any():
            xj, wj = _jacobi_rule(m, float(gamma))
            to = t[origin]
            out[origin] = to ** (gamma + 1.0) * (_evaluate(v, to[:, None] * xj[None, :]) @ wj)
        rest = ~origin
        if rest.any():
            x, w = _legendre_rule(m)
            ar, tr = a[rest], t[rest]
            half = 0.5 * (tr - ar)
            s = ar[:, None] + half[:, None] * (1.0 + x[None, :])
            out[rest] = half * ((_evaluate(v, s) * s ** gamma) @ w)
        return out

    def cumulative_weights(self, gamma: float) -> tuple[np.ndarray, np.ndarray]:
        """보간 다항식에 대한 누적 모멘트 가중치

        Returns:
            partial (P,q,q): 패널 k 의 노드 i 까지 ∫_{a_k}^{x_i} ℓ_l s^γ ds
            totals (P,q): 패널 전체 ∫ ℓ_l s^γ ds
        """
        key = ("cum", float(gamma))
        if key in self._cache:
            return self._cache[key]

        P, q = self.n_panels, self.order
        m = q + 8
        xl, wl = _legendre_rule(m)
        xj, wj = _jacobi_rule(m, float(gamma))
        partial = np.zeros((P, q, q))
        totals = np.zeros((P, q))
        for k in range(P):
            a, b = self.edges[k], self.edges[k + 1]
            uppers = np.concatenate([self.gauss_nodes[k], [b]])
            kk = np.full(m, k)
            rows = []
            for t in uppers:
                if k == 0:
                    s = t * xj
                    basis = self.lagrange_basis(s, kk)
                    rows.append(t ** (gamma + 1.0) * (wj @ basis))
                else:
                    half = 0.5 * (t - a)
                    s = a + half * (1.0 + xl)
                    basis = self.lagrange_basis(s, kk)
                    rows.append(half * ((wl * s ** gamma) @ basis))
            rows = np.array(rows)
            partial[k] = rows[:-1]
            totals[k] = rows[-1]

        self._cache[key] = (partial, totals)
        return partial, totals

    def cumulative_apply(self, values: np.ndarray, gamma: float) -> np.ndarray:
        """노드값 v → 노드에서의 ∫_0^x v s^γ ds (R 노드 포함)"""
        P, q = self.n_panels, self.order
        vg = np.asarray(values, dtype=float)[:-1].reshape(P, q)
        partial, totals = self.cumulative_weights(gamma)
        panel_totals = (totals * vg).sum(axis=1)
        prefix = np.concatenate([[0.0], np.cumsum(panel_totals)])
        inner = np.einsum("kil,kl->ki", partial, vg) + prefix[:-1, None]
        return np.concatenate([inner.ravel(), [prefix[-1]]])

    def cumulative_matrix(self, gamma: float) -> np.ndarray:
        key = ("cummat", float(gamma))
        if key in self._cache:
            return self._cache[key]
        P, q = self.n_panels, self.order
        partial, totals = self.cumulative_weights(gamma)
        C = np.zeros((self.n, self.n))
        flat = totals.ravel()
        for k in range(P):
            rows = slice(k * q, (k + 1) * q)
            C[rows, : k * q] = flat[: k * q]
            C[rows, k * q:(k + 1) * q] = partial[k]
        C[-1, : P * q] = flat
        self._cache[key] = C
        return C

    def tail_apply(self, values: np.ndarray) -> np.ndarray:
        """노드값 h → ∫_x^R h(t) dt. R 에서 정확히 0"""
        cum = self.cumulative_apply(values, 0.0)
        out = cum[-1] - cum
        out[-1] = 0.0
        return out

    def tail_matrix(self) -> np.ndarray:
        if "tailmat" not in self._cache:
            C = self.cumulative_matrix(0.0)
            T = C[-1][None, :] - C
            T[-1, :] = 0.0
            self._cache["tailmat"] = T
        return self._cache["tailmat"]

    def integrate(self, values: np.ndarray, theta: float = 0.0) -> float:
        """노드값의 ∫_0^R f r^θ dr"""
        return float(np.dot(self.quadrature_weights(), np.asarray(values, dtype=float) * self.nodes ** theta))


def build_panel_grid(
    R: float,
    n: int | None = None,
    order: int | None = None,
    floor: float | None = None,
    count: int | None = None,
) -> PanelGrid:
    """기하 등급 패널 격자

    패널 경계 e_0=0, e_j = R·floor^{(P−j)/(P−1)} (j=1..P).
    """
    if not R > 0:
        raise ValueError(f"Invalid radius: {R}")
    order = settings.panel_order if order is None else order
    floor = settings.panel_floor if floor is None else floor
    if order < 2:
        raise ValueError(f"Panel order must be at least 2: {order}")
    if count is None:
        count = max(4, (n - 1) // order) if n else settings.panel_count
    if count < 2:
        raise ValueError(f"Panel grid needs at least 2 panels: {count}")
    if not (0 < floor < 1):
        raise ValueError(f"Invalid panel floor: {floor}")

    j = np.arange(1, count + 1, dtype=float)
    edges = np.concatenate([[0.0], R * floor ** ((count - j) / (count - 1))])
    edges[-1] = R
    x, _ = _legendre_rule(order)
    a, b = edges[:-1], edges[1:]
    gauss = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * x[None, :]
    nodes = np.concatenate([gauss.ravel(), [R]])
    grading = floor ** (1.0 / (count - 1))
    return PanelGrid(nodes=nodes, R=float(R), grading=float(grading), edges=edges, order=int(order))


class CumulativeIntegral:
    """t ↦ ∫_0^t v(s) s^γ ds

    패널 합은 미리 계산하고, 부분 패널은 평가 시점에 v 를 직접 적분한다.
    """

    def __init__(self, v: Integrand, gamma: float, grid: PanelGrid):
        if not gamma > -1:
            raise ValueError(f"Cumulative weight exponent must exceed -1: {gamma}")
        self.v = v
        self.gamma = float(gamma)
        self.grid = grid
        edges = grid.edges
        totals = grid.partial_moment(v, self.gamma, edges[:-1], edges[1:])
        self._prefix = np.concatenate([[0.0], np.cumsum(totals)])

    @property
    def R(self) -> float:
        return self.grid.R

    @property
    def total(self) -> float:
        return float(self._prefix[-1])

    def __call__(self, t) -> np.ndarray:
        t = self.grid.check_domain(t)
        k = self.grid.panel_index(t)
        a = self.grid.edges[k]
        return self._prefix[k] + self.grid.partial_moment(self.v, self.gamma, a, t)

    def tail(self, t) -> np.ndarray:
        """∫_t^R v s^γ ds"""
        return self.total - self(t)

    def at_nodes(self) -> np.ndarray:
        return self(self.grid.nodes)


def cumulative_integral(v: Integrand, gamma: float, R: float, grid: PanelGrid | None = None) -> CumulativeIntegral:
    grid = grid or build_panel_grid(R)
    if grid.R != R:
        raise ValueError(f"Grid radius {grid.R} differs from R={R}")
    return CumulativeIntegral(v, gamma, grid)
