# tests/services/test_operator_service.py

import numpy as np
import pytest

from app.schemas.moser import MoserSequenceParams
from app.services import operator_service
from app.services.function_service import DerivativeOrderError, GridFunction, constant, cosine_series, power
from app.services.moser_service import moser_sequence
from app.services.operator_service import (
    GammaPoleError,
    GreenInverseError,
    GreenOperator,
    ParameterConstraintError,
    c1n_closed_form,
    chain_constants,
    coefficient_table,
    comparison_constant,
    delta_gamma,
    delta_gamma_nodal,
    gamma_ratio,
    green_inverse,
    iterated_laplacian_psi,
    mu0_navier,
    nabla_gamma_k,
    navier_base,
    product_identity,
    roundtrip_error,
)
from app.services.quadrature_service import CumulativeIntegral, build_panel_grid


def test_delta_gamma_of_power():
    """Δ_γ r^s = −s(s−1+γ) r^{s−2}, Δ_3² r⁴ = 192"""
    u = power(4.0, 1.0)
    r = np.array([0.2, 0.6, 1.0])
    once = delta_gamma(u, 3.0)
    np.testing.assert_allclose(once(r), -24.0 * r ** 2)
    np.testing.assert_allclose(delta_gamma(once, 3.0)(r), 192.0)


def test_delta_gamma_derivative_chain():
    """Δ_γ 결과의 도함수도 해석적으로 일치"""
    once = delta_gamma(power(4.0, 1.0, order=4), 2.0)
    r = np.array([0.3, 0.9])
    # −(12 + 8) r² → −40 r
    np.testing.assert_allclose(once.evaluate(r, 1), -40.0 * r)


def test_delta_gamma_needs_two_derivatives():
    """도함수 차수 부족"""
    with pytest.raises(DerivativeOrderError):
        delta_gamma(constant(1.0, 1.0, order=1), 3.0)


def test_nabla_gamma_k_parity():
    """짝수는 Δ^{k/2}, 홀수는 (Δ^{(k−1)/2})′"""
    u = power(4.0, 1.0)
    r = np.array([0.5])
    np.testing.assert_allclose(nabla_gamma_k(u, 3.0, 2)(r), -24.0 * r ** 2)
    np.testing.assert_allclose(nabla_gamma_k(u, 3.0, 3)(r), -48.0 * r)
    np.testing.assert_allclose(nabla_gamma_k(u, 3.0, 0)(r), r ** 4)
    with pytest.raises(ValueError):
        nabla_gamma_k(u, 3.0, -1)


@pytest.mark.parametrize("gamma", [0.5, 2.0, 5.0])
@pytest.mark.parametrize("R", [0.5, 1.0, 2.0])
def test_green_inverse_of_constant(gamma, R):
    """G_γ(1) = (R²−r²)/(2(γ+1))"""
    u = green_inverse(lambda r: np.ones_like(r), gamma, R)
    r = np.array([1e-4, 0.25, 0.5, 0.9]) * R
    np.testing.assert_allclose(u(r), (R ** 2 - r ** 2) / (2 * (gamma + 1)), rtol=1e-10, atol=1e-13)
    np.testing.assert_allclose(u.evaluate(r, 1), -r / (gamma + 1), rtol=1e-10)
    np.testing.assert_allclose(u.evaluate(r, 2), -1.0 / (gamma + 1), rtol=1e-10)
    assert float(u(np.array([R]))[0]) == 0.0


def test_green_inverse_of_linear_source():
    """G_2(r) = (1−r³)/12"""
    u = green_inverse(power(1.0, 1.0, order=2), 2.0, 1.0)
    r = np.array([0.1, 0.5, 0.8])
    np.testing.assert_allclose(u(r), (1 - r ** 3) / 12, rtol=1e-10)
    np.testing.assert_allclose(delta_gamma(u, 2.0)(r), r, rtol=1e-9)


def test_green_inverse_errors():
    """원점 발산과 반지름 불일치"""
    one = lambda r: np.ones_like(r)
    with pytest.raises(GreenInverseError):
        green_inverse(one, -1.5, 1.0)
    with pytest.raises(ValueError):
        green_inverse(one, 2.0, 1.0, grid=build_panel_grid(2.0))
    with pytest.raises(TypeError):
        green_inverse(3.0, 2.0, 1.0)


def _random_source(seed: int, terms: int = 6):
    rng = np.random.default_rng(seed)
    coeffs = rng.normal(size=terms) / (1.0 + np.arange(terms)) ** 2
    return cosine_series(coeffs, 1.0, order=2)


@pytest.mark.parametrize("gamma", [2.0, 3.0, 5.0])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_green_inverse_roundtrip_on_node_values(gamma, seed):
    """무작위 코사인 급수 v: 노드 값 u 의 격자 미분으로 Δ_γ u = v"""
    grid = build_panel_grid(1.0, count=40, floor=1e-4)
    v = _random_source(seed)
    u = green_inverse(v, gamma, 1.0, grid)
    x = grid.nodes
    assert roundtrip_error(GridFunction(grid, u(x)), v(x), gamma) < 1e-6
    assert u(np.array([1.0]))[0] == 0.0


def test_roundtrip_error_detects_wrong_values():
    """값이 틀린 u 는 오차 1 근처"""
    grid = build_panel_grid(1.0, count=40, floor=1e-4)
    v = _random_source(7)
    x = grid.nodes
    u = green_inverse(v, 3.0, 1.0, grid)
    assert roundtrip_error(GridFunction(grid, 2.0 * u(x)), v(x), 3.0) == pytest.approx(1.0, rel=1e-4)
    bumped = u(x) + 1e-3 * x ** 2
    assert roundtrip_error(GridFunction(grid, bumped), v(x), 3.0) > 1e-4


def test_roundtrip_error_detects_wrong_inner_integral(monkeypatch):
    """내부 적분이 두 배가 되면 해석적 도함수 경로와 달리 노드 검사는 실패"""
    class Doubled(CumulativeIntegral):
        def __call__(self, t):
            return 2.0 * super().__call__(t)

    monkeypatch.setattr(operator_service, "CumulativeIntegral", Doubled)
    grid = build_panel_grid(1.0, count=40, floor=1e-4)
    v = _random_source(3)
    u = green_inverse(v, 2.0, 1.0, grid)
    x = grid.nodes
    assert roundtrip_error(GridFunction(grid, u(x)), v(x), 2.0) > 0.5


def test_delta_gamma_nodal_of_power():
    """노드 미분 Δ_γ r⁴ = −4(3+γ) r²"""
    grid = build_panel_grid(1.0, count=20, floor=1e-3)
    x = grid.nodes
    lap = delta_gamma_nodal(GridFunction(grid, x ** 4), 3.0)
    np.testing.assert_allclose(lap.values, -24.0 * x ** 2, rtol=1e-6, atol=1e-9)


def test_roundtrip_error_rejects_zero_source():
    """v ≡ 0 이면 상대 오차가 정의되지 않음"""
    grid = build_panel_grid(1.0, count=8)
    with pytest.raises(GreenInverseError):
        roundtrip_error(GridFunction(grid, np.zeros(grid.n)), np.zeros(grid.n), 2.0)


def test_green_operator_matches_closed_form():
    """노드 행렬 형태의 G_γ(1)"""
    grid = build_panel_grid(1.0, count=30)
    op = GreenOperator(grid, 3.0)
    ones = np.ones(grid.n)
    expected = (1 - grid.nodes ** 2) / 8
    np.testing.assert_allclose(op.apply(ones), expected, atol=1e-12)
    np.testing.assert_allclose(op.matrix() @ ones, expected, atol=1e-12)
    np.testing.assert_allclose(op.first_derivative(ones), -grid.nodes / 4, atol=1e-12)
    np.testing.assert_allclose(op.second_derivative(ones), -0.25, atol=1e-10)
    assert float(op.origin_row() @ ones) == pytest.approx(0.125, rel=1e-10)
    with pytest.raises(ParameterConstraintError):
        GreenOperator(grid, -1.0)


def test_gamma_ratio_and_poles():
    """Γ 비율과 극점 검출"""
    assert gamma_ratio([5.0], [3.0]) == pytest.approx(12.0)
    assert gamma_ratio([-0.5], [0.5]) == pytest.approx(-2.0)
    with pytest.raises(GammaPoleError):
        gamma_ratio([0.0], [1.0])
    with pytest.raises(GammaPoleError):
        gamma_ratio([1.0], [-2.0])


def test_coefficient_table_first_levels():
    """c₁₁ = −(γ−1), c₂₁ = −1, c₁₂(γ=5) = −16"""
    table = coefficient_table(5.0, 2)
    assert table.c(1, 1) == pytest.approx(-4.0)
    assert table.c(2, 1) == pytest.approx(-1.0)
    assert table.c(1, 2) == pytest.approx(-16.0)
    assert c1n_closed_form(5.0, 2) == pytest.approx(-16.0)
    with pytest.raises(IndexError):
        table.c(5, 2)


@pytest.mark.parametrize("gamma", [2.5, 3.5, 5.0, 5.5, 7.25, 7.3])
def test_coefficient_table_matches_closed_form(gamma):
    """c_{1n} 점화식과 Γ 닫힌 꼴의 일치"""
    table = coefficient_table(gamma, 6)
    assert table.consistent
    assert [len(level) for level in table.levels] == [2, 4, 6, 8, 10, 12]


def test_coefficient_table_operator_convention():
    """operator 규약은 부호만 반대"""
    stated = coefficient_table(3.5, 4)
    operator = coefficient_table(3.5, 4, convention="operator")
    assert operator.consistent
    assert operator.c(1, 1) == pytest.approx(2.5)
    assert operator.c(1, 3) == pytest.approx(-stated.c(1, 3))
    with pytest.raises(ValueError):
        coefficient_table(3.5, 2, convention="other")
    with pytest.raises(ValueError):
        coefficient_table(3.5, 0)


def test_coefficient_table_denominator_pole_is_zero():
    """분모 Γ 극점에서 닫힌 꼴은 0, 점화식 c_{1n} 도 정확히 0"""
    table = coefficient_table(3.0, 2)
    assert table.closed_form[1] == 0.0
    assert table.c(1, 2) == 0.0
    assert table.consistent

    table = coefficient_table(5.0, 6)
    assert table.consistent
    assert table.closed_form[:2] == [pytest.approx(-4.0), pytest.approx(-16.0)]
    assert all(cf == 0.0 for cf in table.closed_form[2:])
    assert all(table.c(1, n) == 0.0 for n in range(3, 7))


def test_coefficient_table_numerator_pole_flagged():
    """분자 Γ 극점(γ = −1)이면 점화식 값을 유지하고 불일치로 표시"""
    table = coefficient_table(-1.0, 2)
    assert table.closed_form == [None, None]
    assert not table.consistent
    assert table.c(1, 1) == pytest.approx(2.0)
    with pytest.raises(GammaPoleError):
        c1n_closed_form(-1.0, 1)


@pytest.mark.parametrize("n", [1, 2])
def test_iterated_laplacian_psi_matches_direct(n):
    """Δ_γ^n ψ 계수 표현과 직접 미분의 일치"""
    params = MoserSequenceParams(m=100.0, eps=0.05, k=2, R=1.0)
    psi = moser_sequence(params, order=2 * n)
    direct = psi
    for _ in range(n):
        direct = delta_gamma(direct, 3.5)
    r = np.array([0.011, 0.05, 0.3, 0.7, 0.9])
    np.testing.assert_allclose(iterated_laplacian_psi(params, 3.5, n)(r), direct(r), rtol=1e-8, atol=1e-8)


def test_iterated_laplacian_psi_degree_limit():
    """2n 이 프로파일 차수를 넘으면 DerivativeOrderError"""
    params = MoserSequenceParams(m=100.0, eps=0.05, k=1, R=1.0)
    with pytest.raises(DerivativeOrderError):
        iterated_laplacian_psi(params, 3.0, 3)


def test_mu0_navier_values():
    """k=1 은 θ+1, k=2 (γ=3, p=2) 는 4, k=3 (γ=3, p=2) 는 16"""
    assert mu0_navier(1.5, 3.0, 2.0, 1) == pytest.approx(2.5)
    assert mu0_navier(0.0, 3.0, 2.0, 2) == pytest.approx(4.0)
    assert mu0_navier(0.0, 3.0, 2.0, 3) == pytest.approx(16.0)
    assert navier_base(3.0, 3) == pytest.approx(4.0)


def test_mu0_navier_constraints():
    """γ, p, θ 제약 위반"""
    with pytest.raises(ParameterConstraintError):
        mu0_navier(0.0, 1.0, 2.0, 2)
    with pytest.raises(ParameterConstraintError):
        mu0_navier(0.0, 3.0, 1.0, 2)
    with pytest.raises(ParameterConstraintError):
        mu0_navier(-1.0, 3.0, 2.0, 2)


def test_comparison_constant():
    """C_{7,2} = 1/8"""
    assert comparison_constant(7.0, 2.0) == pytest.approx(0.125)
    with pytest.raises(ParameterConstraintError):
        comparison_constant(3.0, 2.0)


def test_chain_constants():
    """사슬 상수와 적용 조건"""
    assert chain_constants(2.0, 7.0, 5.0, 2) == pytest.approx([0.25])
    assert chain_constants(2.0, 7.0, 5.0, 1) == []
    with pytest.raises(ParameterConstraintError):
        chain_constants(2.0, 2.0, 5.0, 2)


@pytest.mark.parametrize("k, gamma, p", [(4, 5.0, 2.0), (4, 7.0, 2.0), (6, 9.5, 2.0), (5, 7.0, 3.0)])
def test_product_identity(k, gamma, p):
    """C_i 사슬 곱과 Γ 공식의 일치"""
    chain, base = product_identity(k, gamma, p)
    assert chain == pytest.approx(base, rel=1e-10)


def test_product_identity_known_value():
    """k=4, γ=5, p=2 에서 16"""
    chain, base = product_identity(4, 5.0, 2.0)
    assert chain == pytest.approx(16.0)
    assert base == pytest.approx(16.0)
    with pytest.raises(ParameterConstraintError):
        product_identity(1, 5.0, 2.0)
