# tests/services/test_space_service.py

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings as hyp_settings, strategies as st

from app.schemas.spaces import Regime, SpaceParams
from app.services.function_service import RadialFunction, constant, polynomial, power
from app.services.space_service import (
    DegenerateRatioError,
    DivergentIntegralError,
    HardyConstraintError,
    RegimeError,
    boundary_bound_constant,
    boundary_ratio,
    embedding_exponent,
    hardy_admissible,
    hardy_constant,
    hardy_extremal_family,
    hardy_ratio,
    hardy_type_ratio,
    morrey_constant,
    morrey_exponent,
    morrey_ratio,
    pointwise_bound_ratio,
    regime,
    sobolev_norm,
    weighted_lq_norm,
    weights_admissible,
)


def _space(alphas, k=1, p=2.0, R=1.0, theta=0.0):
    return SpaceParams(k=k, p=p, R=R, alphas=alphas, theta=theta)


@pytest.mark.parametrize(
    "alphas, expected",
    [
        ([0.0, 1.0], Regime.ATM),
        ([0.0, 3.0], Regime.SOBOLEV),
        ([0.0, 0.5], Regime.MORREY),
    ],
)
def test_regime_by_sigma(alphas, expected):
    """σ = α_k − kp + 1 의 부호"""
    assert regime(_space(alphas)) == expected


def test_regime_higher_order():
    """k=2, p=2 에서 α_2 = 3 이 임계"""
    assert regime(_space([0.0, 0.0, 3.0], k=2)) == Regime.ATM


def test_embedding_exponent_sobolev():
    """p* = (θ+1)p/σ"""
    report = embedding_exponent(_space([0.0, 3.0], theta=1.0))
    assert report.regime == Regime.SOBOLEV
    assert report.exponent == pytest.approx(2.0)


def test_embedding_exponent_atm_and_morrey():
    """ATM 은 무한, Morrey 는 Hölder 지수"""
    atm = embedding_exponent(_space([0.0, 1.0]))
    assert atm.unbounded and math.isinf(atm.exponent)

    morrey = embedding_exponent(_space([0.0, 0.0]))
    assert morrey.regime == Regime.MORREY
    assert morrey.holder == pytest.approx(0.5)


def test_space_params_validation():
    """가중치 개수와 범위 검증"""
    with pytest.raises(ValueError):
        _space([0.0])
    with pytest.raises(ValueError):
        _space([0.0, -1.0])
    assert _space([-1.0, 1.0]).alphas[0] == -1.0
    assert _space([0.0, 1.0]).p_conj == pytest.approx(2.0)


def test_weighted_lq_norm_power():
    """∥r^s∥_{L^q_θ(0,1)} = (sq+θ+1)^{-1/q}"""
    value = weighted_lq_norm(power(0.5, 1.0), 2.0, 1.0)
    assert value == pytest.approx(3.0 ** -0.5, rel=1e-10)


def test_sobolev_norm_constant():
    """상수 c 의 X^{1,2} 노름은 c·(∫r^{α₀})^{1/2}"""
    value = sobolev_norm(constant(3.0, 1.0), _space([1.0, 1.0]))
    assert value == pytest.approx(3.0 / math.sqrt(2.0), rel=1e-10)


def test_sobolev_norm_divergent_derivative():
    """발산하는 도함수 항은 차수를 담은 DivergentIntegralError"""
    u = power(-0.5, 1.0)
    with pytest.raises(DivergentIntegralError) as excinfo:
        sobolev_norm(u, _space([0.5, 0.0]))
    assert excinfo.value.j == 1


def test_sobolev_norm_truncated():
    """하한 절단 노름은 발산 함수에도 유한"""
    u = power(-0.5, 1.0)
    value = sobolev_norm(u, _space([0.5, 0.0]), lower=0.01)
    assert math.isfinite(value) and value > 0


def test_hardy_constant():
    """p/(α−p+1) 와 적용 조건"""
    assert hardy_constant(2.0, 3.0) == pytest.approx(1.0)
    assert hardy_constant(3.0, 4.0) == pytest.approx(1.5)
    with pytest.raises(HardyConstraintError):
        hardy_constant(1.0, 3.0)
    with pytest.raises(HardyConstraintError):
        hardy_constant(2.0, 1.0)


def test_hardy_extremal_family_approaches_constant():
    """δ=0.05 극값족의 비율은 상수 바로 아래"""
    u = hardy_extremal_family(2.0, 3.0, 1.0, 0.05)
    ratio = hardy_ratio(u, 2.0, 3.0)
    assert 0.95 < ratio < hardy_constant(2.0, 3.0)


def test_hardy_ratio_degenerate_denominator():
    """u′ ≡ 0, u ≠ 0 이면 SpaceError 계열 DegenerateRatioError, 0 함수는 0"""
    with pytest.raises(DegenerateRatioError):
        hardy_ratio(constant(1.0, 1.0), 2.0, 3.0)
    assert hardy_ratio(constant(0.0, 1.0), 2.0, 3.0) == 0.0


def test_hardy_extremal_family_invalid_delta():
    """0 < δ < s 밖은 거부"""
    with pytest.raises(ValueError):
        hardy_extremal_family(2.0, 3.0, 1.0, 1.5)


@hyp_settings(max_examples=20, deadline=None)
@given(a=st.floats(-5.0, 5.0), b=st.floats(-5.0, 5.0))
def test_hardy_inequality_holds_for_boundary_vanishing(a, b):
    """u(R)=0 인 다항식은 Hardy 상수 이하"""
    assume(abs(a) + abs(b) > 1e-3)
    u = polynomial([a + b, -a - 2 * b, b], 1.0)
    ratio = hardy_ratio(u, 2.0, 3.0)
    assert ratio <= hardy_constant(2.0, 3.0) * (1 + 1e-8)


def test_hardy_admissible_sides():
    """원점 소멸, 경계 소멸 조건"""
    assert hardy_admissible(2.0, 2.0, 0.0, 0.0, "origin-vanishing")
    assert not hardy_admissible(2.0, 2.0, 0.0, 3.0, "origin-vanishing")
    assert hardy_admissible(2.0, 2.0, 3.0, 3.0, "boundary-vanishing")
    assert not hardy_admissible(2.0, 5.0, 3.0, 3.0, "boundary-vanishing")
    with pytest.raises(ValueError):
        hardy_admissible(2.0, 2.0, 0.0, 0.0, "both")


def test_pointwise_bound_rejects_morrey():
    """Morrey regime 에서는 RegimeError"""
    with pytest.raises(RegimeError):
        pointwise_bound_ratio(constant(1.0, 1.0), _space([0.0, 0.0]), n=64)


def test_pointwise_bound_sobolev_finite():
    """Sobolev regime 의 점별 비율은 유한 양수"""
    u = polynomial([1.0, 0.0, -1.0], 1.0)
    ratio = pointwise_bound_ratio(u, _space([3.0, 3.0]), n=64)
    assert 0 < ratio < math.inf


def test_morrey_exponent_and_constant():
    """γ = min(1−(α₁+1)/p, 1−1/p) 와 명시 상수"""
    assert morrey_exponent(2.0, 0.0) == pytest.approx(0.5)
    assert morrey_constant(2.0, 0.0) == pytest.approx(4.0)
    with pytest.raises(HardyConstraintError):
        morrey_constant(2.0, 1.5)


def test_morrey_ratio_bounded():
    """u(r)=r 의 Hölder 비율은 명시 상수 이하"""
    u = polynomial([0.0, 1.0], 1.0)
    ratio = morrey_ratio(u, _space([0.0, 0.0]), n=64)
    assert 0 < ratio <= 1.0
    assert ratio <= morrey_constant(2.0, 0.0)
    with pytest.raises(RegimeError):
        morrey_ratio(u, _space([0.0, 3.0]), n=64)


def test_boundary_ratio_constant():
    """상수 함수의 경계값 비율과 평균값 상수"""
    params = _space([0.0, 0.0])
    ratio = boundary_ratio(constant(1.0, 1.0), params)
    assert ratio == pytest.approx(1.0, rel=1e-10)
    assert ratio <= boundary_bound_constant(0.0, 0.0, 2.0, 1.0)


def test_hardy_type_ratio_validation():
    """j 범위와 α_k − jp + 1 > 0 조건"""
    u = polynomial([1.0, -1.0, 0.5], 1.0)
    params = _space([0.0, 0.0, 1.0], k=2)
    with pytest.raises(ValueError):
        hardy_type_ratio(u, params, 0)
    with pytest.raises(HardyConstraintError):
        hardy_type_ratio(u, params, 1)

    ok = _space([0.0, 2.0, 4.0], k=2)
    value = hardy_type_ratio(u, ok, 1)
    assert 0 < value < math.inf


def test_weights_admissible():
    """α_{j−1} ≥ α_j − p"""
    assert weights_admissible(_space([0.0, 1.0]))
    assert not weights_admissible(_space([0.0, 5.0]))


def test_weighted_norm_is_homogeneous():
    """노름의 양의 동차성"""
    u = polynomial([1.0, 2.0], 1.0)
    params = _space([1.0, 1.0])
    np.testing.assert_allclose(sobolev_norm(u.scale(3.0), params), 3.0 * sobolev_norm(u, params), rtol=1e-10)


def test_sobolev_norm_triangle_inequality():
    """무작위 3차 다항식 20 쌍에서 ∥u+v∥ ≤ ∥u∥ + ∥v∥, ∥−u∥ = ∥u∥"""
    rng = np.random.default_rng(11)
    space = _space([1.0, 2.0], p=3.0)
    for _ in range(20):
        a, b = rng.normal(size=4), rng.normal(size=4)
        u, v = polynomial(a, 1.0), polynomial(b, 1.0)
        total = sobolev_norm(polynomial(a + b, 1.0), space)
        assert total <= (sobolev_norm(u, space) + sobolev_norm(v, space)) * (1 + 1e-10)
        assert sobolev_norm(u.scale(-1.0), space) == pytest.approx(sobolev_norm(u, space), rel=1e-12)


def _log_inverse(R: float) -> RadialFunction:
    return RadialFunction((lambda r: np.log(R / r), lambda r: -1.0 / r), R, name="log-inverse")


def test_pointwise_bound_atm_log_stable_under_refinement():
    """ATM(k=1,p=2,α₁=1): log(1/r) 와 상수의 비율은 유한하고 n=2000→4000 에서 5% 이내"""
    space = _space([1.0, 1.0])
    for u in (_log_inverse(1.0), constant(1.0, 1.0)):
        coarse = pointwise_bound_ratio(u, space, n=2000)
        fine = pointwise_bound_ratio(u, space, n=4000)
        assert 0 <= coarse < math.inf
        assert fine == pytest.approx(coarse, rel=0.05, abs=1e-6)
    # 상수: 포락선이 0 이므로 1/∥1∥_{L²_1} = √2
    assert pointwise_bound_ratio(constant(1.0, 1.0), space, n=2000) == pytest.approx(math.sqrt(2.0), rel=1e-6)
