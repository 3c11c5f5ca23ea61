# tests/services/test_moser_service.py

import math

import numpy as np
import pytest
from numpy.polynomial import Polynomial

from app.schemas.moser import MoserSequenceParams, OptimizerConfig
from app.schemas.spaces import SpaceParams
from app.services.corpus_service import build_corpus
from app.services.function_service import constant, polynomial
from app.services.moser_service import (
    KAMembershipError,
    LuxemburgBracketError,
    PhiConstructionError,
    blowup_table,
    c1_constant,
    check_phi,
    composite_norm,
    conjugate,
    critical_k1_sweep,
    extend_ramp,
    halfline_identity,
    halfline_transform,
    in_k_a,
    luxemburg_norm,
    maximize_lmu,
    moser_functional,
    moser_sequence,
    mu0,
    profile_derivative,
    profile_phi,
    sequence_norm_report,
)
from app.services.space_service import RegimeError, sobolev_norm


def _atm_space(k=1, p=2.0, theta=0.0, R=1.0):
    return SpaceParams(k=k, p=p, R=R, alphas=[k * p - 1] * (k + 1), theta=theta)


def test_mu0_values():
    """μ₀ = (θ+1)[(k−1)!]^{p′}"""
    assert conjugate(3.0) == pytest.approx(1.5)
    assert mu0(0.0, 1, 2.0) == pytest.approx(1.0)
    assert mu0(1.0, 3, 2.0) == pytest.approx(8.0)
    with pytest.raises(ValueError):
        mu0(-1.0, 1, 2.0)
    with pytest.raises(ValueError):
        mu0(0.0, 1, 1.0)


@pytest.mark.parametrize(
    "k, coefficients",
    [
        (1, [0, 0, 0, 3, -2]),
        (2, [0, 0, 0, 0, 4, -3]),
        (3, [0, 0, 0, 0, 0, 15, -24, 10]),
    ],
)
def test_profile_phi_minimal_degree(k, coefficients):
    """최소 차수 컷오프 프로파일"""
    phi = profile_phi(k)
    np.testing.assert_allclose(phi.coef, coefficients, atol=1e-10)
    check_phi(phi, k)


def test_check_phi_rejects_bad_profiles():
    """경계 조건이나 단조성 위반"""
    with pytest.raises(PhiConstructionError):
        check_phi(Polynomial([0, 1.0]), 1)
    with pytest.raises(PhiConstructionError):
        check_phi(Polynomial([0, 0, 0, 2.0, -1.0]), 1)


def test_profile_derivative_pieces():
    """H 는 [ε,1−ε] 에서 t, 1 이후 1"""
    phi = profile_phi(1)
    H = profile_derivative(phi, 0.05, 0)
    dH = profile_derivative(phi, 0.05, 1)
    t = np.array([0.0, 0.05, 0.3, 0.95, 1.0, 1.5])
    np.testing.assert_allclose(H(t), [0.0, 0.05, 0.3, 0.95, 1.0, 1.0], atol=1e-14)
    np.testing.assert_allclose(dH(np.array([0.3, 1.5])), [1.0, 0.0])


def test_moser_sequence_shape():
    """ψ(R)=0, r ≤ R/m 에서 1, 중간에서 log(R/r)/log m"""
    params = MoserSequenceParams(m=100.0, eps=0.05, k=1, R=2.0)
    psi = moser_sequence(params)
    np.testing.assert_allclose(psi(np.array([2.0, 0.01, 0.001])), [0.0, 1.0, 1.0], atol=1e-14)
    r = np.array([0.5])
    np.testing.assert_allclose(psi(r), np.log(2.0 / r) / np.log(100.0))
    np.testing.assert_allclose(psi.evaluate(r, 1), -1.0 / (r * np.log(100.0)))


def test_moser_functional_of_zero():
    """μ 와 무관하게 ∫ r^θ dr"""
    value = moser_functional(constant(0.0, 2.0), 3.0, 2.0, 1.0)
    assert value == pytest.approx(2.0, rel=1e-10)
    with pytest.raises(ValueError):
        moser_functional(constant(0.0, 1.0), -1.0, 2.0, 0.0)


def test_moser_functional_monotone_and_even():
    """μ 와 |u| 에 대해 비감소, −u 와 같은 값"""
    u = polynomial([1.0, 0.0, -1.0], 1.0)
    values = [moser_functional(u, mu, 2.0, 1.0) for mu in (0.0, 0.5, 1.0, 1.5)]
    assert all(b >= a for a, b in zip(values, values[1:]))
    scaled = [moser_functional(u.scale(c), 1.0, 2.0, 1.0) for c in (0.25, 0.5, 1.0, 1.2)]
    assert all(b >= a for a, b in zip(scaled, scaled[1:]))
    assert moser_functional(u.scale(-1.0), 1.0, 2.0, 1.0) == pytest.approx(values[2], rel=1e-12)


def test_sequence_norm_report_within_bound():
    """(log m)^{p−1}∥ψ∥^p 는 1 이상 상한 이하"""
    params = MoserSequenceParams(m=math.exp(10.0), eps=0.05, k=1, R=1.0)
    report = sequence_norm_report(params, _atm_space())
    assert 1.0 <= report.rescaled <= report.bound
    assert report.within_bound
    assert report.lower_order < report.norm_p


def test_sequence_norm_report_requires_atm():
    """ATM regime 이 아니면 RegimeError"""
    params = MoserSequenceParams(m=100.0, k=1)
    space = SpaceParams(k=1, p=2.0, R=1.0, alphas=[1.0, 3.0])
    with pytest.raises(RegimeError):
        sequence_norm_report(params, space)


def test_blowup_table_mu_zero_is_volume():
    """μ=0 이면 함수형 값은 부피 R^{θ+1}/(θ+1)"""
    table = blowup_table(0.0, _atm_space(theta=1.0), m_list=[1e2, 1e3])
    assert table.mu0 == pytest.approx(2.0)
    for row in table.rows:
        assert row.value == pytest.approx(0.5, rel=1e-8)
        assert not row.capped


def test_blowup_table_lower_bound():
    """함수형 값은 ∫_0^{R/m} 하한 이상"""
    table = blowup_table(0.5, _atm_space(), m_list=[1e2, 1e3])
    for row in table.rows:
        assert row.value >= row.lower_bound
    assert table.empirical_exponent is not None


def test_maximize_lmu_improves_on_constant():
    """최대값은 정규화된 상수의 값 e^{μ·2}/2 이상, 노름 1"""
    opt = OptimizerConfig(max_iters=500, tol=1e-8, seed=0, restarts=2, nodes=64)
    report = maximize_lmu(0.5, _atm_space(), opt)
    assert report.value >= math.exp(1.0) / 2 * (1 - 1e-9)
    assert report.norm == pytest.approx(1.0, rel=1e-9)
    assert len(report.restart_values) == 2


def test_blowup_growth_above_and_below_mu0():
    """μ₀=1: μ=1.5 에서 m=1e2→1e6 성장 ≥ 10, μ=0.5 에서 ≤ 2"""
    m_list = [1e2, 1e4, 1e6]
    above = blowup_table(1.5, _atm_space(), m_list=m_list)
    below = blowup_table(0.5, _atm_space(), m_list=m_list)
    assert above.mu0 == pytest.approx(1.0)
    assert above.rows[-1].value / above.rows[0].value >= 10
    assert not any(row.capped for row in below.rows)
    assert below.rows[-1].value / below.rows[0].value <= 2
    assert all(row.value >= 1.0 for row in below.rows)


def test_maximize_lmu_three_restarts_agree():
    """restart 3 회의 최대값이 상대 1e−3 안, 최대점의 노름 1±1e−6"""
    opt = OptimizerConfig(max_iters=5000, tol=1e-10, seed=0, restarts=3, nodes=64)
    report = maximize_lmu(0.5, _atm_space(), opt)
    values = report.restart_values
    assert len(values) == 3
    assert (max(values) - min(values)) / max(values) <= 1e-3
    assert report.value == max(values)
    assert abs(report.norm - 1.0) <= 1e-6


def test_maximize_lmu_rejects_supercritical_mu():
    """μ ≥ μ₀ 거부"""
    with pytest.raises(ValueError):
        maximize_lmu(1.0, _atm_space())


def test_halfline_identity_is_change_of_variables():
    """절단 양변의 일치"""
    u = polynomial([1.0, -1.0], 1.0)
    left, right = halfline_identity(u, 0.5, 2.0, T=6.0)
    assert left == pytest.approx(right, rel=1e-8)


def test_composite_norm_matches_sobolev_norm():
    """반직선 노름 = X^{1,p}_R(α₀, p−1) 노름"""
    u = build_corpus(1.0)["quarter_cosine"]
    w = halfline_transform(u, 0.0, 2.0)
    space = SpaceParams(k=1, p=2.0, R=1.0, alphas=[0.0, 1.0], theta=0.0)
    assert composite_norm(w, 0.0, 2.0) == pytest.approx(sobolev_norm(u, space), rel=1e-8)


def test_c1_constant():
    """C₁(A=2, θ=0, α₀=0, p=2, R=1) = 4"""
    assert c1_constant(2.0, 0.0, 0.0, 2.0, 1.0) == pytest.approx(4.0)


def test_extend_ramp_membership():
    """K_A 위반과 음수 값 거부"""
    increasing = halfline_transform(polynomial([0.0, 1.0], 1.0), 0.0, 2.0)
    with pytest.raises(KAMembershipError):
        extend_ramp(increasing, 2.0, 0.0, 0.0, 2.0, 1.0)

    negative = halfline_transform(polynomial([-0.5, 1.0], 1.0), 0.0, 2.0)
    with pytest.raises(KAMembershipError):
        extend_ramp(negative, 2.0, 0.0, 0.0, 2.0, 1.0)


def test_extend_ramp_energy():
    """상수 w 의 ramp 에너지는 w(0)^p/C₁^{p−1}"""
    w = halfline_transform(constant(1.0, 1.0), 0.0, 2.0)
    ramp = extend_ramp(w, 2.0, 0.0, 0.0, 2.0, 1.0)
    assert ramp.C1 == pytest.approx(4.0)
    assert ramp.ramp_energy == pytest.approx(0.25)
    assert ramp.energy() == pytest.approx(0.25, abs=1e-12)
    np.testing.assert_allclose(ramp(np.array([0.0, 2.0, 10.0])), [0.0, 0.5, 1.0])


def test_luxemburg_norm_of_constant():
    """Φ̂(t)=e^{t²}−1 에서 상수 c 의 노름은 c/√ln2"""
    value = luxemburg_norm(constant(0.7, 1.0), 0.0, 2.0)
    assert value == pytest.approx(0.7 / math.sqrt(math.log(2.0)), rel=1e-8)
    assert luxemburg_norm(constant(0.0, 1.0), 0.0, 2.0) == 0.0


def test_luxemburg_norm_is_homogeneous():
    """∥2u∥ = 2∥u∥, ∥−u∥ = ∥u∥"""
    u = polynomial([1.0, -1.0], 1.0)
    base = luxemburg_norm(u, 1.0, 2.0)
    assert base > 0
    assert luxemburg_norm(u.scale(2.0), 1.0, 2.0) == pytest.approx(2.0 * base, rel=1e-8)
    assert luxemburg_norm(u.scale(-1.0), 1.0, 2.0) == pytest.approx(base, rel=1e-12)


def test_luxemburg_norm_literal():
    """literal Φ 는 부피가 1 보다 크면 구간이 없음"""
    with pytest.raises(LuxemburgBracketError):
        luxemburg_norm(constant(0.7, 2.0), 0.0, 2.0, literal=True)
    value = luxemburg_norm(constant(0.7, 0.5), 0.0, 2.0, literal=True)
    assert value == pytest.approx(0.7 / math.sqrt(math.log(2.0)), rel=1e-8)


def test_in_k_a():
    """u(R) ≤ A u(r)"""
    assert in_k_a(polynomial([1.0, -1.0], 1.0), 1.0)
    assert not in_k_a(polynomial([0.0, 1.0], 1.0), 2.0)


def test_critical_k1_sweep_rows():
    """코퍼스 스윕: K_A 위반은 건너뛰고 상수는 e"""
    corpus = build_corpus(1.0)
    rows = critical_k1_sweep(2.0, 0.0, 0.0, 2.0, 1.0, corpus)
    by_name = {row.name: row for row in rows}
    assert list(by_name) == list(corpus)
    assert not by_name["monomial_2"].admissible
    assert by_name["monomial_2"].reason == "K_A"
    assert by_name["constant"].admissible
    assert by_name["constant"].value == pytest.approx(math.e, rel=1e-9)
    with pytest.raises(ValueError):
        critical_k1_sweep(2.0, 0.0, 0.0, 1.5, 1.0, corpus)
