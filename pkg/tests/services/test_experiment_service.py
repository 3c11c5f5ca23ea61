# tests/services/test_experiment_service.py

import math

import pytest
from pydantic import ValidationError

from app.core.constants import EXPERIMENTS, STOCHASTIC_EXPERIMENTS
from app.schemas.experiments import ExperimentConfig, ExperimentSummary, format_value
from app.services.experiment_service import (
    EXPERIMENT_INFO,
    EXPERIMENT_MAP,
    ConfigError,
    build_params,
    get_all_experiments,
    run_experiment,
    to_frame,
)
from app.services.pde_service import StagnationError
from app.services.space_service import DegenerateRatioError


NAVIER_PARAMS = {
    "k_list": "1, 2",
    "theta_list": "0, 1",
    "gamma_list": "3, 5.5",
    "p_list": "2",
    "product_k": "4",
    "product_gammas": "7",
}


def test_catalog_is_complete():
    """모든 실험에 실행 함수와 메타데이터가 있음"""
    assert set(EXPERIMENT_MAP) == set(EXPERIMENTS)
    assert set(EXPERIMENT_INFO) == set(EXPERIMENTS)
    catalog = get_all_experiments()
    assert list(catalog) == list(EXPERIMENTS)
    for name, info in catalog.items():
        assert info["stochastic"] == (name in STOCHASTIC_EXPERIMENTS)


def test_run_navier_constants_passes():
    """μ₀ 공식과 Γ 곱 항등식이 모두 허용 오차 안"""
    config = ExperimentConfig(experiment="navier-constants", params=NAVIER_PARAMS)
    summary, frame = run_experiment(config)
    assert summary.passed
    assert summary.status == "ok"
    assert summary.failures == []
    assert summary.rows == len(frame) == 2 * 2 * 2 + 1
    assert summary.metrics["max_error"] <= 1e-10
    assert list(frame["kind"]) == sorted(frame["kind"])


def test_run_embedding_sharpness_passes():
    """L^q_1 노름^q 는 log(R/a) 기울기 1 로 발산, X-노름은 수렴"""
    summary, frame = run_experiment(ExperimentConfig(experiment="verify-embedding-sharpness"))
    assert summary.passed, summary.failures
    assert summary.rows == 2 * 4
    slopes = frame["log_slope"].dropna()
    assert len(slopes) == 2 * 3
    assert all(abs(s - 1.0) <= 0.01 for s in slopes)


def test_run_blowup_passes():
    """μ=1.5 성장 ≥ 10, μ=0.5 성장 ≤ 2"""
    params = {"mu_list": "0.5, 1.5", "m_list": "1e2, 1e4, 1e6"}
    summary, _ = run_experiment(ExperimentConfig(experiment="blowup", params=params))
    assert summary.passed, summary.failures
    assert summary.metrics["mu=1.5.growth"] >= 10
    assert summary.metrics["mu=0.5.growth"] <= 2
    assert summary.metrics["mu0"] == pytest.approx(1.0)


def test_unknown_parameter_is_config_error():
    """알 수 없는 키는 ConfigError, 메시지에 키 이름"""
    config = ExperimentConfig(experiment="navier-constants", params={"bogus": 1})
    with pytest.raises(ConfigError, match="bogus"):
        run_experiment(config)


def test_invalid_parameter_value_is_config_error():
    """잘못된 값도 ConfigError"""
    config = ExperimentConfig(experiment="coefficients", params={"convention": "other"})
    with pytest.raises(ConfigError):
        build_params(config)


def test_experiment_config_validation():
    """알 수 없는 실험, 확률적 실험의 seed 누락"""
    with pytest.raises(ValidationError):
        ExperimentConfig(experiment="bogus")
    with pytest.raises(ValidationError):
        ExperimentConfig(experiment="maximize")
    assert ExperimentConfig(experiment="maximize", seed=3).seed == 3


def test_cli_overrides_tol_and_grid():
    """tol 과 grid_n 덮어쓰기, n 이 없는 모델은 grid_n 무시"""
    params = build_params(ExperimentConfig(experiment="green-roundtrip", seed=0, tol=1e-4, grid_n=128))
    assert params.tol == 1e-4
    assert params.n == 128
    params = build_params(ExperimentConfig(experiment="navier-constants", grid_n=128))
    assert not hasattr(params, "n")


def test_numerical_failure_is_recorded(monkeypatch):
    """수치 오류는 예외 대신 요약의 실패 코드"""
    def stalls(params, config):
        raise StagnationError("T(u) vanished")

    monkeypatch.setitem(EXPERIMENT_MAP, "navier-constants", stalls)
    summary, frame = run_experiment(ExperimentConfig(experiment="navier-constants"))
    assert not summary.passed
    assert summary.status == "numerical-failure"
    assert summary.failures == ["StagnationError"]
    assert list(frame["failure"]) == ["StagnationError"]


def test_value_error_inside_experiment_is_numerical_failure(monkeypatch):
    """파라미터 검증을 통과한 뒤의 ValueError 는 수치 실패, 종료 코드 1 쪽"""
    def breaks(params, config):
        raise ValueError("math domain error")

    monkeypatch.setitem(EXPERIMENT_MAP, "navier-constants", breaks)
    summary, frame = run_experiment(ExperimentConfig(experiment="navier-constants"))
    assert summary.status == "numerical-failure"
    assert summary.failures == ["ValueError"]
    assert summary.metrics["message"] == "math domain error"


def test_zero_division_inside_experiment_is_numerical_failure(monkeypatch):
    """ArithmeticError 계열도 수치 실패로 기록"""
    def divides(params, config):
        return 1.0 / 0.0

    monkeypatch.setitem(EXPERIMENT_MAP, "navier-constants", divides)
    summary, _ = run_experiment(ExperimentConfig(experiment="navier-constants"))
    assert not summary.passed
    assert summary.failures == ["ZeroDivisionError"]


def test_degenerate_hardy_ratio_is_numerical_failure(monkeypatch):
    """hardy_ratio 의 0 분모는 SpaceError 로 요약에 기록"""
    def degenerate(params, config):
        raise DegenerateRatioError("hardy_ratio denominator vanishes for a nonzero function")

    monkeypatch.setitem(EXPERIMENT_MAP, "verify-hardy", degenerate)
    summary, _ = run_experiment(ExperimentConfig(experiment="verify-hardy"))
    assert summary.status == "numerical-failure"
    assert summary.failures == ["DegenerateRatioError"]


@pytest.mark.parametrize("experiment, params", [
    ("solve-power", {"alpha": "4", "theta": "3.5", "p": "10"}),
    ("solve-power", {"alpha": "5", "theta": "3"}),
    ("solve-exp", {"theta": "3", "mu": "4.5"}),
    ("regimes", {"alpha_top": "0, -2"}),
    ("norms", {"alphas": "0, -1.5"}),
    ("blowup", {"alphas": "1, -3"}),
    ("moser-norms", {"log_m": "0, 10"}),
])
def test_problem_window_is_checked_before_running(monkeypatch, experiment, params):
    """파생 모델(PowerProblem, ExpProblem, SpaceParams)의 조건은 실행 전에 ConfigError"""
    def never(params, config):
        raise AssertionError("experiment body must not run")

    monkeypatch.setitem(EXPERIMENT_MAP, experiment, never)
    config = ExperimentConfig(experiment=experiment, params=params, seed=0)
    with pytest.raises(ConfigError):
        build_params(config)
    with pytest.raises(ConfigError):
        run_experiment(config)


def test_to_frame_sorts_by_catalog_keys():
    """sort_by 순서로 안정 정렬"""
    rows = [
        {"kind": "product", "k": 4, "theta": 0.0, "gamma": 7.0, "p": 2.0},
        {"kind": "mu0", "k": 2, "theta": 0.0, "gamma": 3.0, "p": 2.0},
        {"kind": "mu0", "k": 1, "theta": 1.0, "gamma": 3.0, "p": 2.0},
    ]
    frame = to_frame(rows, "navier-constants")
    assert list(frame["k"]) == [1, 2, 4]
    assert to_frame([], "navier-constants").empty


def test_summary_lines_are_sorted():
    """key = value 줄, 키 정렬, 불리언 소문자"""
    summary = ExperimentSummary(
        experiment="blowup", passed=False, status="check-failed",
        failures=["growth@mu=1.5"], metrics={"slope": 0.5, "bad": math.nan}, rows=4, seed=None,
    )
    lines = summary.as_lines()
    assert lines == sorted(lines)
    assert "passed = false" in lines
    assert "failures = growth@mu=1.5" in lines
    assert "metric.bad = nan" in lines
    assert "seed = none" in lines
    assert format_value(1.0 / 3.0) == "0.333333333333"
