# tests/routers/test_experiments.py

from fastapi.testclient import TestClient

from app.main import app

client = TestClient(app)

NAVIER_PARAMS = {
    "k_list": [1, 2],
    "theta_list": [0.0],
    "gamma_list": [3.0],
    "p_list": [2.0],
    "product_k": [4],
    "product_gammas": [7.0],
}


def test_health():
    """헬스 체크"""
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"


def test_list_experiments():
    """실험 목록과 확률적 여부"""
    response = client.get("/api/v1/experiments/")
    assert response.status_code == 200
    catalog = response.json()
    assert catalog["maximize"]["stochastic"] is True
    assert catalog["navier-constants"]["stochastic"] is False
    assert catalog["navier-constants"]["category"] == "operators"


def test_run_navier_constants():
    """요약과 표 행 반환"""
    response = client.post("/api/v1/experiments/navier-constants", json={"params": NAVIER_PARAMS})
    assert response.status_code == 200
    body = response.json()
    assert body["summary"]["passed"] is True
    assert body["summary"]["rows"] == len(body["rows"]) == 3
    assert {row["kind"] for row in body["rows"]} == {"mu0", "product"}


def test_unknown_experiment_is_bad_request():
    """알 수 없는 실험은 400"""
    response = client.post("/api/v1/experiments/bogus", json={})
    assert response.status_code == 400


def test_unknown_parameter_is_bad_request():
    """알 수 없는 파라미터 키는 400, 메시지에 키 이름"""
    response = client.post("/api/v1/experiments/navier-constants", json={"params": {"bogus": 1}})
    assert response.status_code == 400
    assert "bogus" in response.json()["detail"]


def test_stochastic_experiment_without_seed_is_bad_request():
    """확률적 실험은 seed 필수"""
    response = client.post("/api/v1/experiments/maximize", json={"params": {}})
    assert response.status_code == 400
