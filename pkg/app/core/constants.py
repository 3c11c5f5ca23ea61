# app/core/constants.py

# 실험 이름 (CLI --experiment, HTTP 경로)
EXPERIMENTS = [
    "regimes",
    "norms",
    "verify-hardy",
    "verify-embedding-sharpness",
    "moser-norms",
    "blowup",
    "maximize",
    "critical-k1",
    "navier-constants",
    "coefficients",
    "green-roundtrip",
    "solve-power",
    "solve-exp",
]

# 확률적 실험 (seed 필수)
STOCHASTIC_EXPERIMENTS = {"maximize", "green-roundtrip", "solve-exp"}

# 종료 코드
EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2

# Luxemburg 노름 이분법 구간
LUXEMBURG_BRACKET = (1e-9, 1e9)
LUXEMBURG_MAX_BISECTIONS = 200

# 원점 근처 사다리 연장 하한
QUAD_RADIUS_FLOOR = 1e-280

# 블로업 실험 기본 m 스윕 (로그 스케일)
DEFAULT_M_LIST = [1e2, 1e3, 1e4, 1e5, 1e6]

# φ 프로파일 차수 상한 (최소 차수 대비 추가 차수)
PHI_EXTRA_DEGREE_CAP = 8
PHI_SCAN_POINTS = 1001

# 끝점 외삽에서 신뢰 가능한 최소 반지름 (R 배수)
RELIABLE_NODE_FLOOR = 1e-4

# 잔차 계산에서 제외하는 양 끝 노드 수
RESIDUAL_TRIM = 2

# 테스트 코퍼스 버전
CORPUS_VERSION = "v1"

# PDE 카탈로그 이름
COEFFICIENT_CATALOG = ["one", "linear", "quadratic_bump"]
NONLINEARITY_CATALOG = ["linear", "exp_quadratic", "sinh"]

# m_Δ 추정 기본 노드 수
M_DELTA_NODES = 1000

# 약형식 검사 시험함수 개수
WEAK_FORM_TESTS = 10
