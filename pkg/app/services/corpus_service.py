# app/services/corpus_service.py

import logging
import math
from typing import Callable, Dict, List

import numpy as np
from numpy.polynomial import hermite

from app.core.constants import CORPUS_VERSION
from app.schemas.moser import MoserSequenceParams
from app.services.function_service import (
    RadialFunction,
    compose_log,
    constant,
    polynomial,
    power,
)
from app.services.moser_service import moser_sequence

logger = logging.getLogger(__name__)

CORPUS_ORDER = 4


class CorpusFunctions:
    """성질 검사용 고정 함수 코퍼스"""

    @staticmethod
    def constant(R: float) -> RadialFunction:
        return constant(1.0, R, CORPUS_ORDER)

    @staticmethod
    def affine(R: float) -> RadialFunction:
        """1 − r/R"""
        u = polynomial([1.0, -1.0 / R], R, CORPUS_ORDER)
        return RadialFunction(u.derivatives, R, name="affine")

    @staticmethod
    def monomial(s: float) -> Callable[[float], RadialFunction]:
        return lambda R: power(s, R, CORPUS_ORDER)

    @staticmethod
    def log_power(a: float) -> Callable[[float], RadialFunction]:
        """(1 + log(R/r))^a"""

        def build(R: float) -> RadialFunction:
            def make(j: int):
                falling = float(np.prod([a - i for i in range(j)])) if j else 1.0
                return lambda t: falling * (1 + np.asarray(t, dtype=float)) ** (a - j)

            derivs = [make(j) for j in range(CORPUS_ORDER + 1)]
            return compose_log(derivs, R, 1.0, CORPUS_ORDER, name=f"log-power({a:g})")

        return build

    @staticmethod
    def log_log(R: float) -> RadialFunction:
        """log(1 + log(R/r)). r=R 에서 0"""

        def make(j: int):
            if j == 0:
                return lambda t: np.log1p(np.asarray(t, dtype=float))
            c = (-1) ** (j - 1) * math.factorial(j - 1)
            return lambda t: c / (1 + np.asarray(t, dtype=float)) ** j

        derivs = [make(j) for j in range(CORPUS_ORDER + 1)]
        return compose_log(derivs, R, 1.0, CORPUS_ORDER, name="log-log")

    @staticmethod
    def quarter_cosine(R: float) -> RadialFunction:
        """cos(πr/(2R)). r=R 에서 0"""
        w = math.pi / (2 * R)

        def make(d: int):
            return lambda r: w ** d * np.cos(w * np.asarray(r, dtype=float) + d * math.pi / 2)

        return RadialFunction(tuple(make(d) for d in range(CORPUS_ORDER + 1)), R, name="quarter-cosine")

    @staticmethod
    def gaussian(R: float) -> RadialFunction:
        """exp(−r²/R²). d^n/dx^n e^{−x²} = (−1)^n H_n(x) e^{−x²}"""

        def make(n: int):
            c = np.zeros(n + 1)
            c[n] = 1.0

            def f(r):
                x = np.asarray(r, dtype=float) / R
                return (-1) ** n * hermite.hermval(x, c) * np.exp(-x * x) / R ** n
            return f

        return RadialFunction(tuple(make(n) for n in range(CORPUS_ORDER + 1)), R, name="gaussian")

    @staticmethod
    def moser_profile(R: float) -> RadialFunction:
        """절단 로그 프로파일 ψ_{m,ε} (m=e^5)"""
        params = MoserSequenceParams(m=math.exp(5.0), eps=0.05, k=1, R=R)
        return moser_sequence(params, order=2)


CORPUS_MAP: Dict[str, Callable[[float], RadialFunction]] = {
    "constant": CorpusFunctions.constant,
    "affine": CorpusFunctions.affine,
    "monomial_1.5": CorpusFunctions.monomial(1.5),
    "monomial_2": CorpusFunctions.monomial(2.0),
    "monomial_3": CorpusFunctions.monomial(3.0),
    "log_power_0.25": CorpusFunctions.log_power(0.25),
    "log_power_0.4": CorpusFunctions.log_power(0.4),
    "log_log": CorpusFunctions.log_log,
    "quarter_cosine": CorpusFunctions.quarter_cosine,
    "gaussian": CorpusFunctions.gaussian,
    "moser_profile": CorpusFunctions.moser_profile,
}

# 코퍼스 메타데이터
CORPUS_INFO = {
    "constant": {"boundary_vanishing": False, "nonincreasing": True},
    "affine": {"boundary_vanishing": True, "nonincreasing": True},
    "monomial_1.5": {"boundary_vanishing": False, "nonincreasing": False},
    "monomial_2": {"boundary_vanishing": False, "nonincreasing": False},
    "monomial_3": {"boundary_vanishing": False, "nonincreasing": False},
    "log_power_0.25": {"boundary_vanishing": False, "nonincreasing": True},
    "log_power_0.4": {"boundary_vanishing": False, "nonincreasing": True},
    "log_log": {"boundary_vanishing": True, "nonincreasing": True},
    "quarter_cosine": {"boundary_vanishing": True, "nonincreasing": True},
    "gaussian": {"boundary_vanishing": False, "nonincreasing": True},
    "moser_profile": {"boundary_vanishing": True, "nonincreasing": True},
}


def build_corpus(R: float = 1.0, version: str = CORPUS_VERSION) -> Dict[str, RadialFunction]:
    """이름 → RadialFunction (삽입 순서 고정)"""
    if version != CORPUS_VERSION:
        raise ValueError(f"Unknown corpus version: {version}")
    if not R > 0:
        raise ValueError(f"Invalid radius: {R}")
    return {name: builder(R) for name, builder in CORPUS_MAP.items()}


def get_members_by_tag(tag: str) -> List[str]:
    """태그별 코퍼스 이름 목록"""
    return [name for name, info in CORPUS_INFO.items() if info.get(tag, False)]


def boundary_vanishing_corpus(R: float = 1.0) -> Dict[str, RadialFunction]:
    names = get_members_by_tag("boundary_vanishing")
    return {name: CORPUS_MAP[name](R) for name in names}
