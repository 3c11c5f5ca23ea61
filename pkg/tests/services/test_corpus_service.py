# tests/services/test_corpus_service.py

import numpy as np
import pytest

from app.core.constants import CORPUS_VERSION
from app.services.corpus_service import (
    CORPUS_INFO,
    CORPUS_MAP,
    boundary_vanishing_corpus,
    build_corpus,
    get_members_by_tag,
)


def test_corpus_members_fixed():
    """코퍼스 이름과 순서 고정"""
    corpus = build_corpus(1.0)
    assert list(corpus) == list(CORPUS_MAP)
    assert len(corpus) == 11
    assert set(CORPUS_INFO) == set(CORPUS_MAP)


def test_corpus_version_and_radius():
    """알 수 없는 버전과 잘못된 반지름 거부"""
    assert build_corpus(2.0, CORPUS_VERSION)["affine"].R == 2.0
    with pytest.raises(ValueError):
        build_corpus(1.0, "v0")
    with pytest.raises(ValueError):
        build_corpus(0.0)


@pytest.mark.parametrize("R", [0.5, 1.0, 2.0])
def test_boundary_vanishing_members(R):
    """경계 소멸 태그 함수는 u(R)=0"""
    corpus = boundary_vanishing_corpus(R)
    assert set(corpus) == {"affine", "log_log", "quarter_cosine", "moser_profile"}
    for name, u in corpus.items():
        assert abs(float(u(np.array([R]))[0])) < 1e-12, name


def test_nonincreasing_members():
    """nonincreasing 태그 함수는 격자에서 증가하지 않음"""
    corpus = build_corpus(1.0)
    r = np.linspace(1e-4, 1.0, 400)
    for name in get_members_by_tag("nonincreasing"):
        values = corpus[name](r)
        assert np.all(np.diff(values) <= 1e-12), name


@pytest.mark.parametrize("name", list(CORPUS_MAP))
def test_first_derivative_matches_difference_quotient(name):
    """해석적 1차 도함수와 중심 차분의 일치"""
    u = build_corpus(1.0)[name]
    r = np.array([0.3, 0.5])
    h = 1e-6
    quotient = (u(r + h) - u(r - h)) / (2 * h)
    np.testing.assert_allclose(u.evaluate(r, 1), quotient, rtol=1e-5, atol=1e-7)


def test_unknown_tag_is_empty():
    """없는 태그는 빈 목록"""
    assert get_members_by_tag("oscillating") == []
