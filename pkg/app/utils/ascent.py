# app/utils/ascent.py

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)

Vector = np.ndarray


@dataclass
class AscentResult:
    x: Vector
    value: float
    iterations: int
    converged: bool
    step: float


def projected_ascent(
    objective: Callable[[Vector], float],
    gradient: Callable[[Vector], Vector],
    project: Callable[[Vector], Vector],
    x0: Vector,
    precondition: Callable[[Vector], Vector] | None = None,
    max_iters: int = 50000,
    tol: float = 1e-10,
    step: float = 1.0,
    min_step: float = 1e-16,
) -> AscentResult:
    """제약 집합 위 사영 경사 상승 (backtracking)

    x ← P(x + t·M⁻¹∇f(x)), f 가 증가하지 않으면 t 를 반으로 줄인다.
    연속 두 반복의 상대 변화가 tol 미만이면 수렴.

    Args:
        project: 제약 집합으로의 사영 (구면 위 rescaling 등)
        precondition: 경사에 적용할 M⁻¹ (Sobolev gradient). None 이면 항등
    """
    x = project(np.asarray(x0, dtype=float))
    value = objective(x)
    converged = False
    it = 0

    for it in range(1, max_iters + 1):
        g = gradient(x)
        d = precondition(g) if precondition is not None else g
        if not np.all(np.isfinite(d)):
            logger.warning(f"⚠️ Non-finite ascent direction at iteration {it}")
            break

        accepted = False
        while step >= min_step:
            candidate = project(x + step * d)
            cand_value = objective(candidate)
            if np.isfinite(cand_value) and cand_value >= value:
                accepted = True
                break
            step *= 0.5

        if not accepted:
            # 더 이상 개선 불가 (극대점 근처)
            converged = True
            break

        change = abs(cand_value - value) / max(abs(cand_value), 1e-300)
        x, value = candidate, cand_value
        step = min(step * 2.0, 1e6)
        if change < tol:
            converged = True
            break

    logger.debug(f"📈 Ascent stopped after {it} iterations (value={value:.12g}, converged={converged})")
    return AscentResult(x=x, value=float(value), iterations=it, converged=converged, step=step)
