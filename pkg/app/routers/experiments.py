# app/routers/experiments.py

import logging
import math
from typing import Any, Dict, List, Optional

from fastapi import APIRouter, HTTPException, status
from fastapi.concurrency import run_in_threadpool
from pydantic import BaseModel, Field, ValidationError

from app.core.config import settings
from app.schemas.experiments import ExperimentConfig, ExperimentSummary
from app.services.experiment_service import ConfigError, get_all_experiments, run_experiment

router = APIRouter(prefix="/experiments", tags=["experiments"])

logger = logging.getLogger(__name__)


class ExperimentRequest(BaseModel):
    params: Dict[str, Any] = {}
    seed: Optional[int] = Field(None, ge=0)
    tol: Optional[float] = Field(None, gt=0)
    grid_n: Optional[int] = Field(None, ge=64)


class ExperimentResponse(BaseModel):
    summary: ExperimentSummary
    rows: List[Dict[str, Any]]


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


@router.get("/")
async def list_experiments():
    """실행 가능한 실험 목록과 메타데이터"""
    return get_all_experiments()


@router.post("/{name}", response_model=ExperimentResponse)
async def execute_experiment(name: str, request: ExperimentRequest):
    """
    실험 실행

    결과 파일은 쓰지 않고 요약과 표 행을 그대로 반환한다.
    검사 실패와 수치 오류는 summary.passed / summary.failures 로 전달된다.
    """
    logger.info(f"Experiment request: name={name}, params={request.params}, seed={request.seed}")
    try:
        config = ExperimentConfig(
            experiment=name,
            params=request.params,
            seed=request.seed,
            tol=request.tol,
            grid_n=request.grid_n,
            workers=settings.workers,
        )
    except ValidationError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e.errors()[0]["msg"]))

    try:
        summary, frame = await run_in_threadpool(run_experiment, config)
    except ConfigError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))

    rows = [
        {key: _json_safe(value) for key, value in record.items()}
        for record in frame.to_dict(orient="records")
    ]
    summary = summary.model_copy(
        update={"metrics": {key: _json_safe(value) for key, value in summary.metrics.items()}}
    )
    return ExperimentResponse(summary=summary, rows=rows)
