# app/main.py

import logging

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app.core.config import settings
from app.core.log_config import setup_logging
from app.routers import experiments
from app.services.experiment_service import NUMERICAL_ERRORS, ConfigError

# 로깅 초기화
setup_logging(settings.log_level)

logger = logging.getLogger(__name__)

app = FastAPI(
    title=settings.app_name,
    description="Weighted radial Sobolev embeddings, sharp Adams-Trudinger-Moser constants and fourth-order Navier problems",
    version="1.0.0",
)


@app.exception_handler(ConfigError)
async def config_error_handler(request: Request, exc: ConfigError):
    logger.warning(f"⚠️ Config error on {request.url}: {exc}")
    return JSONResponse(status_code=400, content={"detail": str(exc)})


async def numerical_error_handler(request: Request, exc: Exception):
    logger.error(f"❌ Numerical failure on {request.url}: {exc}")
    return JSONResponse(
        status_code=422,
        content={"detail": str(exc), "failure": type(exc).__name__},
    )


for error_class in NUMERICAL_ERRORS:
    app.add_exception_handler(error_class, numerical_error_handler)

# CORS 미들웨어 설정
app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.allowed_origins_list,
    allow_credentials=False,
    allow_methods=["*"],
    allow_headers=["*"],
)

# 라우터 등록
app.include_router(experiments.router, prefix=settings.api_prefix)


# 헬스 체크 엔드포인트
@app.get("/health")
async def health():
    logger.info("Health check requested")
    return {"status": "healthy", "message": f"{settings.app_name} is running"}


# 루트 엔드포인트
@app.get("/")
async def root():
    return {
        "message": f"Welcome to {settings.app_name}",
        "version": "1.0.0",
        "docs": "/docs",
        "health": "/health",
    }
