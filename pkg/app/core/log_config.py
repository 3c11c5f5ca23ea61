# app/core/log_config.py

import logging
import os
import sys


class FlushingStreamHandler(logging.StreamHandler):
    """즉시 flush 되는 stdout 핸들러"""

    def emit(self, record):
        super().emit(record)
        self.flush()


def setup_logging(level: str | None = None) -> None:
    """루트 로거를 stdout 핸들러 하나로 재설정

    Args:
        level: 로그 레벨. None 이면 LOG_LEVEL 환경변수 (기본 INFO)
    """
    log_level = (level or os.getenv("LOG_LEVEL", "INFO")).upper()
    if not hasattr(logging, log_level):
        log_level = "INFO"

    log_format = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    handler = FlushingStreamHandler(sys.stdout)
    handler.setLevel(getattr(logging, log_level))
    handler.setFormatter(logging.Formatter(log_format))

    # basicConfig 로 기존 핸들러 강제 교체
    logging.basicConfig(
        level=getattr(logging, log_level),
        format=log_format,
        handlers=[handler],
        force=True,
    )

    # 외부 라이브러리 로그 레벨 조정
    logging.getLogger("uvicorn.access").setLevel(logging.WARNING)
    logging.getLogger("fastapi").setLevel(logging.WARNING)
    logging.getLogger("matplotlib").setLevel(logging.WARNING)

    app_root_logger = logging.getLogger("app")
    app_root_logger.setLevel(getattr(logging, log_level))
    app_root_logger.propagate = True

    logger = logging.getLogger(__name__)
    logger.info(f"🚀 Logging initialized with level: {log_level}")
    logger.info(f"🌍 Environment: {os.getenv('ENVIRONMENT', 'development')}")
