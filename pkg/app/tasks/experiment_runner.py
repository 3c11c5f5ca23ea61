# app/tasks/experiment_runner.py

import argparse
import configparser
import logging
import os
import sys
from typing import Dict, List, Optional, Sequence

from pydantic import ValidationError

from app.core.config import settings
from app.core.constants import EXIT_CHECK_FAILED, EXIT_CONFIG_ERROR, EXIT_OK
from app.core.log_config import setup_logging
from app.schemas.experiments import ExperimentConfig, ExperimentSummary
from app.services.experiment_service import ConfigError, run_experiment

logger = logging.getLogger(__name__)

# 섹션 안에서 파라미터가 아닌 실행 설정으로 읽는 키
RESERVED_KEYS = {"seed"}


def load_config(path: str) -> Dict[str, Dict[str, str]]:
    """INI 파일 → {섹션: {키: 값}}. 키의 하이픈은 밑줄로 바꾼다.

    Raises:
        ConfigError: 파일이 없거나 파싱 실패
    """
    if not os.path.isfile(path):
        raise ConfigError(f"Config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as f:
            parser.read_file(f)
    except configparser.Error as e:
        raise ConfigError(f"Config parse error in {path}: {e}") from e

    sections = {}
    for section in parser.sections():
        sections[section] = {key.replace("-", "_"): value for key, value in parser.items(section)}
    return sections


def build_config(
    experiment: str,
    section: Dict[str, str],
    args: argparse.Namespace,
) -> ExperimentConfig:
    """섹션 값 위에 CLI 플래그를 덮어써 ExperimentConfig 생성

    Raises:
        ConfigError: 검증 실패 (문제 키를 메시지에 포함)
    """
    params = {key: value for key, value in section.items() if key not in RESERVED_KEYS}
    seed = args.seed if args.seed is not None else section.get("seed")
    try:
        return ExperimentConfig(
            experiment=experiment,
            params=params,
            out=args.out,
            seed=seed,
            tol=args.tol,
            grid_n=args.grid_n,
            workers=args.workers,
        )
    except ValidationError as e:
        keys = ", ".join(".".join(str(p) for p in err["loc"]) or experiment for err in e.errors())
        messages = "; ".join(err["msg"] for err in e.errors())
        raise ConfigError(f"Invalid configuration for [{experiment}] ({keys}): {messages}") from e


def write_report(summary: ExperimentSummary, frame, out: str) -> tuple[str, str]:
    """<out>/<experiment>.csv 와 <out>/<experiment>.summary.txt 작성"""
    os.makedirs(out, exist_ok=True)
    table_path = os.path.join(out, f"{summary.experiment}.csv")
    summary_path = os.path.join(out, f"{summary.experiment}.summary.txt")
    frame.to_csv(table_path, index=False, float_format="%.12g", na_rep="nan", lineterminator="\n")
    with open(summary_path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(summary.as_lines()) + "\n")
    logger.info(f"📝 Wrote {table_path} and {summary_path}")
    return table_path, summary_path


def run(config: ExperimentConfig) -> int:
    """실험 실행 후 보고서 작성

    Returns:
        EXIT_OK (모든 검사 통과), EXIT_CHECK_FAILED (검사 실패 또는 수치 오류)

    Raises:
        ConfigError: 파라미터 검증 실패
    """
    summary, frame = run_experiment(config)
    write_report(summary, frame, config.out)
    return EXIT_OK if summary.passed else EXIT_CHECK_FAILED


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="python -m app.tasks.experiment_runner",
        description=f"{settings.app_name} experiment runner",
    )
    parser.add_argument("--config", help="INI file with one [experiment-name] section per experiment")
    parser.add_argument("--experiment", help="experiment name (default: every section in --config)")
    parser.add_argument("--out", default=settings.output_dir, help="output directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--tol", type=float, default=None, help="overrides the experiment's primary tolerance")
    parser.add_argument("--grid-n", type=int, default=None, dest="grid_n")
    parser.add_argument("--workers", type=int, default=settings.workers)
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    setup_logging(settings.log_level)

    try:
        sections = load_config(args.config) if args.config else {}
        if args.experiment:
            names: List[str] = [args.experiment]
        elif sections:
            names = list(sections)
        else:
            raise ConfigError("Nothing to run: pass --experiment or a --config with sections")

        configs = [build_config(name, sections.get(name, {}), args) for name in names]
        status = EXIT_OK
        for config in configs:
            status = max(status, run(config))
    except ConfigError as e:
        logger.error(f"❌ {e}")
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    return status


if __name__ == "__main__":
    sys.exit(main())
