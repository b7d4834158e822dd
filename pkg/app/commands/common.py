"""Argument helpers and run recording shared by the command modules."""
import argparse
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple

from sqlmodel import Session

from ..core import config as settings
from ..core.errors import DomainError, NumericRefusal
from ..database import connection
from ..models.experiment_run import ExperimentRun
from ..service.run_service import RunService

logger = logging.getLogger(__name__)


def parse_ints(text: str) -> List[int]:
    try:
        return [int(float(part)) for part in text.split(",") if part.strip()]
    except ValueError:
        raise DomainError(f"expected comma-separated integers, got '{text}'")


def parse_floats(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise DomainError(f"expected comma-separated numbers, got '{text}'")


def add_seed(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, required=True, help="master seed (unsigned 64-bit)")


def add_replicates(parser: argparse.ArgumentParser, default: int = 2000) -> None:
    parser.add_argument("--replicates", type=int, default=default)


def add_workers(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--workers", type=int, default=settings.WORKERS, help="worker processes")


def add_out(parser: argparse.ArgumentParser, help_text: str = "output file") -> None:
    parser.add_argument("--out", type=Path, default=None, help=help_text)


def emit(text: str) -> None:
    print(text)


@contextmanager
def recorded_run(
    command: str, experiment_id: str, config: Dict[str, Any], seed: int, output_dir: Optional[str] = None
) -> Iterator[Optional[Tuple[RunService, ExperimentRun]]]:
    """Register the run when LAB_RECORD_RUNS is on; mark it refused or failed on errors."""
    if not settings.RECORD_RUNS:
        yield None
        return
    connection.create_db_and_tables(connection.engine)
    with Session(connection.engine) as session:
        service = RunService(session)
        run = service.start_run(command, experiment_id, config, seed, output_dir)
        try:
            yield service, run
        except NumericRefusal as e:
            service.finish_run(run, "refused", e.detail)
            raise
        except Exception as e:
            service.finish_run(run, "failed", str(e)[:1000])
            raise
        else:
            service.finish_run(run)
            logger.info(f"Recorded run {run.run_id}")
