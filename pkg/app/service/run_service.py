import logging
from datetime import datetime
from typing import Any, Dict, Iterable, List, Optional
from uuid import UUID

from sqlmodel import Session, select

from .. import __version__
from ..core.schemas import ConvergenceRow
from ..models.experiment_run import ExperimentRun, ReportRow

logger = logging.getLogger(__name__)


class RunService:
    """Run registry: one ExperimentRun per CLI experiment and its summary rows."""

    def __init__(self, session: Session):
        self.session = session

    def start_run(
        self, command: str, experiment_id: str, config: Dict[str, Any], seed: int, output_dir: Optional[str] = None
    ) -> ExperimentRun:
        run = ExperimentRun(
            command=command,
            experiment_id=experiment_id,
            seed=str(seed),
            code_version=__version__,
            config=config,
            output_dir=output_dir,
        )
        self.session.add(run)
        self.session.commit()
        self.session.refresh(run)
        logger.debug(f"Registered run {run.run_id} for '{command}'")
        return run

    def add_rows(self, run: ExperimentRun, rows: Iterable[ConvergenceRow], label: str = "") -> List[ReportRow]:
        stored = [
            ReportRow(
                run_id=run.run_id,
                label=label,
                n=row.n,
                replicates=row.replicates,
                ks_to_limit=row.ks_to_limit,
                ks_windowed=row.ks_windowed,
                median=row.median,
                iqr=row.iqr,
                degenerate=row.degenerate,
            )
            for row in rows
        ]
        self.session.add_all(stored)
        self.session.commit()
        return stored

    def finish_run(self, run: ExperimentRun, status: str = "finished", detail: Optional[str] = None) -> ExperimentRun:
        run.status = status
        run.detail = detail
        run.finished_at = datetime.utcnow()
        self.session.add(run)
        self.session.commit()
        self.session.refresh(run)
        return run

    def list_runs(self, command: Optional[str] = None, limit: int = 50) -> List[ExperimentRun]:
        query = select(ExperimentRun)
        if command:
            query = query.where(ExperimentRun.command == command)
        query = query.order_by(ExperimentRun.created_at.desc()).limit(limit)
        return list(self.session.exec(query).all())

    def rows_for(self, run_id: UUID) -> List[ReportRow]:
        query = select(ReportRow).where(ReportRow.run_id == run_id).order_by(ReportRow.label, ReportRow.n)
        return list(self.session.exec(query).all())
