import argparse
import logging
from pathlib import Path
from typing import List, Optional

import pandas as pd
from sqlmodel import Session

from ..core import config as settings
from ..database import connection
from ..service.artifacts import read_csv, write_text
from ..service.run_service import RunService
from .common import emit

logger = logging.getLogger(__name__)


def markdown_table(df: pd.DataFrame) -> str:
    """Pipe table; floats at six significant digits."""
    def cell(value) -> str:
        return f"{value:.6g}" if isinstance(value, float) else str(value)

    header = "| " + " | ".join(str(c) for c in df.columns) + " |"
    rule = "|" + "|".join("---" for _ in df.columns) + "|"
    body = ["| " + " | ".join(cell(v) for v in row) + " |" for row in df.itertuples(index=False)]
    return "\n".join([header, rule, *body])


def render_registry(limit: int, command: Optional[str] = None) -> List[str]:
    connection.create_db_and_tables(connection.engine)
    sections = []
    with Session(connection.engine) as session:
        service = RunService(session)
        for run in service.list_runs(command=command, limit=limit):
            sections.append(f"## {run.command} ({run.status})\n")
            sections.append(f"- experiment: `{run.experiment_id}`\n- seed: {run.seed}\n- code version: {run.code_version}\n")
            if run.detail:
                sections.append(f"- detail: {run.detail}\n")
            rows = service.rows_for(run.run_id)
            if rows:
                df = pd.DataFrame([r.model_dump(exclude={"row_id", "run_id"}) for r in rows])
                sections.append(markdown_table(df) + "\n")
    return sections


def report(args: argparse.Namespace) -> None:
    sections = ["# Experiment report\n"]
    for path in args.csv or []:
        sections.append(f"## {path}\n")
        sections.append(markdown_table(read_csv(path)) + "\n")
    if args.runs and settings.RECORD_RUNS:
        sections.extend(render_registry(args.runs, args.command))
    text = "\n".join(sections)
    if args.out:
        write_text(text, args.out)
        logger.info(f"Report written to {args.out}")
    emit(text)


def register(subparsers) -> None:
    p = subparsers.add_parser("report", help="render CSV summaries and recorded runs as markdown")
    p.add_argument("--csv", type=Path, nargs="*", default=None, help="summary CSV files to include")
    p.add_argument("--runs", type=int, default=0, help="include the latest N recorded runs")
    p.add_argument("--command", default=None, help="only runs of this command")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(handler=report)
