from datetime import datetime
from typing import Any, Dict, List, Optional
from uuid import UUID, uuid4

from sqlmodel import JSON, Column, Field, Relationship, SQLModel


# One CLI experiment invocation
class ExperimentRun(SQLModel, table=True):
    __tablename__ = "experiment_runs"

    run_id: Optional[UUID] = Field(default_factory=uuid4, primary_key=True)
    command: str = Field(max_length=64)
    experiment_id: str = Field(max_length=500)
    seed: str = Field(max_length=32)  # unsigned 64-bit, kept as text
    code_version: str = Field(max_length=32)
    config: Dict[str, Any] = Field(sa_column=Column(JSON))
    output_dir: Optional[str] = Field(default=None, max_length=500)
    status: str = Field(default="running", max_length=32)  # running, finished, refused, failed
    detail: Optional[str] = Field(default=None, max_length=1000)

    created_at: Optional[datetime] = Field(default_factory=datetime.utcnow)
    finished_at: Optional[datetime] = Field(default=None)

    # Relationships
    rows: List["ReportRow"] = Relationship(back_populates="run")


class ReportRow(SQLModel, table=True):
    __tablename__ = "report_rows"

    row_id: Optional[UUID] = Field(default_factory=uuid4, primary_key=True)
    run_id: UUID = Field(foreign_key="experiment_runs.run_id", ondelete="CASCADE")
    label: str = Field(default="", max_length=255)
    n: int
    replicates: int
    ks_to_limit: Optional[float] = Field(default=None)
    ks_windowed: Optional[float] = Field(default=None)
    median: Optional[float] = Field(default=None)
    iqr: Optional[float] = Field(default=None)
    degenerate: int = Field(default=0)

    # Relationships
    run: Optional[ExperimentRun] = Relationship(back_populates="rows")
