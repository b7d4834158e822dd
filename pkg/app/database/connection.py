from sqlalchemy.engine import Engine
from sqlmodel import SQLModel, create_engine

from app.core import config as settings


def make_engine(url: str = settings.DATABASE_URL, echo: bool = settings.SQL_ECHO) -> Engine:
    """Engine for the run registry; SQLite connections may cross threads."""
    connect_args = {"check_same_thread": False} if url.startswith("sqlite") else {}
    return create_engine(url, echo=echo, pool_pre_ping=True, pool_recycle=300, connect_args=connect_args)


engine = make_engine()


def create_db_and_tables(bind: Engine = engine) -> None:
    """Create registry tables"""
    import app.models  # noqa: F401  registers the tables on SQLModel.metadata

    SQLModel.metadata.create_all(bind)
