"""Run registry tables

Revision ID: 3b7d2c9e41a0
Revises: 
Create Date: 2026-10-18 09:12:05.118204

"""
from typing import Sequence, Union

from alembic import op
import sqlalchemy as sa
import sqlmodel


# revision identifiers, used by Alembic.
revision: str = '3b7d2c9e41a0'
down_revision: Union[str, None] = None
branch_labels: Union[str, Sequence[str], None] = None
depends_on: Union[str, Sequence[str], None] = None


def upgrade() -> None:
    op.create_table('experiment_runs',
    sa.Column('run_id', sa.Uuid(), nullable=False),
    sa.Column('command', sqlmodel.sql.sqltypes.AutoString(length=64), nullable=False),
    sa.Column('experiment_id', sqlmodel.sql.sqltypes.AutoString(length=500), nullable=False),
    sa.Column('seed', sqlmodel.sql.sqltypes.AutoString(length=32), nullable=False),
    sa.Column('code_version', sqlmodel.sql.sqltypes.AutoString(length=32), nullable=False),
    sa.Column('config', sa.JSON(), nullable=True),
    sa.Column('output_dir', sqlmodel.sql.sqltypes.AutoString(length=500), nullable=True),
    sa.Column('status', sqlmodel.sql.sqltypes.AutoString(length=32), nullable=False),
    sa.Column('detail', sqlmodel.sql.sqltypes.AutoString(length=1000), nullable=True),
    sa.Column('created_at', sa.DateTime(), nullable=True),
    sa.Column('finished_at', sa.DateTime(), nullable=True),
    sa.PrimaryKeyConstraint('run_id')
    )
    op.create_table('report_rows',
    sa.Column('row_id', sa.Uuid(), nullable=False),
    sa.Column('run_id', sa.Uuid(), nullable=False),
    sa.Column('label', sqlmodel.sql.sqltypes.AutoString(length=255), nullable=False),
    sa.Column('n', sa.Integer(), nullable=False),
    sa.Column('replicates', sa.Integer(), nullable=False),
    sa.Column('ks_to_limit', sa.Float(), nullable=True),
    sa.Column('ks_windowed', sa.Float(), nullable=True),
    sa.Column('median', sa.Float(), nullable=True),
    sa.Column('iqr', sa.Float(), nullable=True),
    sa.Column('degenerate', sa.Integer(), nullable=False),
    sa.ForeignKeyConstraint(['run_id'], ['experiment_runs.run_id'], ondelete='CASCADE'),
    sa.PrimaryKeyConstraint('row_id')
    )


def downgrade() -> None:
    op.drop_table('report_rows')
    op.drop_table('experiment_runs')
