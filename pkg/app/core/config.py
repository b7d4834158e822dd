from decouple import config

# Run registry
DATABASE_URL = config("DATABASE_URL", default="sqlite:///./lab_runs.db")
SQL_ECHO = config("SQL_ECHO", default=False, cast=bool)
RECORD_RUNS = config("LAB_RECORD_RUNS", default=True, cast=bool)

# Experiments
OUTPUT_DIR = config("LAB_OUTPUT_DIR", default="runs")
WORKERS = config("LAB_WORKERS", default=1, cast=int)
LOG_LEVEL = config("LAB_LOG_LEVEL", default="INFO")
