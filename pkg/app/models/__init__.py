from .experiment_run import ExperimentRun, ReportRow

__all__ = ["ExperimentRun", "ReportRow"]
