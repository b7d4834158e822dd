from typing import List, Optional

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_REFUSAL = 3
EXIT_IO = 4


class LabError(Exception):
    """Base error; carries the process exit code and a readable detail."""

    exit_code: int = EXIT_VALIDATION

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class DomainError(LabError, ValueError):
    exit_code = EXIT_VALIDATION


class ConfigValidationError(LabError):
    exit_code = EXIT_VALIDATION

    def __init__(self, detail: str, violations: Optional[List[str]] = None):
        super().__init__(detail)
        self.violations = violations or []


class NumericRefusal(LabError):
    exit_code = EXIT_REFUSAL


class DegeneratePathError(NumericRefusal):
    ZERO_VARIANCE = "zero_variance"
    STUDENT_SINGULAR = "student_singular"

    def __init__(self, detail: str, reason: str):
        super().__init__(detail)
        self.reason = reason


class ArtifactError(LabError):
    exit_code = EXIT_IO
