"""TOML experiment documents resolved into validated ExperimentConfig objects."""
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Union

from pydantic import ValidationError

from ..core.errors import ArtifactError, ConfigValidationError
from ..core.schemas import ExperimentConfig

logger = logging.getLogger(__name__)


def parse_config(text: str) -> ExperimentConfig:
    """Parse an `[experiment]` table (or a bare top-level document) and fill defaults."""
    try:
        document = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigValidationError(f"Config parse error: {str(e)}", [str(e)])
    body = document.get("experiment", document)
    if not isinstance(body, dict):
        raise ConfigValidationError("Config 'experiment' must be a table", ["experiment: not a table"])
    return validate_config(body)


def validate_config(data: Dict[str, Any]) -> ExperimentConfig:
    """Validate a plain mapping, collecting every violated field."""
    try:
        return ExperimentConfig(**data)
    except ValidationError as e:
        violations = [f"{'.'.join(str(part) for part in err['loc']) or 'experiment'}: {err['msg']}" for err in e.errors()]
        raise ConfigValidationError(f"Invalid experiment config: {'; '.join(violations)}", violations)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ArtifactError(f"Failed to read config '{path}': {str(e)}")
    cfg = parse_config(text)
    logger.debug(f"Loaded config from {path}: {cfg.model_dump()}")
    return cfg
