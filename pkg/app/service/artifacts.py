"""Lossless distribution artifacts, CSV summaries and JSON-lines logs."""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from .. import __version__
from ..core.errors import ArtifactError
from .distribution import EmpiricalDistribution

logger = logging.getLogger(__name__)

ARTIFACT_FORMAT = "empirical-distribution"
ARTIFACT_VERSION = 1

PathLike = Union[str, Path]


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def _dumps(obj: Any, **kwargs) -> str:
    return json.dumps(obj, sort_keys=True, default=_jsonable, **kwargs)


def _prepare(path: PathLike) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ArtifactError(f"Cannot create directory for '{target}': {str(e)}")
    return target


def write_distribution(d: EmpiricalDistribution, path: PathLike, config: Optional[Dict[str, Any]] = None) -> Path:
    """JSON header line, then one float.hex() value per line. No timestamps, so reruns are byte-identical."""
    if d.count == 0:
        raise ArtifactError("refusing to write an empty distribution")
    header = {
        "format": ARTIFACT_FORMAT,
        "version": ARTIFACT_VERSION,
        "count": d.count,
        "meta": d.meta,
        "config": config or {},
        "code_version": __version__,
    }
    target = _prepare(path)
    body = "\n".join(float(v).hex() for v in d.values)
    try:
        target.write_text(_dumps(header) + "\n" + body + "\n", encoding="utf-8")
    except OSError as e:
        raise ArtifactError(f"Failed to write distribution to '{target}': {str(e)}")
    logger.info(f"Wrote {d.count} values to {target}")
    return target


def read_artifact(path: PathLike) -> Tuple[EmpiricalDistribution, Dict[str, Any]]:
    """Distribution plus its full header."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ArtifactError(f"Failed to read distribution from '{path}': {str(e)}")
    if not lines:
        raise ArtifactError(f"'{path}' is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise ArtifactError(f"'{path}' has an unreadable header: {str(e)}")
    if header.get("format") != ARTIFACT_FORMAT:
        raise ArtifactError(f"'{path}' is not a distribution artifact")
    if header.get("version") != ARTIFACT_VERSION:
        raise ArtifactError(f"'{path}' has format version {header.get('version')}, expected {ARTIFACT_VERSION}")
    try:
        values = np.array([float.fromhex(line) for line in lines[1:] if line.strip()])
    except ValueError as e:
        raise ArtifactError(f"'{path}' holds a malformed value: {str(e)}")
    if values.size != header.get("count"):
        raise ArtifactError(f"'{path}' declares {header.get('count')} values but holds {values.size}")
    return EmpiricalDistribution(values, header.get("meta") or {}), header


def read_distribution(path: PathLike) -> EmpiricalDistribution:
    return read_artifact(path)[0]


def require_matching_functionals(a: Dict[str, Any], b: Dict[str, Any]) -> None:
    """Refuse comparisons between artifacts of different functionals."""
    fa = a.get("meta", {}).get("functional")
    fb = b.get("meta", {}).get("functional")
    if _functional_core(fa) != _functional_core(fb):
        raise ArtifactError(f"functional specs differ: '{fa}' vs '{fb}'")


def _functional_core(label: Optional[str]) -> Optional[Tuple[str, str]]:
    # "sup:tau=0.1|const:1|self" and "sup|const:1" name the same functional and weight
    if not label:
        return None
    head, _, rest = label.partition("|")
    kind = head.split(":")[0] if head.startswith("sup") else head
    return kind, rest.split("|")[0]


def write_csv(rows: Iterable[BaseModel], path: PathLike) -> Path:
    records = [row.model_dump(mode="json") for row in rows]
    target = _prepare(path)
    try:
        pd.DataFrame.from_records(records).to_csv(target, index=False)
    except OSError as e:
        raise ArtifactError(f"Failed to write CSV to '{target}': {str(e)}")
    return target


def read_csv(path: PathLike) -> pd.DataFrame:
    try:
        return pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ArtifactError(f"Failed to read CSV '{path}': {str(e)}")


def write_jsonl(records: Iterable[Dict[str, Any]], path: PathLike) -> Path:
    target = _prepare(path)
    try:
        with target.open("w", encoding="utf-8") as fh:
            for record in records:
                fh.write(_dumps(record) + "\n")
    except OSError as e:
        raise ArtifactError(f"Failed to write log '{target}': {str(e)}")
    return target


def write_json(model: BaseModel, path: PathLike) -> Path:
    target = _prepare(path)
    try:
        target.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise ArtifactError(f"Failed to write '{target}': {str(e)}")
    return target


def write_text(text: str, path: PathLike) -> Path:
    target = _prepare(path)
    try:
        target.write_text(text, encoding="utf-8")
    except OSError as e:
        raise ArtifactError(f"Failed to write '{target}': {str(e)}")
    return target

