"""
Report writers.

CSV follows RFC 4180 with CRLF line endings; floats are written with ``repr``,
integers of any size as decimal strings and rationals as ``p/q``. JSON is
canonical: sorted keys, compact separators, so equal inputs give equal bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

HASH_LENGTH = 12


def format_value(value: Any) -> str:
    """One CSV cell."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, Fraction):
        return str(value.numerator) if value.denominator == 1 else \
            f"{value.numerator}/{value.denominator}"
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        v = int(value)
        # Beyond 2**53 a JSON reader may round; keep those exact as strings.
        return v if abs(v) < 2**53 else str(v)
    if isinstance(value, Fraction):
        return format_value(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else format_value(v)
    return value


def canonical_json(data: Any) -> str:
    return json.dumps(_jsonable(data), sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False)


def config_hash(config: Mapping[str, Any]) -> str:
    """First 12 hex digits of the SHA-256 of the canonical config."""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()[:HASH_LENGTH]


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


class OutputWriter:
    """Writes report files into an existing directory.

    Every method raises ``OSError`` when the directory does not exist.
    """

    @staticmethod
    def _target(directory: str | Path, name: str, suffix: str) -> Path:
        base = Path(directory)
        if not base.is_dir():
            raise FileNotFoundError(f"output directory does not exist: {base}")
        return base / f"{name}{suffix}"

    @staticmethod
    def write_csv(directory: str | Path, name: str, header: Sequence[str],
                  rows: Iterable[Sequence[Any]]) -> Path:
        path = OutputWriter._target(directory, name, ".csv")
        path.write_bytes(csv_text(header, rows).encode("utf-8"))
        logger.debug("wrote %s", path)
        return path

    @staticmethod
    def write_json(directory: str | Path, name: str, data: Any) -> Path:
        path = OutputWriter._target(directory, name, ".json")
        path.write_bytes(canonical_json(data).encode("utf-8"))
        logger.debug("wrote %s", path)
        return path
