from __future__ import annotations

import csv
import logging
import math
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence

from .base import ResultSink

logger = logging.getLogger(__name__)

OUT_ENV = "CONFIDENCE_PRICER_OUT"
DEFAULT_OUT = "out"


def format_value(value: Any) -> str:
    # fixed 6 significant digits keeps reruns byte-identical
    if value is None:
        return ""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float) or hasattr(value, "dtype"):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return f"{value:.6g}"
    return str(value)


class CsvSink(ResultSink):
    """writes one csv file per result into an output directory"""

    def __init__(self, out_dir: Optional[str] = None):
        # resolution order: argument > env CONFIDENCE_PRICER_OUT > ./out
        self.out_dir = Path(out_dir or os.environ.get(OUT_ENV) or DEFAULT_OUT)

    def location(self, name: str) -> Path:
        return self.out_dir / f"{name}.csv"

    def write(self, name: str, header: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
        path = self.location(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        count = 0
        with path.open("w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(row.get(col)) for col in header])
                count += 1
        logger.debug("wrote %d rows to %s", count, path)
        return path
