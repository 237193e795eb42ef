from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Iterable, Protocol, Sequence


class ResultSink(Protocol):
    """output interface so commands can write csv today and something else later"""

    def write(self, name: str, header: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
        """persist the rows under name and return where they went"""
        ...

    def location(self, name: str) -> Path:
        """where a result called name would be written"""
        ...
