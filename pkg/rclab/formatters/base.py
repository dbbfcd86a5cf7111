from __future__ import annotations

import os
import tempfile
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional

from rclab.exceptions import OutputError


def atomic_write_bytes(path: Path, data: bytes) -> None:
    """Write through a temporary file in the target directory, then rename."""
    directory = path.parent
    tmp: Optional[str] = None
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        if tmp is not None and os.path.exists(tmp):
            os.unlink(tmp)
        raise OutputError(f"Cannot write {path}: {exc.strerror or exc}.") from exc


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def rows_of(data: Any) -> List[Dict[str, Any]]:
    if isinstance(data, dict):
        rows = data.get("rows")
        if isinstance(rows, list):
            return rows
    return []


def provenance_of(data: Any) -> Dict[str, Any]:
    if isinstance(data, dict) and isinstance(data.get("provenance"), dict):
        return data["provenance"]
    return {}


class BaseFormatter(ABC):
    """Turns a result document into text.

    Documents are dicts with a ``provenance`` block, a ``result`` mapping
    and optionally tabular ``rows``.
    """

    @abstractmethod
    def render(self, data: Any) -> str:
        ...

    @abstractmethod
    def file_extension(self) -> str:
        ...

    def write(self, data: Any, output_path: Path) -> None:
        atomic_write_text(output_path, self.render(data))
