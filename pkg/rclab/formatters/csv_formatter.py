from __future__ import annotations

import csv
import io
from typing import Any, Dict, List

from rclab.formatters.base import BaseFormatter, provenance_of, rows_of


def format_cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    if value is None:
        return ""
    return str(value)


class CsvFormatter(BaseFormatter):
    """Rows as CSV under a plain header; provenance follows as ``#`` comment lines."""

    def render(self, data: Any) -> str:
        out = io.StringIO()
        rows = rows_of(data)
        if not rows and isinstance(data, dict) and isinstance(data.get("result"), dict):
            rows = [_scalars(data["result"])]
        if rows:
            columns: List[str] = list(rows[0].keys())
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([format_cell(row.get(c)) for c in columns])
        for key, value in provenance_of(data).items():
            out.write(f"# {key}: {value}\n")
        return out.getvalue()

    def file_extension(self) -> str:
        return ".csv"


def _scalars(result: Dict[str, Any]) -> Dict[str, Any]:
    return {k: v for k, v in result.items() if not isinstance(v, (dict, list))}
