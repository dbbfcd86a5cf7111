from __future__ import annotations

from typing import Any

from rclab.formatters.base import BaseFormatter, provenance_of, rows_of
from rclab.formatters.csv_formatter import format_cell


class GnuplotFormatter(BaseFormatter):
    """Whitespace-separated columns with a commented header."""

    def render(self, data: Any) -> str:
        lines = [f"# {key}: {value}" for key, value in provenance_of(data).items()]
        rows = rows_of(data)
        if rows:
            columns = list(rows[0].keys())
            lines.append("# " + " ".join(columns))
            for row in rows:
                lines.append(" ".join((format_cell(row.get(c)) or "nan").replace(" ", ",") for c in columns))
        return "\n".join(lines) + "\n"

    def file_extension(self) -> str:
        return ".dat"
