from __future__ import annotations

from typing import Any, Dict, List, Optional

import yaml

from rclab.formatters.base import BaseFormatter, provenance_of, rows_of
from rclab.formatters.csv_formatter import format_cell


class MarkdownFormatter(BaseFormatter):
    """Reports with the provenance block as YAML front matter."""

    def render(self, data: Any) -> str:
        if isinstance(data, str):
            return data
        if not isinstance(data, dict):
            return str(data)
        title = str(data.get("title") or provenance_of(data).get("command", ""))
        return self.render_document(
            title=title,
            body=self._body(data),
            frontmatter=provenance_of(data) or None,
        )

    def file_extension(self) -> str:
        return ".md"

    @staticmethod
    def render_document(
        title: str,
        body: str,
        frontmatter: Optional[Dict[str, Any]] = None,
    ) -> str:
        parts = []
        if frontmatter:
            fm_text = yaml.safe_dump(
                frontmatter,
                default_flow_style=False,
                allow_unicode=True,
                sort_keys=False,
            ).rstrip("\n")
            parts.append(f"---\n{fm_text}\n---\n")
        if title:
            parts.append(f"# {title}\n")
        if body:
            parts.append(body.rstrip("\n") + "\n")
        return "\n".join(parts)

    def _body(self, data: Dict[str, Any]) -> str:
        lines: List[str] = []
        result = data.get("result")
        if isinstance(result, dict):
            for key, value in result.items():
                if key == "notes":
                    continue
                if isinstance(value, dict):
                    lines.append(f"- **{key}**:")
                    lines.extend(f"    - {k}: {_cell(v)}" for k, v in value.items())
                else:
                    lines.append(f"- **{key}**: {_cell(value)}")
            notes = result.get("notes") or []
            if notes:
                lines.append("")
                lines.append("## Notes")
                lines.append("")
                lines.extend(str(note) for note in notes)
        rows = rows_of(data)
        if rows:
            columns = list(rows[0].keys())
            lines.append("")
            lines.append("| " + " | ".join(columns) + " |")
            lines.append("|" + "---|" * len(columns))
            for row in rows:
                lines.append("| " + " | ".join(_cell(row.get(c)) for c in columns) + " |")
        return "\n".join(lines)


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, list):
        return ", ".join(_cell(v) for v in value)
    return format_cell(value)
