from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Dict

import pytest
import yaml

from rclab.exceptions import OutputError
from rclab.formatters import (
    CsvFormatter,
    GnuplotFormatter,
    JsonFormatter,
    MarkdownFormatter,
    formatter_for,
)
from rclab.formatters.base import atomic_write_bytes
from rclab.formatters.csv_formatter import format_cell


def _document() -> Dict[str, Any]:
    return {
        "provenance": {"command": "kernel return", "seed": 3},
        "result": {"d": 2, "points": 2, "notes": ["exact run"]},
        "rows": [
            {"n": 1, "p2n": 0.25, "err_bound": 0.0},
            {"n": 2, "p2n": 0.140625, "err_bound": None},
        ],
    }


class TestFormatterFor:
    @pytest.mark.parametrize("name,cls,ext", [
        ("json", JsonFormatter, ".json"),
        ("csv", CsvFormatter, ".csv"),
        ("gnuplot", GnuplotFormatter, ".dat"),
        ("markdown", MarkdownFormatter, ".md"),
    ])
    def test_lookup(self, name: str, cls: type, ext: str) -> None:
        formatter = formatter_for(name)
        assert isinstance(formatter, cls)
        assert formatter.file_extension() == ext


class TestJsonFormatter:
    def test_render(self) -> None:
        text = JsonFormatter().render({"name": "Zürich"})
        assert text.endswith("\n")
        assert "Zürich" in text
        assert json.loads(text) == {"name": "Zürich"}

    def test_write(self, tmp_path: Path) -> None:
        path = tmp_path / "out.json"
        JsonFormatter().write(_document(), path)
        assert json.loads(path.read_text(encoding="utf-8"))["rows"][0]["p2n"] == 0.25
        assert list(tmp_path.iterdir()) == [path]


class TestCsvFormatter:
    def test_rows_then_provenance(self) -> None:
        lines = CsvFormatter().render(_document()).splitlines()
        assert lines == [
            "n,p2n,err_bound",
            "1,0.25,0",
            "2,0.140625,",
            "# command: kernel return",
            "# seed: 3",
        ]

    def test_header_is_the_first_line_for_plain_readers(self) -> None:
        text = CsvFormatter().render(_document())
        reader = csv.DictReader(line for line in text.splitlines() if not line.startswith("#"))
        assert [row["p2n"] for row in reader] == ["0.25", "0.140625"]

    def test_scalar_result_without_rows(self) -> None:
        text = CsvFormatter().render({"result": {"alpha": 0.5, "ok": True, "notes": ["x"]}})
        assert text.splitlines() == ["alpha,ok", "0.5,true"]

    def test_format_cell(self) -> None:
        assert format_cell(False) == "false"
        assert format_cell(0.1) == "0.10000000000000001"
        assert format_cell(None) == ""
        assert format_cell(7) == "7"


class TestGnuplotFormatter:
    def test_columns(self) -> None:
        doc = {"rows": [{"site_coords": "6 1", "omega": 0.5, "rank": None}]}
        lines = GnuplotFormatter().render(doc).splitlines()
        assert lines == ["# site_coords omega rank", "6,1 0.5 nan"]

    def test_provenance_is_commented(self) -> None:
        text = GnuplotFormatter().render(_document())
        assert text.startswith("# command: kernel return\n")


class TestMarkdownFormatter:
    def test_document(self) -> None:
        text = MarkdownFormatter().render(_document())
        assert text.startswith("---\n")
        front = text.split("---\n")[1]
        assert yaml.safe_load(front) == {"command": "kernel return", "seed": 3}
        assert "# kernel return" in text
        assert "- **d**: 2" in text
        assert "## Notes" in text
        assert "exact run" in text
        assert "| n | p2n | err_bound |" in text
        assert "|---|---|---|" in text
        assert "| 2 | 0.140625 |  |" in text

    def test_title_overrides_command(self) -> None:
        text = MarkdownFormatter().render({"title": "Bounds", "result": {"d": 5}})
        assert text.startswith("# Bounds\n")

    def test_strings_pass_through(self) -> None:
        assert MarkdownFormatter().render("plain") == "plain"

    def test_other_values_are_stringified(self) -> None:
        assert MarkdownFormatter().render(42) == "42"

    def test_notes_keep_one_line_each(self) -> None:
        note = " ".join(["bound"] * 40)
        text = MarkdownFormatter().render({"result": {"notes": [note, "short"]}})
        assert text.splitlines()[-2:] == [note, "short"]


class TestAtomicWrite:
    def test_failure_raises_output_error(self, tmp_path: Path) -> None:
        target = tmp_path / "missing" / "out.json"
        with pytest.raises(OutputError, match="Cannot write"):
            atomic_write_bytes(target, b"{}")
        assert not (tmp_path / "missing").exists()

    def test_replaces_existing_file(self, tmp_path: Path) -> None:
        target = tmp_path / "out.txt"
        target.write_text("old", encoding="utf-8")
        atomic_write_bytes(target, b"new")
        assert target.read_text(encoding="utf-8") == "new"
        assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]
