from __future__ import annotations

from rclab.formatters.base import BaseFormatter
from rclab.formatters.csv_formatter import CsvFormatter
from rclab.formatters.gnuplot_formatter import GnuplotFormatter
from rclab.formatters.json_formatter import JsonFormatter
from rclab.formatters.markdown_formatter import MarkdownFormatter

FORMATTERS = {
    "json": JsonFormatter,
    "csv": CsvFormatter,
    "gnuplot": GnuplotFormatter,
    "markdown": MarkdownFormatter,
}


def formatter_for(name: str) -> BaseFormatter:
    return FORMATTERS[name]()


__all__ = [
    "BaseFormatter",
    "CsvFormatter",
    "FORMATTERS",
    "GnuplotFormatter",
    "JsonFormatter",
    "MarkdownFormatter",
    "formatter_for",
]
