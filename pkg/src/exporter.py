"""
Exporter Module

Writes run artifacts: CSV tables, stable JSON documents, and an optional Excel
workbook collecting the main tables of a run. All text outputs are byte-deterministic
for identical inputs.
"""

import csv
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Iterable, Sequence

from openpyxl import Workbook
from openpyxl.styles import Font, Alignment, PatternFill

from .config import APP_NAME, XML_CONTROL_RE
from .utils import RunEncoder

# Fixed workbook timestamps keep repeated exports identical
_WORKBOOK_EPOCH = datetime(2020, 3, 8)


def clean_cell_value(value):
    """
    Removes control characters and invalid XML characters from cell values.

    Args:
        value: Cell value to clean

    Returns:
        The value unchanged for numbers, otherwise a cleaned string
    """
    if value is None:
        return ""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return value
    s = str(value)
    # Remove illegal XML control characters (allow \t \n \r)
    s = XML_CONTROL_RE.sub("", s)
    # BOM, also when a UTF-8 BOM was decoded as Latin-1
    if s.startswith(("\ufeff", "\ufffe", "\xef\xbb\xbf")):
        s = s.lstrip("\ufeff\ufffe")
        if s.startswith("\xef\xbb\xbf"):
            s = s[3:]
    # UTF-16 BOM mojibake
    if s.startswith(("\xfe\xff", "\xff\xfe")):
        s = s[2:]
    s = s.replace("\x00", "")
    return s


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write a CSV with '\\n' line endings and a header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def dumps_json(data) -> str:
    return json.dumps(data, cls=RunEncoder, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(path, data) -> Path:
    """Write JSON with sorted keys so repeated runs diff cleanly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(data), encoding="utf-8", newline="")
    return path


def format_float(value, digits: int = 6):
    """Round for stable text output; None and non-finite values pass through as None."""
    if value is None:
        return None
    value = float(value)
    if value != value or value in (float("inf"), float("-inf")):
        return None
    return round(value, digits)


def export_workbook(path, sheets: dict) -> Path:
    """
    Write an Excel workbook with one sheet per table.

    Args:
        path: output .xlsx path
        sheets: {sheet title: (header list, rows)} in insertion order
    """
    path = Path(path)
    logging.info(f"Exporting report to Excel file: {path}")
    wb = Workbook()
    wb.remove(wb.active)
    wb.properties.creator = APP_NAME
    wb.properties.created = _WORKBOOK_EPOCH
    wb.properties.modified = _WORKBOOK_EPOCH

    header_font = Font(bold=True)
    header_fill = PatternFill(start_color="DDDDDD", end_color="DDDDDD", fill_type="solid")
    header_alignment = Alignment(wrap_text=True, horizontal="center", vertical="center")

    for title, (header, rows) in sheets.items():
        ws = wb.create_sheet(title=title[:31])
        for col_num, name in enumerate(header, 1):
            cell = ws.cell(row=1, column=col_num, value=clean_cell_value(name))
            cell.font = header_font
            cell.fill = header_fill
            cell.alignment = header_alignment
        ws.freeze_panes = 'A2'
        for row_idx, row in enumerate(rows, start=2):
            for col_idx, value in enumerate(row, start=1):
                ws.cell(row=row_idx, column=col_idx, value=clean_cell_value(value))
        for col in ws.columns:
            try:
                max_len = max(len(str(c.value)) for c in col if c.value is not None)
                ws.column_dimensions[col[0].column_letter].width = min(max_len + 2, 60)
            except (ValueError, TypeError):
                pass

    path.parent.mkdir(parents=True, exist_ok=True)
    wb.save(path)
    return path
