from __future__ import annotations

import csv
import json
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any

from openpyxl import Workbook

from hyperfill.domain.models import ReportTable
from hyperfill.services.utils import format12, json_ready

CSV_HEADER = ["name", "param1", "param2", "lhs", "rhs", "value"]
SUMMARY_FILENAME = "summary.json"
XLSX_FILENAME = "report.xlsx"
SHEET_TITLE_LIMIT = 31


def write_json(payload: Mapping[str, Any], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(json_ready(payload), sort_keys=True, indent=2)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def write_table_csv(table: ReportTable, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in table.rows:
            writer.writerow(
                [
                    table.name,
                    row.param1,
                    row.param2,
                    format12(row.lhs),
                    format12(row.rhs),
                    format12(row.ratio),
                ]
            )
    return path


def export_excel(tables: Iterable[ReportTable], out_path: Path) -> Path:
    out_path.parent.mkdir(parents=True, exist_ok=True)
    wb = Workbook()
    wb.remove(wb.active)
    for table in tables:
        ws = wb.create_sheet(title=table.name[:SHEET_TITLE_LIMIT])
        ws.append(CSV_HEADER)
        for row in table.rows:
            ws.append([table.name, row.param1, row.param2, row.lhs, row.rhs, row.ratio])
    wb.save(out_path)
    return out_path


def write_bundle(
    out_dir: Path,
    summary: Mapping[str, Any],
    tables: Iterable[ReportTable],
    xlsx: bool = False,
) -> list[Path]:
    """summary.json plus one CSV per table; report.xlsx only on request."""
    out_dir.mkdir(parents=True, exist_ok=True)
    tables = list(tables)
    written = [write_json(summary, out_dir / SUMMARY_FILENAME)]
    for table in tables:
        written.append(write_table_csv(table, out_dir / f"{table.name}.csv"))
    if xlsx:
        written.append(export_excel(tables, out_dir / XLSX_FILENAME))
    return written
