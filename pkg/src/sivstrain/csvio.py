"""
Numeric CSV tables with '#' comment headers.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


class SchemaError(ValueError):
    """Input table does not match the expected columns."""


@dataclass
class CsvTable:
    columns: dict
    comments: list = field(default_factory=list)

    def __post_init__(self):
        lengths = {len(np.atleast_1d(v)) for v in self.columns.values()}
        if len(lengths) > 1:
            raise SchemaError("table is not rectangular")
        self.columns = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def require(self, *names):
        if self.n_rows == 0:
            raise SchemaError("input table has no data rows")
        for name in names:
            if name not in self.columns:
                raise SchemaError(f"missing column '{name}'")
        for name in names:
            if not np.all(np.isfinite(self.columns[name])):
                raise SchemaError(f"column '{name}' has non-finite values")

    def __getitem__(self, name):
        return self.columns[name]


def format_table(table: CsvTable, float_format: str = ".12g") -> str:
    buf = io.StringIO()
    for line in table.comments:
        buf.write(f"# {line}\n" if line else "#\n")
    writer = csv.writer(buf, lineterminator="\n")
    names = list(table.columns)
    writer.writerow(names)
    cols = [table.columns[n] for n in names]
    for i in range(table.n_rows):
        writer.writerow([format(float(c[i]), float_format) for c in cols])
    return buf.getvalue()


def write_table(path, table: CsvTable, float_format: str = ".12g") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_table(table, float_format))


def parse_table(text: str) -> CsvTable:
    comments = []
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            comments.append(line[1:].strip())
        elif line.strip():
            body.append(line)
    if not body:
        raise SchemaError("input table is empty (no header row)")
    rows = list(csv.reader(body))
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise SchemaError("duplicate column names in header")
    data = {h: [] for h in header}
    for lineno, row in enumerate(rows[1:], 2):
        if len(row) != len(header):
            raise SchemaError(f"data row {lineno} has {len(row)} fields, header has {len(header)}")
        for h, v in zip(header, row):
            try:
                data[h].append(float(v))
            except ValueError as exc:
                raise SchemaError(f"column '{h}', data row {lineno}: not a number ({v!r})") from exc
    return CsvTable(data, comments)


def read_table(path) -> CsvTable:
    with open(path, encoding="utf-8") as fh:
        return parse_table(fh.read())
