"""CSV emission: one file per seed plus a cross-seed aggregate."""
from __future__ import annotations

import csv
import math
import os

from .metrics import MetricRow


class OutputError(Exception):
    pass


def _fmt(value):
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".6g")


def write_csv(path, rows):
    """MetricRows -> CSV with a header, floats at 6 significant digits."""
    if not rows:
        raise OutputError("empty metric log")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MetricRow.columns())
        for row in rows:
            writer.writerow([_fmt(getattr(row, c)) for c in MetricRow.columns()])


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return header, rows


def aggregate_csv(out_path, seed_paths):
    """Mean and standard error per column across per-seed CSVs.

    Rows are aligned by position (same config implies identical frame
    grids). Standard error uses the sample standard deviation; a single
    seed reports zero."""
    if not seed_paths:
        raise OutputError("no seed files to aggregate")
    headers, tables = zip(*(_read_csv(p) for p in seed_paths))
    if any(h != headers[0] for h in headers):
        raise OutputError("seed CSV headers differ")
    n_rows = min(len(t) for t in tables)
    header = headers[0]
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        out_header = ["frames"]
        for col in header[1:]:
            out_header += [f"{col}_mean", f"{col}_stderr"]
        writer.writerow(out_header)
        n = len(tables)
        for i in range(n_rows):
            row = [_fmt(int(tables[0][i][0]))]
            for j in range(1, len(header)):
                vals = [t[i][j] for t in tables]
                mean = sum(vals) / n
                if n > 1:
                    var = sum((v - mean) ** 2 for v in vals) / (n - 1)
                    stderr = math.sqrt(var / n)
                else:
                    stderr = 0.0
                row += [_fmt(mean), _fmt(stderr)]
            writer.writerow(row)
