"""Deterministic artifact writers: ledger / residual / table CSVs, reports, snapshots."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .diagnostics import LEDGER_FIELDS, RESIDUAL_FIELDS, BalanceLedger
from .grid import read_snapshot, write_slice_csv, write_snapshot

__all__ = [
    "fmt",
    "write_csv",
    "write_ledger",
    "write_residuals",
    "write_table",
    "write_report",
    "write_snapshot",
    "read_snapshot",
    "write_slice_csv",
    "read_csv",
]


def fmt(x) -> str:
    """Full-precision, locale-free number formatting."""
    return f"{float(x):.17g}"


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path):
    """Returns ``(header, array)``; the array is ``(0, ncols)`` for header-only files."""
    text = Path(path).read_text().splitlines()
    header = text[0].split(",")
    rows = [[float(x) for x in line.split(",")] for line in text[1:] if line]
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def write_ledger(path, ledger: BalanceLedger) -> Path:
    return write_csv(path, LEDGER_FIELDS, (r.values() for r in ledger.rows))


def write_residuals(path, residuals: dict) -> Path:
    cols = [np.asarray(residuals[k], dtype=float) for k in RESIDUAL_FIELDS]
    return write_csv(path, RESIDUAL_FIELDS, zip(*cols))


def write_table(path, header, table) -> Path:
    return write_csv(path, header, np.asarray(table, dtype=float))


def write_report(path, text: str) -> Path:
    path = Path(path)
    try:
        path.write_text(text if text.endswith("\n") else text + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path
