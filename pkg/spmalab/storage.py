"""
Results directory: one CSV per experiment cell.

File names encode the cell, `{method}_eta-{eta}_m-{m}_seed-{seed}.csv`, with
`m-none` for methods without an inner loop.
"""
import csv
import logging
import os
import re
from typing import List, Optional, Tuple

import numpy as np

from spmalab.errors import ReportIoError
from spmalab.models.record import CSV_COLUMNS, IterationRecord

logger = logging.getLogger(__name__)

CELL_FILE = re.compile(r"^(?P<method>[A-Za-z_]+)_eta-(?P<eta>[^_]+)_m-(?P<m>none|\d+)_seed-(?P<seed>-?\d+)\.csv$")
INT_COLUMNS = {"t"}
BOOL_COLUMNS = {"bound_ok"}


def cell_filename(method: str, eta: float, m: Optional[int], seed: int) -> str:
    return f"{method}_eta-{eta!r}_m-{'none' if m is None else m}_seed-{seed}.csv"


def parse_cell_filename(name: str) -> Optional[Tuple[str, float, Optional[int], int]]:
    match = CELL_FILE.match(name)
    if not match:
        return None
    m = match["m"]
    return match["method"], float(match["eta"]), None if m == "none" else int(m), int(match["seed"])


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(value)
    return repr(float(value))


def _parse(column: str, text: str):
    if text == "":
        return None
    if column in INT_COLUMNS:
        return int(text)
    if column in BOOL_COLUMNS:
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r}")
        return text == "true"
    return float(text)


def ensure_dir(path: str) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise ReportIoError(f"cannot create {path}: {e.strerror}")


def write_records(path: str, records: List[IterationRecord]) -> None:
    """Floats are written with repr so reading back reproduces them exactly."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for rec in records:
                row = rec.row()
                writer.writerow([_format(row[name]) for name in CSV_COLUMNS])
    except OSError as e:
        raise ReportIoError(f"cannot write {path}: {e.strerror}")
    logger.debug("wrote %d rows to %s", len(records), path)


def read_records(path: str, method: str = "") -> List[IterationRecord]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != CSV_COLUMNS:
                raise ReportIoError(f"{path}: unexpected header {header}")
            records = []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(CSV_COLUMNS):
                    raise ReportIoError(f"{path}:{lineno}: expected {len(CSV_COLUMNS)} fields, got {len(row)}")
                try:
                    values = {name: _parse(name, text) for name, text in zip(CSV_COLUMNS, row)}
                except ValueError as e:
                    raise ReportIoError(f"{path}:{lineno}: {e}")
                if values["alpha_t"] is None:
                    values["alpha_t"] = 1.0
                records.append(IterationRecord(method=method, **values))
    except OSError as e:
        raise ReportIoError(f"cannot read {path}: {e.strerror}")
    return records


def list_cell_files(results_dir: str) -> List[Tuple[str, Tuple[str, float, Optional[int], int]]]:
    """(path, parsed key) for every cell CSV in the directory, sorted by name."""
    try:
        names = sorted(os.listdir(results_dir))
    except OSError as e:
        raise ReportIoError(f"cannot list {results_dir}: {e.strerror}")
    found = []
    for name in names:
        key = parse_cell_filename(name)
        if key is not None:
            found.append((os.path.join(results_dir, name), key))
    return found
