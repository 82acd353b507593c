"""Delimited-table input and output.

Target cells carry censoring markers: a plain decimal number is observed,
``<v`` is left-censored with window (-inf, v], ``>v`` is right-censored with
window [v, inf), and ``[a,b]`` is interval-censored (that one needs CSV
quoting because of the comma). Whitespace inside a cell is an error, as is a
marker in a non-target column. The decimal separator is ``.`` regardless of
locale; scientific notation is fine.
"""

from __future__ import annotations

import csv
import io as _io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import TableFormatError, ValidationError
from .model import (
    Dataset,
    Observed,
    interval_censored,
    left_censored,
    right_censored,
)

INTERCEPT_NAME = "(intercept)"


@dataclass
class TableDocument:
    """A parsed table: the dataset plus enough raw material to write the
    file back with untouched cells echoed byte for byte."""

    dataset: Dataset
    header: list
    rows: list  # raw cell text, one list per data row
    target_names: list  # in the order the caller asked for
    target_columns: list  # column index of each target, same order
    feature_columns: list  # remaining columns, file order
    intercept: bool


def _number(text: str, where: str) -> float:
    if text == "" or "_" in text:
        raise TableFormatError(f"{where}: {text!r} is not a number")
    try:
        value = float(text)
    except ValueError:
        raise TableFormatError(f"{where}: {text!r} is not a number") from None
    if not np.isfinite(value):
        raise TableFormatError(f"{where}: {text!r} is not a finite number")
    return value


def parse_target_cell(text: str, where: str = "cell"):
    """One target cell's entry. Raises TableFormatError on anything outside
    the grammar."""
    if text == "":
        raise TableFormatError(f"{where}: empty cell")
    if any(ch.isspace() for ch in text):
        raise TableFormatError(f"{where}: whitespace inside cell {text!r}")
    if text.startswith("<"):
        return left_censored(_number(text[1:], where))
    if text.startswith(">"):
        return right_censored(_number(text[1:], where))
    if text.startswith("["):
        if not text.endswith("]"):
            raise TableFormatError(f"{where}: unterminated interval {text!r}")
        body = text[1:-1].split(",")
        if len(body) != 2:
            raise TableFormatError(f"{where}: interval needs exactly two bounds, got {text!r}")
        lower = _number(body[0], where)
        upper = _number(body[1], where)
        if not lower < upper:
            raise TableFormatError(f"{where}: interval bounds out of order in {text!r}")
        return interval_censored(lower, upper)
    return Observed(_number(text, where))


def _looks_censored(text: str) -> bool:
    return text[:1] in ("<", ">", "[")


def read_table(source, targets: Sequence[str], intercept: bool = True) -> TableDocument:
    """Parse a CSV file (path or text stream) into a TableDocument.

    ``targets`` names the columns modeled jointly, in the order their rows
    will appear in the dataset; every other column is a feature and must be
    fully numeric. A constant feature is appended unless ``intercept`` is
    False.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", newline="") as fh:
            text = fh.read()
    try:
        records = list(csv.reader(_io.StringIO(text)))
    except csv.Error as err:
        raise TableFormatError(f"cannot parse CSV: {err}") from None
    records = [row for row in records if row]  # ignore blank lines
    if not records:
        raise TableFormatError("empty table: a header row is required")
    header = [cell for cell in records[0]]
    if len(set(header)) != len(header):
        raise TableFormatError("duplicate column names in header")

    if not targets:
        raise ValidationError("at least one target column is required")
    seen = set()
    for name in targets:
        if name not in header:
            raise ValidationError(f"target column {name!r} not found in header")
        if name in seen:
            raise ValidationError(f"target column {name!r} listed twice")
        seen.add(name)
    target_columns = [header.index(name) for name in targets]
    feature_columns = [j for j in range(len(header)) if j not in set(target_columns)]

    rows = records[1:]
    if not rows:
        raise TableFormatError("no data rows")
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise TableFormatError(
                f"row {r + 2}: {len(row)} cells, header has {len(header)}"
            )

    n = len(rows)
    entries = [[None] * n for _ in targets]
    for k, j in enumerate(target_columns):
        for i, row in enumerate(rows):
            entries[k][i] = parse_target_cell(row[j], f"row {i + 2}, column {header[j]!r}")

    x = np.empty((n, len(feature_columns) + (1 if intercept else 0)))
    for c, j in enumerate(feature_columns):
        for i, row in enumerate(rows):
            cell = row[j]
            if _looks_censored(cell):
                raise TableFormatError(
                    f"row {i + 2}, column {header[j]!r}: censoring marker {cell!r} in a "
                    "non-target column; add the column to --targets to model it"
                )
            x[i, c] = _number(cell, f"row {i + 2}, column {header[j]!r}")
    feature_names = [header[j] for j in feature_columns]
    if intercept:
        x[:, -1] = 1.0
        feature_names = feature_names + [INTERCEPT_NAME]

    dataset = Dataset(
        x,
        entries,
        target_names=list(targets),
        feature_names=feature_names,
    )
    return TableDocument(
        dataset=dataset,
        header=header,
        rows=[list(row) for row in rows],
        target_names=list(targets),
        target_columns=target_columns,
        feature_columns=feature_columns,
        intercept=intercept,
    )


def write_table(
    doc: TableDocument,
    completed: Optional[np.ndarray] = None,
    mark: bool = False,
) -> str:
    """Serialize the table back to CSV text.

    Untouched cells are echoed verbatim. With ``completed`` (an m-by-n value
    grid), censored target cells are replaced by their imputed numbers,
    printed with enough digits to round-trip exactly. ``mark`` appends one
    boolean column per target flagging which cells were imputed.
    """
    censored = doc.dataset.censored
    header = list(doc.header)
    if mark:
        header += [f"{name}_imputed" for name in doc.target_names]
    out = _io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for i, row in enumerate(doc.rows):
        cells = list(row)
        flags = []
        for k, j in enumerate(doc.target_columns):
            imputed = bool(censored[k, i]) and completed is not None
            if imputed:
                cells[j] = repr(float(completed[k, i]))
            flags.append("true" if imputed else "false")
        if mark:
            cells += flags
        writer.writerow(cells)
    return out.getvalue()
