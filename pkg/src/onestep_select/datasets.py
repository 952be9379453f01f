"""CSV ingestion and emission for datasets.

Files carry a header row; feature columns keep their order and the
response column is identified by name.  Values are written with Python's
shortest round-trip float representation, so a save/load cycle reproduces
the arrays bit for bit.
"""

from __future__ import annotations

import csv
import logging

import numpy as np

from .families import Dataset, GlmFamily, family_from_tag

log = logging.getLogger(__name__)


def save_dataset(data, path, response_column="y"):
    """Write features as x1..xp plus the named response column, CSV."""
    n, p = data.n, data.p
    header = [f"x{j}" for j in range(1, p + 1)] + [response_column]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(n):
            row = [repr(float(v)) for v in data.X[i]]
            row.append(repr(float(data.y[i])))
            writer.writerow(row)


def load_matrix(path):
    """Read a header CSV into (header list, float matrix).

    Shares load_dataset's error reporting but leaves column roles to the
    caller (used for prediction inputs that may lack a response).
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        width = len(header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ValueError(
                    f"{path}: line {lineno} has {len(row)} cells, expected {width}"
                )
            vals = []
            for k, cell in enumerate(row):
                cell = cell.strip()
                if cell == "":
                    raise ValueError(
                        f"{path}: line {lineno}, column {header[k]!r}: missing value"
                    )
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: line {lineno}, column {header[k]!r}: "
                        f"not numeric: {cell!r}"
                    ) from None
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return header, np.array(rows)


def load_dataset(path, family, response_column="y"):
    """Read a header CSV into a validated Dataset.

    Parse failures name the offending line and column; missing cells are
    rejected; a logistic response must be exactly 0 or 1.
    """
    if isinstance(family, str):
        family = family_from_tag(family)
    elif not isinstance(family, GlmFamily):
        raise TypeError("family must be a GlmFamily or tag string")
    header, arr = load_matrix(path)
    if response_column not in header:
        raise ValueError(
            f"{path}: response column {response_column!r} not in header {header}"
        )
    if len(header) < 2:
        raise ValueError(f"{path}: need at least one feature column")
    y_pos = header.index(response_column)
    y = arr[:, y_pos]
    X = np.delete(arr, y_pos, axis=1)
    if family.tag == "logistic" and not np.all(np.isin(y, (0.0, 1.0))):
        bad = int(np.flatnonzero(~np.isin(y, (0.0, 1.0)))[0])
        raise ValueError(
            f"{path}: logistic response must be 0/1; line {bad + 2} has {y[bad]!r}"
        )
    data = Dataset(X=X, y=y, family=family)
    log.info("loaded %s: n=%d rows, p=%d features", path, data.n, data.p)
    return data
