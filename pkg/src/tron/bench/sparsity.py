"""Fraction of timesteps at which a control is (numerically) zero."""
from __future__ import annotations

import csv
import os
import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

#: default threshold, relative to the column's largest magnitude
RELATIVE_THRESHOLD = 1e-3


@dataclass(frozen=True)
class SparsityRecord:
    solver: str
    column: str
    threshold: float
    fraction: float
    steps: int


class MalformedCsv(ValueError):
    pass


def _solver_name(path: str) -> str:
    m = re.match(r"trajectory_(.+)\.csv$", os.path.basename(path))
    return m.group(1) if m else os.path.splitext(os.path.basename(path))[0]


def sparsity_fraction(values, threshold: Optional[float] = None, relative: float = RELATIVE_THRESHOLD):
    """(fraction, threshold used).  Exact zeros always count as sparse."""
    a = np.abs(np.asarray(values, dtype=float))
    if a.size == 0:
        raise ValueError("no control values")
    thr = relative * float(a.max()) if threshold is None else float(threshold)
    return float(np.mean((a < thr) | (a == 0.0))), thr


def sparsity_report(
    path: str,
    threshold: Optional[float] = None,
    columns: Optional[Sequence[str]] = None,
    relative: float = RELATIVE_THRESHOLD,
) -> list:
    """One SparsityRecord per control column of a trajectory CSV.

    ``threshold`` is absolute; when omitted each column uses ``relative``
    times its own largest magnitude.  The terminal row (no controls) is skipped.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise MalformedCsv(f"cannot read {path}: {e.strerror}") from None
    if not rows:
        raise MalformedCsv(f"{path} is empty")
    header = rows[0]
    ucols = [c for c in header if c.startswith("u_")]
    if not ucols:
        raise MalformedCsv(f"{path} has no control columns (expected u_0, u_1, ...)")
    wanted = list(columns) if columns else ucols
    missing = [c for c in wanted if c not in header]
    if missing:
        raise MalformedCsv(f"{path} lacks columns {', '.join(missing)}")
    idx = {c: header.index(c) for c in wanted}
    data = {c: [] for c in wanted}
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise MalformedCsv(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}")
        cells = [r[idx[c]] for c in wanted]
        if all(v == "" for v in cells):
            continue
        for c, v in zip(wanted, cells):
            try:
                data[c].append(float(v))
            except ValueError:
                raise MalformedCsv(f"{path}:{lineno}: column {c} holds {v!r}, not a number") from None
    solver = _solver_name(path)
    out = []
    for c in wanted:
        if not data[c]:
            raise MalformedCsv(f"{path} has no control rows")
        frac, thr = sparsity_fraction(data[c], threshold, relative)
        out.append(SparsityRecord(solver, c, thr, frac, len(data[c])))
    return out
