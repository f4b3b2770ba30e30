"""CSV writers.  Floats use repr(), so files are locale independent and
byte-identical for identical inputs."""
from __future__ import annotations

import csv
import io
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np


@contextmanager
def open_out(path: str | None):
    """Yield a text handle for ``path``, or stdout when path is None or '-'."""
    if path in (None, "-"):
        yield sys.stdout
        return
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", newline="", encoding="utf-8") as fh:
        yield fh


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def write_csv(path: str | None, header, rows) -> None:
    with open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()
