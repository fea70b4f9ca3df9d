"""CSV emitters. Every file starts with ``#`` metadata lines, then a header row."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.15g}"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path, columns, rows, meta=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    return path


def read_csv(path):
    """Return ``(meta, header, rows)`` with rows as lists of strings."""
    meta, body = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
            else:
                body.append(line)
    rows = list(csv.reader(body))
    return meta, rows[0], rows[1:]


def long_format(times, x, values):
    """Rows ``(t, x, value)`` for a ``(len(times), len(x))`` array."""
    for i, t in enumerate(times):
        for j, xj in enumerate(x):
            yield t, xj, values[i, j]


def dump_solution(sol, path, times=None, x=None, meta=None):
    """Write ``v`` in long format ``t,x,v``."""
    times = sol.times if times is None else np.asarray(times, dtype=float)
    x = sol.grid if x is None else np.asarray(x, dtype=float)
    return write_csv(path, ["t", "x", "v"], long_format(times, x, sol.surface(times, x)), meta)
