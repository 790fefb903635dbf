"""Text output: field dumps, diagnostics CSV and ``key: value`` records."""
from __future__ import annotations

import csv
import math
import re
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .grid import Grid, State

_HEADER = re.compile(r"#\s*t=(\S+)\s+n=(\d+)\s+length=(\S+)")


def fmt(v: float) -> str:
    """Fixed 17-significant-digit decimal, so values round-trip exactly."""
    return f"{float(v):.17g}"


def dump_fields(path: str | Path, t: float, s: State) -> None:
    """Write ``# t=.. n=.. length=..`` then one ``x u eta`` row per node."""
    g = s.grid
    rows = np.column_stack([g.x, s.u.values, s.eta.values])
    with open(path, "w") as fh:
        fh.write(f"# t={fmt(t)} n={g.n} length={fmt(g.length)}\n")
        for r in rows:
            fh.write(f"{fmt(r[0])} {fmt(r[1])} {fmt(r[2])}\n")


def read_fields(path: str | Path) -> tuple[float, State]:
    """Inverse of :func:`dump_fields`."""
    with open(path) as fh:
        head = fh.readline()
        m = _HEADER.match(head.strip())
        if m is None:
            raise ValueError(f"{path}: bad field-dump header {head.strip()!r}")
        t, n, length = float(m.group(1)), int(m.group(2)), float(m.group(3))
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (n, 3):
        raise ValueError(f"{path}: expected {n} rows of 3 columns, got {data.shape}")
    g = Grid(n, length)
    return t, State.from_arrays(g, data[:, 1], data[:, 2])


def diagnostics_header(n_waves: int) -> list[str]:
    N = n_waves
    cols = ["t", "E", "F", "min_one_plus_eta", "d_X"]
    cols += [f"x_{i}" for i in range(1, N + 1)]
    cols += [f"xdot_{i}" for i in range(1, N + 1)]
    cols += [f"sep_{j}" for j in range(2, N + 1)]
    cols += [f"I_{j}" for j in range(2, N + 1)]
    cols += [f"a_{i}" for i in range(1, N + 1)]
    return cols


def write_diagnostics(path: str | Path, n_waves: int, rows: Iterable[Sequence[float]]) -> None:
    header = diagnostics_header(n_waves)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            if len(r) != len(header):
                raise ValueError(f"row has {len(r)} values, header has {len(header)}")
            w.writerow([fmt(v) for v in r])


def read_diagnostics(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        data = np.array([[float(v) for v in row] for row in rd]).reshape(-1, len(header))
    return {h: data[:, i] for i, h in enumerate(header)}


def write_record(path: str | Path, items: Mapping[str, object]) -> None:
    """``key: value`` lines; floats in 17-digit form, sequences comma-separated."""
    with open(path, "w") as fh:
        fh.write(format_record(items))


def format_record(items: Mapping[str, object]) -> str:
    lines = []
    for k, v in items.items():
        lines.append(f"{k}: {_value(v)}")
    return "\n".join(lines) + "\n"


def _value(v) -> str:
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, (float, np.floating)):
        return fmt(v) if math.isfinite(v) else str(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(_value(x) for x in v)
    return str(v)
