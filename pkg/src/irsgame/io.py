"""Table and manifest serialization."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return str(x)


def write_table(path, header, rows):
    """Write a comma-separated table with a header row; floats use ``repr``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])
    return path


def read_table(path):
    """Read a table back as ``(header, rows)`` with numeric cells parsed."""
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = []
        for raw in r:
            row = []
            for x in raw:
                try:
                    row.append(float(x))
                except ValueError:
                    row.append(x)
            rows.append(row)
    return header, rows


def trajectory_header(G):
    return (["t"] + [f"p_{g + 1}" for g in range(G)] + [f"u_{g + 1}" for g in range(G)]
            + ["u_bar"])


def write_trajectory(path, traj):
    G = traj.shares.shape[1]
    util = traj.utilities if traj.utilities is not None else np.full_like(traj.shares, math.nan)
    ubar = (traj.average_utilities if traj.average_utilities is not None
            else np.full(len(traj), math.nan))
    rows = (
        [t, *p, *u, ub]
        for t, p, u, ub in zip(traj.times, traj.shares, util, ubar)
    )
    return write_table(path, trajectory_header(G), rows)


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")
