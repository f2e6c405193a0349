"""Reader/writer for the versioned trajectory text format.

Layout: a ``opdyn-traj v1`` header line, ``key=value`` metadata lines, one
line of Pauli column labels, then rows ``t c_1 ... c_K`` printed with 17
significant digits so round-trips are value-exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .exact import Trajectory
from .pauli import PauliBasis

TRAJ_HEADER = "opdyn-traj v1"


def write_trajectory(traj: Trajectory, path) -> None:
    lines = [TRAJ_HEADER]
    for key, value in traj.meta.items():
        lines.append(f"{key}={value}")
    lines.append(" ".join(traj.basis.labels))
    for t, row in zip(traj.times, traj.coeffs):
        lines.append(" ".join(f"{v:.17g}" for v in (t, *row)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory(path) -> Trajectory:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != TRAJ_HEADER:
        raise ValueError(f"{path}: not a {TRAJ_HEADER} file")
    meta = {}
    i = 1
    while i < len(text) and "=" in text[i]:
        key, _, value = text[i].partition("=")
        meta[key.strip()] = value.strip()
        i += 1
    if i >= len(text):
        raise ValueError(f"{path}: missing column label line")
    basis = PauliBasis.from_labels(tuple(text[i].split()))
    rows = [line.split() for line in text[i + 1:] if line.strip()]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.array([[float(v) for v in row] for row in rows])
    if data.shape[1] != len(basis) + 1:
        raise ValueError(f"{path}: row width does not match column count")
    return Trajectory(data[:, 0], basis, data[:, 1:], meta)
