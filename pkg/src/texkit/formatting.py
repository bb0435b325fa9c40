"""Stable numeric rendering for CLI output and CSV files.

Every float is printed in scientific notation with 9 significant digits
so output files are byte-stable across runs and usable as golden files.
"""

from __future__ import annotations

import numpy as np


def sci9(x: float) -> str:
    x = float(x)
    if x == 0.0:
        x = 0.0  # collapse -0.0
    return f"{x:.8e}"


def matrix_csv(matrix: np.ndarray, header: list[str] | None = None) -> str:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    lines = []
    if header is not None:
        lines.append(",".join(header))
    for row in matrix:
        lines.append(",".join(sci9(v) for v in row))
    return "\n".join(lines) + "\n"


def vector_csv(pairs: list[tuple], header: list[str]) -> str:
    lines = [",".join(header)]
    for row in pairs:
        lines.append(",".join(v if isinstance(v, str) else sci9(v) for v in row))
    return "\n".join(lines) + "\n"
