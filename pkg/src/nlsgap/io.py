"""Binary field dumps and CSV reports.

Field file layout (little endian)::

    b"NLSF" | u32 version = 1 | f64 L | u32 N | N^3 f64 samples

Samples are row-major over ``(j1, j2, j3)`` with ``j3`` fastest, each index
running from ``-N/2`` to ``N/2 - 1``, which is the in-memory centered order.

CSV files start with one ``# created ...`` comment line (the only
non-deterministic content), then a header row; reals are written with 17
significant digits.
"""

from __future__ import annotations

import csv
import struct
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import GridSpec, make_grid

__all__ = ["FieldFormatError", "write_field", "read_field", "write_csv", "read_csv",
           "fmt_real"]

MAGIC = b"NLSF"
VERSION = 1
_HEADER = struct.Struct("<4sIdI")


class FieldFormatError(ValueError):
    pass


def write_field(path, grid: GridSpec, f: np.ndarray) -> None:
    f = grid.check_field(f)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, grid.L, grid.N))
        fh.write(np.ascontiguousarray(f, dtype="<f8").tobytes())


def read_field(path, expect: GridSpec | None = None) -> tuple[GridSpec, np.ndarray]:
    """Load a field dump; with ``expect``, the header must match its L and N."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FieldFormatError(f"{path}: truncated header")
    magic, version, L, N = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FieldFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FieldFormatError(f"{path}: unsupported version {version}")
    if len(data) != _HEADER.size + 8 * N ** 3:
        raise FieldFormatError(f"{path}: expected {N ** 3} samples, "
                               f"got {(len(data) - _HEADER.size) / 8:g}")
    if expect is not None and (L != expect.L or N != expect.N):
        raise FieldFormatError(f"{path}: header L={L}, N={N} does not match "
                               f"requested L={expect.L}, N={expect.N}")
    try:
        grid = make_grid(L, N)
    except ValueError as exc:
        raise FieldFormatError(f"{path}: {exc}") from None
    f = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(grid.shape)
    return grid, f.astype(float)


def fmt_real(x) -> str:
    return format(float(x), ".17g")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# created {datetime.now(timezone.utc).isoformat()}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_real(v) if isinstance(v, (float, np.floating)) else v
                        for v in row])


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))
