"""Low-level CSV reading/writing shared by the persistence helpers.

All files written by this package start with a single comment line of the
form ``# typsgd v<version> config=<hash> seed=<seed>`` so outputs are
traceable to the run that produced them. Numeric cells are written with
``repr`` which round-trips float64 exactly.
"""

from __future__ import annotations

import hashlib
import os

from . import __version__
from .errors import CsvFormatError

COMMENT_PREFIX = "#"


def config_hash(text: str) -> str:
    """12-hex-digit digest of a canonicalized config text."""
    canonical = "\n".join(line.strip() for line in text.strip().splitlines())
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def provenance_line(config_digest: str = "none", seed: int | None = None) -> str:
    seed_part = "none" if seed is None else str(seed)
    return f"{COMMENT_PREFIX} typsgd v{__version__} config={config_digest} seed={seed_part}"


def format_number(x) -> str:
    # repr() is the shortest exact round-trip representation in py3
    return repr(float(x))


def write_rows(path, rows, header=None, config_digest="none", seed=None):
    """Write rows (iterables of cells) with the provenance comment line."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(provenance_line(config_digest, seed) + "\n")
        if header is not None:
            fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(c) for c in row) + "\n")
    os.replace(tmp, path)


def read_rows(path, has_header=False):
    """Read rows, skipping comment lines. Returns (header, rows of strings)."""
    header = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith(COMMENT_PREFIX):
                continue
            cells = line.split(",")
            if has_header and header is None:
                header = cells
                continue
            rows.append(cells)
    return header, rows


def parse_float(cell: str, row: int, column: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise CsvFormatError(
            f"non-numeric value {cell!r} at row {row}, column {column}",
            row=row,
            column=column,
        ) from None
