"""Oriented point files (``opts v1``) and minutiae CSV ingestion."""
from __future__ import annotations

import csv
import math
import os
from pathlib import Path
from typing import TextIO

import numpy as np

from .geometry import EmptySetError, PointSet

MAGIC = "opts"
VERSION = "v1"
MINUTIAE_FIELDS = ("x", "y", "theta_degrees", "quality")


class FormatError(ValueError):
    """Malformed input; carries the 1-based line and column of the problem."""

    def __init__(self, message: str, line: int, col: int = 1, path: str | None = None) -> None:
        self.line = line
        self.col = col
        self.path = path
        where = f"{path}:" if path else ""
        super().__init__(f"{where}{line}:{col}: {message}")


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def _fields(line: str) -> list[tuple[int, str]]:
    """Whitespace-separated tokens with their 1-based start columns."""
    out = []
    i, n = 0, len(line)
    while i < n:
        while i < n and line[i] in " \t\r":
            i += 1
        if i >= n:
            break
        j = i
        while j < n and line[j] not in " \t\r":
            j += 1
        out.append((i + 1, line[i:j]))
        i = j
    return out


def _number(tok: str, line: int, col: int, path, what: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise FormatError(f"{what}: not a number: {tok!r}", line, col, path) from None
    if not math.isfinite(v):
        raise FormatError(f"{what}: non-finite value {tok!r}", line, col, path)
    return v


def parse_opts(text: str, path: str | None = None, role: str = "background") -> PointSet:
    """Parse the text of an ``opts v1`` file. Angles are normalized to ``[0, 2*pi)``."""
    count = None
    rows: list[tuple[float, float, float]] = []
    last = 0
    for ln, raw in enumerate(text.split("\n"), start=1):
        toks = _fields(_strip_comment(raw))
        if not toks:
            continue
        last = ln
        if count is None:
            if len(toks) != 3 or toks[0][1] != MAGIC or toks[1][1] != VERSION:
                raise FormatError(f"expected header '{MAGIC} {VERSION} <count>'", ln, toks[0][0], path)
            col, tok = toks[2]
            if not tok.isdigit():
                raise FormatError(f"count must be a non-negative integer, got {tok!r}", ln, col, path)
            count = int(tok)
            continue
        if len(toks) != 3:
            col = toks[3][0] if len(toks) > 3 else len(raw.rstrip("\r")) + 1
            raise FormatError(f"expected 3 fields 'x y angle', got {len(toks)}", ln, col, path)
        if len(rows) == count:
            raise FormatError(f"more records than the declared count {count}", ln, toks[0][0], path)
        rows.append(tuple(_number(t, ln, c, path, name) for (c, t), name in zip(toks, ("x", "y", "angle"))))
    if count is None:
        raise FormatError(f"missing '{MAGIC} {VERSION} <count>' header", max(last, 1), 1, path)
    if len(rows) != count:
        raise FormatError(f"header declares {count} records, found {len(rows)}", max(last, 1), 1, path)
    return PointSet(np.array(rows, dtype=np.float64).reshape(-1, 3), role=role)


def load_opts(path: str | os.PathLike, role: str = "background") -> PointSet:
    p = Path(path)
    return parse_opts(p.read_text(encoding="utf-8"), str(p), role)


def format_opts(S: PointSet, comment: str | None = None) -> str:
    """17-significant-digit serialization, so ``parse_opts(format_opts(S)) == S``."""
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append(f"{MAGIC} {VERSION} {len(S)}")
    lines.extend(f"{x:.17g} {y:.17g} {a:.17g}" for x, y, a in S.data)
    return "\n".join(lines) + "\n"


def save_opts(S: PointSet, path: str | os.PathLike, comment: str | None = None) -> None:
    Path(path).write_text(format_opts(S, comment), encoding="utf-8")


def write_opts(S: PointSet, out: TextIO) -> None:
    out.write(format_opts(S))


# -- minutiae -----------------------------------------------------------------

def parse_minutiae(text: str, scale: float = 1.0, quality_min: int = 0, path: str | None = None) -> PointSet:
    """``x,y,theta_degrees,quality`` rows; an optional header row is skipped."""
    if not (scale > 0.0 and math.isfinite(scale)):
        raise ValueError(f"scale must be positive, got {scale}")
    rows = []
    seen = 0
    for ln, rec in enumerate(csv.reader(text.splitlines()), start=1):
        if not rec or all(not f.strip() for f in rec) or rec[0].lstrip().startswith("#"):
            continue
        if seen == 0 and tuple(f.strip().lower() for f in rec) == MINUTIAE_FIELDS:
            seen += 1
            continue
        seen += 1
        if len(rec) != 4:
            raise FormatError(f"expected 4 fields {','.join(MINUTIAE_FIELDS)}, got {len(rec)}", ln, 1, path)
        cols = np.cumsum([1] + [len(f) + 1 for f in rec[:-1]])
        x = _number(rec[0].strip(), ln, int(cols[0]), path, "x")
        y = _number(rec[1].strip(), ln, int(cols[1]), path, "y")
        t = _number(rec[2].strip(), ln, int(cols[2]), path, "theta_degrees")
        if not 0.0 <= t < 360.0:
            raise FormatError(f"theta_degrees must lie in [0, 360), got {t}", ln, int(cols[2]), path)
        q = rec[3].strip()
        try:
            quality = int(q)
        except ValueError:
            raise FormatError(f"quality: not an integer: {q!r}", ln, int(cols[3]), path) from None
        if quality >= quality_min:
            rows.append((x * scale, y * scale, math.radians(t)))
    if not rows:
        raise EmptySetError("no minutiae left after quality filtering")
    return PointSet(np.array(rows, dtype=np.float64), role="pattern")


def ingest_minutiae(path: str | os.PathLike, scale: float = 1.0, quality_min: int = 0) -> PointSet:
    p = Path(path)
    return parse_minutiae(p.read_text(encoding="utf-8"), scale, quality_min, str(p))
