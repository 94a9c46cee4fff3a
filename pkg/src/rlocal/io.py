"""Plain-text artifacts: matrix CSV, permutation CSV, result tables, PGM images."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import BlockPartition, BlockPermutation

__all__ = [
    "DataError",
    "fmt",
    "read_matrix_csv",
    "write_matrix_csv",
    "read_permutation_csv",
    "write_permutation_csv",
    "write_table",
    "read_table",
    "read_pgm",
    "write_pgm",
    "read_image",
    "config_header",
]


class DataError(ValueError):
    """Input file could not be parsed or has the wrong shape."""


def fmt(x) -> str:
    """Fixed 17-significant-digit text for floats, plain text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return "" if x is None else str(x)


def _comment_lines(lines: Iterable[str]) -> list[str]:
    return [f"# {line}\n" for line in lines]


def read_matrix_csv(path, name: str = "matrix") -> np.ndarray:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"{name}: cannot read {path}: {exc.strerror}") from None
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise DataError(f"{name}: {path} is empty")
    try:
        data = [[float(v) for v in row.split(",")] for row in rows]
    except ValueError as exc:
        raise DataError(f"{name}: {path}: {exc}") from None
    widths = {len(r) for r in data}
    if len(widths) != 1:
        raise DataError(f"{name}: {path} has ragged rows (widths {sorted(widths)})")
    arr = np.array(data)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name}: {path} contains non-finite values")
    return arr


def write_matrix_csv(path, M, header: Sequence[str] = ()) -> None:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, None]
    with open(path, "w", newline="") as fh:
        fh.writelines(_comment_lines(header))
        for row in M:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_permutation_csv(path, p: BlockPermutation, header: Sequence[str] = ()) -> None:
    with open(path, "w", newline="") as fh:
        fh.writelines(_comment_lines(header))
        fh.write("source,dest\n")
        for src, dst in enumerate(p.destinations()):
            fh.write(f"{src},{int(dst)}\n")


def read_permutation_csv(path, partition: BlockPartition | None = None) -> BlockPermutation:
    """Read a ``source,dest`` table (0-based rows) into a permutation."""
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    except OSError as exc:
        raise DataError(f"permutation: cannot read {path}: {exc.strerror}") from None
    if lines and not lines[0].split(",")[0].strip().lstrip("-").isdigit():
        lines = lines[1:]
    try:
        pairs = sorted(tuple(int(v) for v in ln.split(",")) for ln in lines)
    except ValueError as exc:
        raise DataError(f"permutation: {path}: {exc}") from None
    n = len(pairs)
    if n == 0 or any(len(p) != 2 for p in pairs) or [p[0] for p in pairs] != list(range(n)):
        raise DataError(f"permutation: {path} must list every source row 0..n-1 exactly once")
    partition = partition or BlockPartition((n,))
    try:
        return BlockPermutation.from_global(partition, [p[1] for p in pairs])
    except ValueError as exc:
        raise DataError(f"permutation: {path}: {exc}") from None


def write_table(path, columns: Sequence[str], rows: Iterable[Mapping], header: Sequence[str] = ()) -> None:
    with open(path, "w", newline="") as fh:
        fh.writelines(_comment_lines(header))
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(row.get(c)) for c in columns])


def read_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def config_header(tool: str, command: str, config: Mapping) -> list[str]:
    return [f"{tool} {command}", "config: " + json.dumps(config, sort_keys=True, separators=(",", ":"))]


def _pgm_tokens(data: bytes, count: int):
    """First `count` whitespace-separated header tokens and the offset after them."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DataError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos + 1


def read_pgm(path) -> np.ndarray:
    """Binary 8-bit PGM (P5) as a float array scaled to [0, 1]."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DataError(f"image: cannot read {path}: {exc.strerror}") from None
    try:
        (magic, w, h, maxval), off = _pgm_tokens(data, 4)
        w, h, maxval = int(w), int(h), int(maxval)
    except (DataError, ValueError):
        raise DataError(f"image: {path} has a malformed PGM header") from None
    if magic != b"P5" or not 0 < maxval < 256:
        raise DataError(f"image: {path} is not an 8-bit binary PGM")
    pix = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=off) if len(data) >= off + w * h else None
    if pix is None:
        raise DataError(f"image: {path} is truncated")
    return pix.reshape(h, w).astype(np.float64) / maxval


def write_pgm(path, img) -> None:
    img = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(np.rint(img * 255).astype(np.uint8).tobytes())


def read_image(path) -> np.ndarray:
    """PGM or single-image CSV; CSV values above 1 are read as 8-bit levels."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return read_pgm(path)
    img = read_matrix_csv(path, "image")
    if img.max() > 1.0:
        img = img / 255.0
    return img
