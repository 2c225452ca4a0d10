"""LGRID v1 text grids and PGM (P2) export.

An LGRID file is one JSON header line followed by the occupancy as rows of
``0``/``1`` characters.  In 3D the slabs along the first axis are separated
by blank lines.  Writing is canonical, so read -> write is byte-identical.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .lattice import LatticeSet

MAGIC = "LGRID v1"


class GridFormatError(ValueError):
    pass


def dumps(S: LatticeSet) -> str:
    header = {
        "format": MAGIC,
        "dim": S.dim,
        "shape": list(S.shape),
        "spacing": S.spacing,
        "origin": list(S.origin),
    }
    lines = [json.dumps(header)]
    occ = S.occupancy.astype(np.uint8)
    if S.dim == 1:
        lines.append("".join("01"[v] for v in occ))
    elif S.dim == 2:
        lines.extend("".join("01"[v] for v in row) for row in occ)
    else:
        for k, slab in enumerate(occ):
            if k:
                lines.append("")
            lines.extend("".join("01"[v] for v in row) for row in slab)
    return "\n".join(lines) + "\n"


def loads(text: str) -> LatticeSet:
    lines = text.split("\n")
    if not lines or not lines[0].strip():
        raise GridFormatError("missing header line")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise GridFormatError(f"bad header: {exc}") from None
    for key in ("dim", "shape", "spacing", "origin"):
        if key not in header:
            raise GridFormatError(f"header lacks '{key}'")
    if header.get("format", MAGIC) != MAGIC:
        raise GridFormatError(f"unsupported format {header['format']!r}")
    dim = int(header["dim"])
    shape = tuple(int(s) for s in header["shape"])
    if dim not in (1, 2, 3) or len(shape) != dim or len(header["origin"]) != dim:
        raise GridFormatError("inconsistent dim/shape/origin")
    body = lines[1:]
    if body and body[-1] == "":
        body = body[:-1]

    def parse_rows(rows, ncols):
        out = np.zeros((len(rows), ncols), dtype=bool)
        for i, row in enumerate(rows):
            if len(row) != ncols or set(row) - {"0", "1"}:
                raise GridFormatError(f"malformed row {row[:40]!r}")
            out[i] = np.frombuffer(row.encode(), dtype=np.uint8) == ord("1")
        return out

    if dim == 1:
        rows = body if shape[0] else []
        if shape[0] == 0:
            occ = np.zeros(0, dtype=bool)
        else:
            if len(rows) != 1:
                raise GridFormatError("1D grid must have one row")
            occ = parse_rows(rows, shape[0])[0]
    elif dim == 2:
        if len(body) != shape[0] and not (shape[0] == 0 and not body):
            raise GridFormatError(f"expected {shape[0]} rows, got {len(body)}")
        occ = parse_rows(body, shape[1]) if shape[0] else np.zeros(shape, dtype=bool)
    else:
        slabs, cur = [], []
        for row in body:
            if row == "":
                slabs.append(cur)
                cur = []
            else:
                cur.append(row)
        if body:
            slabs.append(cur)
        if len(slabs) != shape[0] or any(len(s) != shape[1] for s in slabs):
            raise GridFormatError("3D slab layout does not match shape")
        occ = np.stack([parse_rows(s, shape[2]) for s in slabs]) if shape[0] else np.zeros(shape, dtype=bool)
    return LatticeSet(occ.reshape(shape), float(header["spacing"]), tuple(header["origin"]))


def write_lgrid(S: LatticeSet, path) -> None:
    Path(path).write_text(dumps(S))


def read_lgrid(path) -> LatticeSet:
    return loads(Path(path).read_text())


def to_pgm(S: LatticeSet) -> str:
    """Plain PGM, occupied cells black (0) and empty cells white (255)."""
    if S.dim != 2:
        raise ValueError("PGM export is 2D only")
    rows, cols = S.shape
    px = np.where(S.occupancy, 0, 255)
    body = "\n".join(" ".join(str(v) for v in row) for row in px)
    return f"P2\n{cols} {rows}\n255\n{body}\n"


def write_pgm(S: LatticeSet, path) -> None:
    Path(path).write_text(to_pgm(S))
