"""Append-only level checkpoints.

A checkpoint file is a sequence of gzip members, one per sealed level.  Each
member holds a JSON header line (depth, row count, word count, whether counts
follow, and the run parameters) followed by the raw little-endian ``uint64``
rows and, for games, one ``uint64`` count per row.
"""

from __future__ import annotations

import gzip
import json
import zlib
from pathlib import Path

import numpy as np


def start(path: str | Path) -> None:
    Path(path).write_bytes(b"")


def append_level(path: str | Path, header: dict, rows: np.ndarray,
                 counts: np.ndarray | None = None) -> None:
    head = dict(header, rows=int(rows.shape[0]), words=int(rows.shape[1]),
                counts=counts is not None)
    payload = json.dumps(head, sort_keys=True).encode() + b"\n"
    payload += np.ascontiguousarray(rows, "<u8").tobytes()
    if counts is not None:
        payload += np.ascontiguousarray(counts, "<u8").tobytes()
    with open(path, "ab") as fh:
        fh.write(gzip.compress(payload, mtime=0))


def _members(data: bytes):
    while data:
        d = zlib.decompressobj(16 + zlib.MAX_WBITS)
        yield d.decompress(data) + d.flush()
        data = d.unused_data


def read_levels(path: str | Path) -> list[tuple[dict, np.ndarray, np.ndarray | None]]:
    """Every complete level in the file, in order."""
    out = []
    for blob in _members(Path(path).read_bytes()):
        line, _, body = blob.partition(b"\n")
        head = json.loads(line)
        n, w = head["rows"], head["words"]
        rows = np.frombuffer(body[: n * w * 8], "<u8").astype(np.uint64).reshape(n, w)
        counts = None
        if head["counts"]:
            counts = np.frombuffer(body[n * w * 8: n * w * 8 + n * 8], "<u8").astype(np.uint64)
        out.append((head, rows, counts))
    return out


def resume_levels(path: str | Path, run: dict):
    """The latest levels whose run parameters equal ``run`` (maybe none)."""
    levels = []
    for x in read_levels(path):
        if x[0].get("run") != run:
            continue
        if x[0]["depth"] == 0:
            levels = []
        if x[0]["depth"] != len(levels):
            raise ValueError(f"checkpoint {path} is missing level {len(levels)}")
        levels.append(x)
    return levels


class Checkpointer:
    """Writes each sealed level of a run; optionally resumes a matching run."""

    def __init__(self, path: str | Path | None, resume: bool = False):
        self.path = Path(path) if path else None
        self.resume = resume

    def begin(self, run: dict) -> list[tuple[np.ndarray, np.ndarray | None]]:
        if self.path is None:
            return []
        if self.resume and self.path.exists():
            found = resume_levels(self.path, run)
            return [(rows, counts) for _, rows, counts in found]
        start(self.path)
        return []

    def level(self, run: dict, depth: int, rows: np.ndarray,
              counts: np.ndarray | None = None) -> None:
        if self.path is not None:
            append_level(self.path, {"depth": depth, "run": run}, rows, counts)
