"""MOTChallenge-style text formats plus the embedding sidecar.

Detections / results (10 columns)::

    frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z

Detections carry ``id = -1``. The trailing world coordinates are ignored on
read and written as ``-1``.

Ground truth (9 columns, MOT ``gt.txt`` layout)::

    frame,id,bb_left,bb_top,bb_width,bb_height,mark,class,visibility

Embedding sidecar: one header line followed by N comma-separated rows, row i
belonging to detection row i of the matching detection file::

    # hybridsort-embeddings v1 dim=D count=N dtype=float64
"""
from __future__ import annotations

import configparser
import io
import math
import os
import re
import tempfile
from collections import Counter
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .geometry import Box
from .tracker import Detection, TrackOutput

warnings: Counter = Counter()

EMBEDDING_HEADER = re.compile(
    r"^#\s*hybridsort-embeddings\s+v1\s+dim=(?P<dim>\d+)\s+count=(?P<count>\d+)\s+dtype=(?P<dtype>\w+)\s*$"
)


class FormatError(ValueError):
    """Malformed input file; the message names the file and line."""


class ResultRow(NamedTuple):
    frame: int
    track_id: int
    box: Box
    confidence: float


class GTRow(NamedTuple):
    frame: int
    object_id: int
    box: Box
    visibility: float


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_int(tok: str, what: str, where: str) -> int:
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        val = float(tok)
    except ValueError:
        raise FormatError(f"{where}: {what} {tok!r} is not a number") from None
    if not val.is_integer():
        raise FormatError(f"{where}: {what} {tok!r} is not an integer")
    return int(val)


def _parse_float(tok: str, what: str, where: str) -> float:
    try:
        val = float(tok)
    except ValueError:
        raise FormatError(f"{where}: {what} {tok!r} is not a number") from None
    if not math.isfinite(val):
        raise FormatError(f"{where}: {what} {tok!r} is not finite")
    return val


def _rows(path, n_fields: int):
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = [f.strip() for f in line.split(",")]
        where = f"{path}:{lineno}"
        if len(fields) != n_fields:
            raise FormatError(f"{where}: expected {n_fields} fields, found {len(fields)}")
        yield lineno, where, fields


def _parse_geometry(fields: Sequence[str], where: str) -> tuple[int, int, Box]:
    frame = _parse_int(fields[0], "frame", where)
    obj = _parse_int(fields[1], "id", where)
    if frame < 1:
        raise FormatError(f"{where}: frame must be >= 1, got {frame}")
    left, top, w, h = (_parse_float(t, n, where) for t, n in zip(fields[2:6], ("bb_left", "bb_top", "bb_width", "bb_height")))
    if w < 0 or h < 0:
        raise FormatError(f"{where}: negative box size {w}x{h}")
    return frame, obj, Box.from_ltwh(left, top, w, h)


def read_detections(path) -> dict[int, list[Detection]]:
    """Group detection rows by frame, preserving row order within a frame.

    ``Detection.index`` is the 0-based row position in the file, which is how
    embedding sidecar rows are aligned. Confidences outside [0, 1] are clamped
    and counted in ``warnings['confidence_clamped']``.
    """
    frames: dict[int, list[Detection]] = {}
    for idx, (lineno, where, fields) in enumerate(_rows(path, 10)):
        frame, _, box = _parse_geometry(fields, where)
        conf = _parse_float(fields[6], "conf", where)
        if not 0.0 <= conf <= 1.0:
            warnings["confidence_clamped"] += 1
            conf = min(1.0, max(0.0, conf))
        frames.setdefault(frame, []).append(Detection(box=box, confidence=conf, index=idx))
    return dict(sorted(frames.items()))


def read_results(path) -> list[ResultRow]:
    out = []
    for lineno, where, fields in _rows(path, 10):
        frame, tid, box = _parse_geometry(fields, where)
        out.append(ResultRow(frame, tid, box, _parse_float(fields[6], "conf", where)))
    return out


def format_result_row(frame: int, track_id: int, box: Box, conf: float) -> str:
    return (
        f"{frame},{track_id},{box.x1:.2f},{box.y1:.2f},{box.width:.2f},{box.height:.2f},{conf:.4f},-1,-1,-1"
    )


def write_results(path, outputs: Iterable[tuple[int, TrackOutput]]) -> None:
    """Write ``(frame, TrackOutput)`` pairs sorted by (frame, id)."""
    rows = sorted(((f, o.track_id, o.box, o.confidence) for f, o in outputs), key=lambda r: (r[0], r[1]))
    text = "".join(format_result_row(*r) + "\n" for r in rows)
    _atomic_write(path, text)


def write_detections(path, frames: dict[int, list[Detection]]) -> None:
    lines = []
    for f in sorted(frames):
        for d in frames[f]:
            b = d.box
            lines.append(f"{f},-1,{b.x1:.2f},{b.y1:.2f},{b.width:.2f},{b.height:.2f},{d.confidence:.4f},-1,-1,-1\n")
    _atomic_write(path, "".join(lines))


def read_ground_truth(path) -> list[GTRow]:
    out = []
    for lineno, where, fields in _rows(path, 9):
        frame, oid, box = _parse_geometry(fields, where)
        if oid < 1:
            raise FormatError(f"{where}: ground-truth id must be positive, got {oid}")
        out.append(GTRow(frame, oid, box, _parse_float(fields[8], "visibility", where)))
    return out


def write_ground_truth(path, rows: Iterable[GTRow]) -> None:
    ordered = sorted(rows, key=lambda r: (r.frame, r.object_id))
    text = "".join(
        f"{r.frame},{r.object_id},{r.box.x1:.2f},{r.box.y1:.2f},{r.box.width:.2f},{r.box.height:.2f},1,1,{r.visibility:.4f}\n"
        for r in ordered
    )
    _atomic_write(path, text)


def write_embeddings(path, vectors: Sequence[np.ndarray]) -> None:
    arr = np.asarray(vectors, dtype=float)
    if arr.ndim != 2:
        arr = arr.reshape(len(vectors), -1)
    lines = [f"# hybridsort-embeddings v1 dim={arr.shape[1]} count={arr.shape[0]} dtype=float64\n"]
    lines += [",".join(format(float(x), ".17g") for x in row) + "\n" for row in arr]
    _atomic_write(path, "".join(lines))


def read_embeddings(path, expected_rows: Optional[int] = None) -> list[np.ndarray]:
    """Read an embedding sidecar, checking its header against the body."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}:1: missing embedding header")
    m = EMBEDDING_HEADER.match(lines[0])
    if not m:
        raise FormatError(f"{path}:1: bad embedding header {lines[0]!r}")
    dim, count = int(m["dim"]), int(m["count"])
    if m["dtype"] not in ("float64", "float32"):
        raise FormatError(f"{path}:1: unsupported dtype {m['dtype']!r}")
    body = lines[1:]
    if len(body) != count:
        raise FormatError(f"{path}: header declares {count} rows but file holds {len(body)}")
    if expected_rows is not None and count != expected_rows:
        raise FormatError(f"{path}: {count} embeddings for {expected_rows} detection rows")
    out = []
    for i, line in enumerate(body):
        toks = line.split(",")
        if len(toks) != dim:
            raise FormatError(f"{path}: row {i} has {len(toks)} values, expected dim={dim}")
        try:
            vec = np.array([float(t) for t in toks])
        except ValueError:
            raise FormatError(f"{path}: row {i} holds a non-numeric value") from None
        if not np.all(np.isfinite(vec)):
            raise FormatError(f"{path}: row {i} holds a non-finite value")
        out.append(vec)
    return out


def attach_embeddings(frames: dict[int, list[Detection]], vectors: Sequence[np.ndarray]) -> dict[int, list[Detection]]:
    """Pair each detection with the sidecar row at its file index."""
    n = sum(len(v) for v in frames.values())
    if len(vectors) != n:
        raise FormatError(f"{len(vectors)} embeddings for {n} detection rows")
    return {
        f: [Detection(d.box, d.confidence, np.asarray(vectors[d.index]), d.index) for d in dets]
        for f, dets in frames.items()
    }


def write_seqinfo(path, name: str, length: int) -> None:
    """MOT ``seqinfo.ini`` carrying the sequence length (frames without rows still count)."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["Sequence"] = {"name": name, "seqLength": str(int(length))}
    buf = io.StringIO()
    cp.write(buf)
    _atomic_write(path, buf.getvalue())


def read_seqinfo(path) -> int:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(Path(path).read_text())
        return int(cp["Sequence"]["seqLength"])
    except (configparser.Error, KeyError, ValueError) as exc:
        raise FormatError(f"{path}: cannot read seqLength ({exc})") from None
