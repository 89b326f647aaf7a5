"""Plain-text packing files, violation tables and cube-set dumps.

A packing file is one JSON header line followed by CSV placement rows::

    {"format": "polypack", "n": 2, "periods": [2.0, 3.46...], "bodies": [{...}]}
    body_ref,t1,t2
    0,0.0,0.0
    0,1.0,1.7320508075688772

Floats are written with ``repr`` so a round trip is exact. Rows carry
``r11..rnn`` rotation columns only when some placement is rotated.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .geometry import Body
from .packing import InvalidPackingError, PeriodicPacking, Violation

PathLike = Union[str, Path]
FORMAT = "polypack"


def _fmt(x: float) -> str:
    return repr(float(x))


def dumps_packing(packing: PeriodicPacking) -> str:
    n = packing.n
    header = {
        "format": FORMAT,
        "n": n,
        "periods": [float(p) for p in packing.period],
        "bodies": [b.to_record() for b in packing.bodies],
    }
    buf = io.StringIO()
    buf.write(json.dumps(header) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    cols = ["body_ref"] + [f"t{i + 1}" for i in range(n)]
    rot = packing.rotations
    if rot is not None:
        cols += [f"r{i + 1}{j + 1}" for i in range(n) for j in range(n)]
    w.writerow(cols)
    for k in range(len(packing)):
        row = [int(packing.body_ref[k])] + [_fmt(v) for v in packing.translations[k]]
        if rot is not None:
            row += [_fmt(v) for v in rot[k].ravel()]
        w.writerow(row)
    return buf.getvalue()


def loads_packing(text: str) -> PeriodicPacking:
    """Parse :func:`dumps_packing` output; malformed input raises :class:`InvalidPackingError`."""
    lines = text.splitlines()
    if not lines:
        raise InvalidPackingError("empty packing file")
    try:
        header = json.loads(lines[0])
        n = int(header["n"])
        periods = [float(p) for p in header["periods"]]
        bodies = tuple(Body.from_record(r) for r in header["bodies"])
    except (ValueError, KeyError, TypeError) as exc:
        raise InvalidPackingError(f"bad packing header: {exc}") from exc
    if header.get("format", FORMAT) != FORMAT:
        raise InvalidPackingError(f"unknown format {header.get('format')!r}")
    if len(periods) != n:
        raise InvalidPackingError(f"{len(periods)} periods for dimension {n}")
    rows = list(csv.reader(lines[1:]))
    if not rows:
        raise InvalidPackingError("missing column header row")
    cols = rows[0]
    want = ["body_ref"] + [f"t{i + 1}" for i in range(n)]
    rot_cols = [f"r{i + 1}{j + 1}" for i in range(n) for j in range(n)]
    if cols not in (want, want + rot_cols):
        raise InvalidPackingError(f"unexpected columns {cols}")
    data = [r for r in rows[1:] if r]
    try:
        arr = np.array([[float(v) for v in r] for r in data], dtype=float).reshape(-1, len(cols))
    except ValueError as exc:
        raise InvalidPackingError(f"bad placement row: {exc}") from exc
    ref = arr[:, 0]
    if np.any(ref != np.round(ref)):
        raise InvalidPackingError("body_ref must be an integer")
    rot = arr[:, 1 + n:].reshape(-1, n, n) if len(cols) > len(want) else None
    try:
        return PeriodicPacking(tuple(periods), bodies, ref.astype(np.intp), arr[:, 1:1 + n], rot)
    except ValueError as exc:
        raise InvalidPackingError(str(exc)) from exc


def write_packing(packing: PeriodicPacking, path: PathLike) -> None:
    Path(path).write_text(dumps_packing(packing))


def read_packing(path: PathLike) -> PeriodicPacking:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidPackingError(f"cannot read {path}: {exc}") from exc
    return loads_packing(text)


VIOLATION_COLUMNS = ("i", "j", "offset", "measure", "threshold", "witness")


def violations_csv(violations: Sequence[Violation]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VIOLATION_COLUMNS)
    for v in violations:
        wit = "" if v.witness is None else " ".join(_fmt(x) for x in v.witness)
        w.writerow([v.i, v.j, " ".join(str(int(o)) for o in v.offset),
                    _fmt(v.measure), _fmt(v.threshold), wit])
    return buf.getvalue()
