"""
File formats.

* points: CSV with header ``x,y,t``
* polygon: CSV of ordered ``x,y`` vertices (header optional)
* interval: ``--t0/--t1`` or a JSON sidecar ``{"t0": ..., "t1": ...}``
* grids: one JSON header line, then little-endian float64 values with
  ``k`` (time) slowest and ``i`` (x) fastest
"""

from __future__ import annotations

import csv
import json
import logging
import os
from pathlib import Path

import numpy as np

from .fixed import IntensityGrid
from .geom import PointPattern, SpatialWindow, TimeInterval, make_grid

__all__ = [
    "read_polygon",
    "read_interval",
    "read_pattern",
    "write_pattern",
    "write_polygon",
    "write_grid",
    "read_grid",
    "write_csv_slices",
    "default_bin_counts",
]

log = logging.getLogger(__name__)

GRID_FORMAT = "stadapt-grid"


def _float(value, where):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{where}: not a number: {value!r}") from None
    if not np.isfinite(v):
        raise ValueError(f"{where}: non-finite value {value!r}")
    return v


def read_polygon(path) -> SpatialWindow:
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if lineno == 1 and [c.strip().lower() for c in row[:2]] == ["x", "y"]:
                continue
            if len(row) < 2:
                raise ValueError(f"{path}: row {lineno}: expected x,y")
            rows.append((_float(row[0], f"{path}: row {lineno}"), _float(row[1], f"{path}: row {lineno}")))
    return SpatialWindow(np.array(rows, dtype=float).reshape(-1, 2))


def read_interval(path) -> TimeInterval:
    with open(path) as fh:
        data = json.load(fh)
    unknown = set(data) - {"t0", "t1"}
    if unknown:
        raise ValueError(f"{path}: unknown interval keys {sorted(unknown)}")
    return TimeInterval(float(data["t0"]), float(data["t1"]))


def read_pattern(path, window: SpatialWindow, interval: TimeInterval | None = None, *, strict: bool = False):
    """Read a point CSV and keep the events inside ``window x interval``.

    When ``interval`` is omitted, a sidecar ``<path stem>.json`` is used.

    Returns
    -------
    pattern : PointPattern
    dropped : int
        Number of events outside the window or interval.
    """
    path = Path(path)
    if interval is None:
        sidecar = path.with_suffix(".json")
        if not sidecar.exists():
            raise ValueError(f"{path}: no time interval given and no sidecar {sidecar.name}")
        interval = read_interval(sidecar)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return PointPattern(np.zeros((0, 3)), window, interval), 0
        if [h.strip().lower() for h in header] != ["x", "y", "t"]:
            raise ValueError(f"{path}: row 1: header must be x,y,t, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}: row {lineno}: expected 3 fields, got {len(row)}")
            rows.append([_float(v, f"{path}: row {lineno}, column {c}") for v, c in zip(row, "xyt")])
    xyt = np.array(rows, dtype=float).reshape(-1, 3)
    ok = window.contains(xyt[:, 0], xyt[:, 1]) & interval.contains(xyt[:, 2]) if len(xyt) else np.zeros(0, bool)
    dropped = int((~ok).sum())
    if dropped:
        first = int(np.flatnonzero(~ok)[0]) + 2
        if strict:
            raise ValueError(f"{path}: {dropped} point(s) outside the window or interval, first at row {first}")
        log.warning("%s: dropped %d point(s) outside the window or interval", path, dropped)
    return PointPattern(xyt[ok], window, interval), dropped


def write_pattern(pattern: PointPattern, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "t"])
        for row in pattern.xyt:
            w.writerow([repr(float(v)) for v in row])


def write_polygon(window: SpatialWindow, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for x, y in window.vertices:
            w.writerow([repr(float(x)), repr(float(y))])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_grid(g: IntensityGrid, path):
    """Write ``g.lam`` as a JSON header line plus a float64 payload."""
    grid = g.grid
    header = {
        "format": GRID_FORMAT,
        "version": 1,
        "dims": list(grid.shape),
        "spacing": list(grid.spacing),
        "origin": list(grid.origin),
        "window": grid.window.vertices.tolist(),
        "interval": [grid.interval.t0, grid.interval.t1],
        "order": "k,j,i",
        "dtype": "<f8",
        "mask_sha256": grid.mask_hash(),
        "meta": _jsonable(g.meta),
    }
    payload = np.ascontiguousarray(g.lam.transpose(2, 1, 0), dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(payload)


def read_grid(path) -> IntensityGrid:
    with open(path, "rb") as fh:
        line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: bad grid header: {exc}") from None
    if header.get("format") != GRID_FORMAT:
        raise ValueError(f"{path}: not a {GRID_FORMAT} file")
    dims = tuple(int(d) for d in header["dims"])
    expected = 8 * int(np.prod(dims))
    if len(payload) != expected:
        raise ValueError(f"{path}: header dims {dims} need {expected} payload bytes, found {len(payload)}")
    grid = make_grid(SpatialWindow(np.array(header["window"])), TimeInterval(*header["interval"]), *dims)
    if grid.mask_hash() != header["mask_sha256"]:
        raise ValueError(f"{path}: window mask does not match header hash")
    if not (np.allclose(grid.spacing, header["spacing"], rtol=1e-12) and np.allclose(grid.origin, header["origin"], rtol=1e-12)):
        raise ValueError(f"{path}: spacing/origin inconsistent with window and interval")
    lam = np.frombuffer(payload, dtype="<f8").reshape(dims[::-1]).transpose(2, 1, 0).astype(float)
    return IntensityGrid(grid, lam, None, header.get("meta", {}))


def write_csv_slices(g: IntensityGrid, directory, prefix="slice"):
    """One CSV per time slice with columns ``x,y,t,lambda`` (on-mask voxels)."""
    os.makedirs(directory, exist_ok=True)
    grid = g.grid
    cx, cy, ct = grid.centers()
    X, Y = np.meshgrid(cx, cy, indexing="ij")
    paths = []
    width = len(str(grid.shape[2] - 1))
    for k, t in enumerate(ct):
        p = Path(directory) / f"{prefix}_{k:0{width}d}.csv"
        m = grid.inside[:, :, k]
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "t", "lambda"])
            for x, y, v in zip(X[m], Y[m], g.lam[:, :, k][m]):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(t)), repr(float(v))])
        paths.append(p)
    return paths


def default_bin_counts(n: int) -> tuple[int, int]:
    """``(round(n^(1/3)), round(n^(1/6)))``, each clamped to ``[1, n]``."""
    if n < 1:
        raise ValueError("need at least one event")
    c1 = int(round(n ** (1.0 / 3.0)))
    c2 = int(round(n ** (1.0 / 6.0)))
    return min(max(c1, 1), n), min(max(c2, 1), n)
