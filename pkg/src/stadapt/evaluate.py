"""Density-scale ISE and the partition-vs-direct benchmark."""

from __future__ import annotations

import csv
import time
from dataclasses import astuple, dataclass, fields

import numpy as np

from .adaptive import build_partition, estimate_adaptive_direct, estimate_adaptive_partition
from .bandwidths import abramson_bandwidths, oversmooth_bandwidth, pilot_intensities, temporal_plugin_bandwidth
from .fixed import IntensityGrid
from .geom import make_grid
from .simulate import GneitingParams, SimConfig, TEST_POLYGON, simulate_lgcp
from .geom import SpatialWindow, TimeInterval

__all__ = [
    "ise_density_scale",
    "BenchmarkRecord",
    "pattern_seeds",
    "run_bins_experiment",
    "write_records",
    "read_records",
    "median_ise",
    "check_refinement_trend",
]


def ise_density_scale(fhat: IntensityGrid, f: IntensityGrid) -> float:
    """Integrated squared error after normalising both fields to unit mass.

    Integrals are midpoint Riemann sums over the window mask.
    """
    g = f.grid
    if fhat.grid.shape != g.shape or not np.array_equal(fhat.grid.inside, g.inside):
        raise ValueError("ISE needs estimates on identical grids and masks")
    V = g.volume
    inside = g.inside
    a = fhat.lam[inside]
    b = f.lam[inside]
    ia, ib = a.sum() * V, b.sum() * V
    if not (ia > 0 and ib > 0):
        raise ValueError("cannot normalise a field with zero integral")
    return float(V * np.sum((a / ia - b / ib) ** 2))


@dataclass
class BenchmarkRecord:
    pattern_id: int
    n: int
    m1: int
    m2: int
    m3: int
    xi1: float
    xi2: float
    ise: float
    time_partition_s: float
    time_direct_s: float
    seed: int


_HEADER = [f.name for f in fields(BenchmarkRecord)]


def pattern_seeds(seed: int, n_patterns: int) -> list[int]:
    """Independent 63-bit seeds, one per replication."""
    children = np.random.SeedSequence(seed).spawn(n_patterns)
    return [int(c.generate_state(1, np.uint64)[0] >> np.uint64(1)) for c in children]


def run_bins_experiment(n_patterns: int, params: GneitingParams, xi_grid, shape=(64, 64, 32), seed: int = 0,
                        window=None, interval=None, sim_shape=(16, 16, 16), progress=None):
    """Simulate patterns and compare partition estimates against the direct one.

    For each pattern: simulate, select global bandwidths, compute pilots
    and Abramson bandwidths, then time the direct estimate and one
    partition estimate per ``(xi1, xi2)`` pair.  Only the estimation calls
    are timed.

    Returns
    -------
    list of BenchmarkRecord, in pattern order then ``xi_grid`` order.
    """
    window = SpatialWindow(TEST_POLYGON) if window is None else window
    interval = TimeInterval(0.0, 1.0) if interval is None else interval
    grid = make_grid(window, interval, *shape)
    records = []
    for pid, s in enumerate(pattern_seeds(seed, n_patterns)):
        try:
            pattern, _ = simulate_lgcp(SimConfig(params, window, interval, tuple(sim_shape), s))
            eps_star = oversmooth_bandwidth(pattern)
            delta_star = temporal_plugin_bandwidth(pattern.t)
            pilots = pilot_intensities(pattern, eps_star, delta_star, grid)
            bw = abramson_bandwidths(pattern, eps_star, delta_star, pilots)
            t0 = time.perf_counter()
            direct = estimate_adaptive_direct(pattern, bw, pilots, grid)
            t_direct = time.perf_counter() - t0
            for xi1, xi2 in xi_grid:
                scheme = build_partition(bw, xi1, xi2)
                t0 = time.perf_counter()
                part = estimate_adaptive_partition(pattern, bw, scheme, grid)
                t_part = time.perf_counter() - t0
                records.append(BenchmarkRecord(pid, pattern.n, *shape, float(xi1), float(xi2),
                                               ise_density_scale(part, direct), t_part, t_direct, s))
        except Exception as exc:
            raise RuntimeError(f"pattern {pid} (seed {s}) failed: {exc}") from exc
        if progress:
            progress(pid)
    return records


def write_records(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_HEADER)
        for r in records:
            w.writerow([repr(v) if isinstance(v, float) else v for v in astuple(r)])


def read_records(path):
    out = []
    types = [f.type for f in fields(BenchmarkRecord)]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if next(reader) != _HEADER:
            raise ValueError(f"{path}: unexpected records header")
        for row in reader:
            out.append(BenchmarkRecord(*[int(v) if t in (int, "int") else float(v) for v, t in zip(row, types)]))
    return out


def median_ise(records) -> dict:
    """Median ISE per ``(xi1, xi2)`` pair."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.xi1, r.xi2), []).append(r.ise)
    return {k: float(np.median(v)) for k, v in groups.items()}


def check_refinement_trend(records, pairs=None):
    """Assert median ISE does not increase as both quantile steps shrink.

    ``pairs`` defaults to the diagonal ``xi1 == xi2`` pairs present in the
    records, ordered from coarse to fine.  Returns the ordered medians.
    """
    med = median_ise(records)
    if pairs is None:
        pairs = sorted((k for k in med if k[0] == k[1]), reverse=True)
    values = [med[p] for p in pairs]
    for (p, v), (q, w) in zip(zip(pairs, values), zip(pairs[1:], values[1:])):
        if w > v:
            raise AssertionError(f"median ISE rose from {v:.4g} at xi={p} to {w:.4g} at xi={q}")
    return list(zip(pairs, values))
