"""
Adaptive (sample-point) space-time intensity estimation.

The direct estimator sums one kernel per event with that event's own
bandwidths.  The partition estimator groups events by the empirical
quantiles of their spatial and temporal bandwidths and adds up one
fixed-bandwidth FFT estimate per non-empty group, each with its own
uniform edge correction and the midpoint bandwidths of the group.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .bandwidths import AdaptiveBandwidths, PilotIntensities, bandwidth_fields
from .convolution import convolve, kernel_fft, pad
from .fixed import EDGE_FLOOR, IntensityGrid, check_aliasing, direct_edge, direct_numerator, estimate_fixed_fft
from .geom import BinnedWeights, Grid3D, PointPattern, voxel_index
from .kernels import KernelSpec, gauss1d

__all__ = [
    "MATMUL_MAX_AXIS",
    "PartitionScheme",
    "quantile_steps",
    "build_partition",
    "estimate_adaptive_partition",
    "estimate_adaptive_direct",
]

# largest spatial axis for which the partition route smooths by dense
# kernel-matrix products instead of FFTs
MATMUL_MAX_AXIS = 128


def quantile_steps(xi) -> int:
    """Number of bins ``1/xi``; rejects steps whose reciprocal is not an integer."""
    xi = float(xi)
    if not 0 < xi <= 1:
        raise ValueError(f"quantile step must lie in (0, 1], got {xi}")
    c = round(1.0 / xi)
    if abs(1.0 / xi - c) > 1e-9 * c:
        raise ValueError(f"1/xi must be an integer, got 1/{xi} = {1.0 / xi}")
    return int(c)


@dataclass(frozen=True, eq=False)
class PartitionScheme:
    """Quantile bins of the spatial and temporal bandwidths.

    ``bin_s[i]`` and ``bin_t[i]`` are 0-based bin indices of event ``i``.
    """

    xi1: float
    xi2: float
    eps_edges: np.ndarray
    delta_edges: np.ndarray
    bin_s: np.ndarray
    bin_t: np.ndarray

    @property
    def C1(self) -> int:
        return self.eps_edges.size - 1

    @property
    def C2(self) -> int:
        return self.delta_edges.size - 1

    @property
    def eps_mid(self) -> np.ndarray:
        return 0.5 * (self.eps_edges[:-1] + self.eps_edges[1:])

    @property
    def delta_mid(self) -> np.ndarray:
        return 0.5 * (self.delta_edges[:-1] + self.delta_edges[1:])

    def counts(self) -> np.ndarray:
        out = np.zeros((self.C1, self.C2), dtype=int)
        np.add.at(out, (self.bin_s, self.bin_t), 1)
        return out

    def groups(self):
        """Yield ``(a, b, event_indices)`` for non-empty bins in fixed order."""
        key = self.bin_s * self.C2 + self.bin_t
        order = np.argsort(key, kind="stable")
        keys, starts = np.unique(key[order], return_index=True)
        stops = np.append(starts[1:], order.size)
        for k, s, e in zip(keys, starts, stops):
            yield int(k // self.C2), int(k % self.C2), order[s:e]


def _assign(values, edges):
    # lowest bin closed on the left, all bins closed on the right
    idx = np.searchsorted(edges[1:], values, side="left")
    return np.clip(idx, 0, edges.size - 2)


def build_partition(bw: AdaptiveBandwidths, xi1: float, xi2: float) -> PartitionScheme:
    """Bin events by linear-interpolation empirical quantiles of their bandwidths."""
    C1, C2 = quantile_steps(xi1), quantile_steps(xi2)
    eps = np.asarray(bw.eps, dtype=float)
    delta = np.asarray(bw.delta, dtype=float)
    if eps.size < 1:
        raise ValueError("cannot partition an empty bandwidth set")
    eps_edges = np.quantile(eps, np.linspace(0.0, 1.0, C1 + 1))
    delta_edges = np.quantile(delta, np.linspace(0.0, 1.0, C2 + 1))
    # interpolation can leave the end points one ulp off the extremes
    eps_edges[0], eps_edges[-1] = eps.min(), eps.max()
    delta_edges[0], delta_edges[-1] = delta.min(), delta.max()
    eps_edges = np.maximum.accumulate(eps_edges)
    delta_edges = np.maximum.accumulate(delta_edges)
    return PartitionScheme(float(xi1), float(xi2), eps_edges, delta_edges,
                           _assign(eps, eps_edges), _assign(delta, delta_edges))


def _spatial_edge(grid: Grid3D, eps: float):
    M1, M2, _ = grid.shape
    m1, m2, _ = grid.spacing
    g = lambda u: gauss1d(u, eps)  # noqa: E731
    kf = kernel_fft((g, g), (M1, M2), (m1, m2))
    return m1 * m2 * convolve(pad(grid.spatial_inside.astype(float)), kf), kf


def _temporal_edge(grid: Grid3D, delta: float):
    M3, m3 = grid.shape[2], grid.spacing[2]
    kf = kernel_fft((lambda u: gauss1d(u, delta),), (M3,), (m3,))
    return m3 * convolve(pad(grid.temporal_inside.astype(float)), kf), kf


def _partition_fft3d(weights_of, scheme: PartitionScheme, grid: Grid3D):
    lam = np.zeros(grid.shape)
    mass = 0.0
    for a, b, members in scheme.groups():
        kern = KernelSpec(scheme.eps_mid[a], scheme.delta_mid[b])
        est = estimate_fixed_fft(weights_of(members), kern)
        lam += est.lam
        mass += float(np.sum(est.lam * est.edge)) * grid.volume
    return lam, mass


def _toeplitz(M: int, m: float, h: float) -> np.ndarray:
    """Matrix of kernel weights between voxel centres along one axis."""
    ell = np.arange(M)
    return gauss1d(m * (ell[:, None] - ell[None, :]), h)


def _partition_factored(idx, scheme: PartitionScheme, grid: Grid3D, workers=None, smoothing: str = "fft"):
    """Same sum as the per-bin 3D route, reorganised by spatial bin.

    The window mask is a product of a spatial mask and the time interval,
    and the kernel is a product too, so each bin's edge factor splits into
    a spatial and a temporal factor.  Division by the temporal factor then
    commutes with spatial smoothing, leaving one 2D smoothing pass per
    spatial bin instead of three 3D FFTs per bin pair.

    ``smoothing`` picks how the discrete convolutions are evaluated:
    zero-padded FFTs, or products with the (Toeplitz) kernel matrices of
    each axis.  Both give the same sums; the matrix form is faster on
    small grids.
    """
    M1, M2, M3 = grid.shape
    m1, m2, m3 = grid.spacing
    dense = smoothing == "matmul"
    lam = np.zeros(grid.shape)
    mass = 0.0
    smask = grid.spatial_inside
    smask_f = smask.astype(float)
    tmask_f = grid.temporal_inside.astype(float)
    t_cache = {}
    groups_by_a: dict[int, list] = {}
    for a, b, members in scheme.groups():
        groups_by_a.setdefault(a, []).append((b, members))

    for a, groups in groups_by_a.items():
        eps = scheme.eps_mid[a]
        if dense:
            Gx, Gy = _toeplitz(M1, m1, eps), _toeplitz(M2, m2, eps)
            es = m1 * m2 * (Gx @ smask_f @ Gy.T)
        else:
            es, ks = _spatial_edge(grid, eps)
        es_min = es[smask].min() if smask.any() else 0.0
        acc = np.zeros((M1 * M2, M3))
        for b, members in groups:
            if b not in t_cache:
                if dense:
                    Gt = _toeplitz(M3, m3, scheme.delta_mid[b])
                    t_cache[b] = (m3 * (Gt @ tmask_f), Gt)
                else:
                    t_cache[b] = _temporal_edge(grid, scheme.delta_mid[b])
            et, kt = t_cache[b]
            ii = idx[members]
            mass += float(np.sum(es[ii[:, 0], ii[:, 1]] * et[ii[:, 2]]))
            if es_min * et.min() < EDGE_FLOOR:
                # floor would bite: fall back to the exact per-bin route
                w = np.zeros(grid.shape)
                np.add.at(w, (ii[:, 0], ii[:, 1], ii[:, 2]), 1.0)
                kern = KernelSpec(eps, scheme.delta_mid[b])
                lam += estimate_fixed_fft(BinnedWeights(grid, w), kern).lam
                continue
            cols, inv = np.unique(ii[:, 0] * M2 + ii[:, 1], return_inverse=True)
            if dense:
                w = np.zeros((cols.size, M3))
                np.add.at(w, (inv, ii[:, 2]), 1.0)
                wt = w @ kt.T
            else:
                w = np.zeros((cols.size, 2 * M3))
                np.add.at(w, (inv, ii[:, 2]), 1.0)
                wt = sfft.irfft(sfft.rfft(w, axis=1, workers=workers) * kt, n=2 * M3, axis=1,
                                workers=workers)[:, :M3]
            acc[cols] += wt / et
        if not acc.any():
            continue
        acc = acc.reshape(M1, M2, M3)
        if dense:
            sm = np.matmul(Gy, (Gx @ acc.reshape(M1, -1)).reshape(M1, M2, M3))
        else:
            # padded 2D convolution with pruned transforms: the upper halves
            # of the input are zero and only the lower block is kept
            F = sfft.rfft(acc, n=2 * M2, axis=1, workers=workers)
            F = sfft.fft(F, n=2 * M1, axis=0, overwrite_x=True, workers=workers)
            F *= ks[:, :, None]
            F = sfft.ifft(F, axis=0, overwrite_x=True, workers=workers)[:M1]
            sm = sfft.irfft(F, n=2 * M2, axis=1, workers=workers)[:, :M2]
        sm /= np.maximum(es, EDGE_FLOOR)[:, :, None]
        lam += sm
    return lam, mass


def estimate_adaptive_partition(pattern: PointPattern, bw: AdaptiveBandwidths, scheme: PartitionScheme,
                                grid: Grid3D, *, method: str = "factored", smoothing: str = "auto",
                                workers=None) -> IntensityGrid:
    """Partition approximation of the adaptive estimator.

    Parameters
    ----------
    method : {"factored", "fft3d"}
        ``"fft3d"`` runs :func:`estimate_fixed_fft` on every non-empty bin;
        ``"factored"`` (default) computes the same sum with far fewer
        transforms.
    smoothing : {"auto", "fft", "matmul"}
        Convolution route for ``"factored"``.  ``"auto"`` uses kernel
        matrix products when both spatial axes have at most
        ``MATMUL_MAX_AXIS`` voxels and FFTs otherwise.
    workers : int, optional
        Passed to :mod:`scipy.fft`.
    """
    if scheme.bin_s.size != pattern.n:
        raise ValueError("partition scheme was built for a different pattern")
    check_aliasing(grid, scheme.eps_mid, scheme.delta_mid)
    counts = scheme.counts()
    if counts.sum() != pattern.n:
        raise AssertionError("partition does not cover every event exactly once")
    meta = dict(kind="adaptive-partition", xi1=scheme.xi1, xi2=scheme.xi2, n=pattern.n,
                eps_star=bw.eps_star, delta_star=bw.delta_star, bins_used=int((counts > 0).sum()))
    if pattern.n == 0:
        return IntensityGrid(grid, np.zeros(grid.shape), None, dict(meta, numerator_mass=0.0))

    idx = voxel_index(grid, pattern.xyt)
    if method == "fft3d":
        def weights_of(members):
            w = np.zeros(grid.shape)
            np.add.at(w, (idx[members, 0], idx[members, 1], idx[members, 2]), 1.0)
            return BinnedWeights(grid, w)
        lam, mass = _partition_fft3d(weights_of, scheme, grid)
    elif method == "factored":
        if smoothing == "auto":
            smoothing = "matmul" if max(grid.shape[:2]) <= MATMUL_MAX_AXIS else "fft"
        if smoothing not in ("fft", "matmul"):
            raise ValueError(f"unknown smoothing route {smoothing!r}")
        lam, mass = _partition_factored(idx, scheme, grid, workers, smoothing)
    else:
        raise ValueError(f"unknown partition method {method!r}")
    lam = np.where(grid.inside, np.maximum(lam, 0.0), 0.0)
    return IntensityGrid(grid, lam, None, dict(meta, numerator_mass=mass))


def _per_event_direct(xyt, eps, delta, grid: Grid3D):
    """``sum_i K_i(c - x_i) / e_i(c)`` with each event's own edge factor.

    This is the limit of the partition sum as the bins shrink.  Both the
    window mask and the Gaussian kernel factor over axes, so each ``e_i`` is
    a product of small matrix Riemann sums.
    """
    cx, cy, ct = grid.centers()
    m1, m2, m3 = grid.spacing
    smask = grid.spatial_inside.astype(float)
    tmask = grid.temporal_inside.astype(float)
    lam = np.zeros(grid.shape)
    mass = 0.0
    for (x, y, t), e, d in zip(xyt, eps, delta):
        Gx = gauss1d(cx[:, None] - cx[None, :], e)
        Gy = gauss1d(cy[:, None] - cy[None, :], e)
        es = m1 * m2 * (Gx @ smask @ Gy.T)
        et = m3 * (gauss1d(ct[:, None] - ct[None, :], d) @ tmask)
        ks = np.multiply.outer(gauss1d(cx - x, e), gauss1d(cy - y, e))
        kt = gauss1d(ct - t, d)
        lam += np.multiply.outer(ks / np.maximum(es, EDGE_FLOOR), kt / et)
        mass += float((ks * smask).sum() * m1 * m2 * (kt * tmask).sum() * m3)
    return lam, mass


def estimate_adaptive_direct(pattern: PointPattern, bw: AdaptiveBandwidths, pilots: PilotIntensities | None,
                             grid: Grid3D, *, edge: str = "field", binned: bool = False) -> IntensityGrid:
    """Direct adaptive estimate: one kernel per event, Riemann-sum edge factor.

    Parameters
    ----------
    edge : {"field", "per-event"}
        ``"field"`` (default) divides by the integral of kernels whose
        bandwidths vary with the source location; those bandwidth fields
        come from the pilot fields through the same Abramson map (same
        normalisers, same trim) as the event bandwidths.  ``"per-event"``
        divides each event's kernel by its own uniform edge factor instead,
        which is what the partition sum converges to.
    binned : bool
        Move events to their voxel centroids first.
    """
    if bw.eps.size != pattern.n:
        raise ValueError("bandwidths were built for a different pattern")
    check_aliasing(grid, bw.eps if pattern.n else bw.eps_star, bw.delta if pattern.n else bw.delta_star)
    xyt = pattern.xyt
    if binned and pattern.n:
        idx = voxel_index(grid, xyt)
        xyt = np.column_stack([grid.axis_centers(a)[idx[:, a]] for a in range(3)])
    inside = grid.inside
    meta = dict(kind="adaptive-direct", n=pattern.n, eps_star=bw.eps_star, delta_star=bw.delta_star,
                edge=edge, binned=binned)

    if edge == "per-event":
        lam, mass = _per_event_direct(xyt, bw.eps, bw.delta, grid)
        lam = np.where(inside, lam, 0.0)
        return IntensityGrid(grid, lam, None, dict(meta, numerator_mass=mass))
    if edge != "field":
        raise ValueError(f"unknown edge correction {edge!r}")
    if pilots is None:
        raise ValueError("the field edge correction needs the pilot intensities")
    eps_field, delta_field = bandwidth_fields(bw, pilots)
    num = direct_numerator(xyt, bw.eps, bw.delta, grid)
    e = np.maximum(direct_edge(eps_field, delta_field, grid), EDGE_FLOOR)
    lam = np.where(inside, num / e, 0.0)
    meta["numerator_mass"] = float(num[inside].sum() * grid.volume)
    return IntensityGrid(grid, lam, np.where(inside, e, 0.0), meta)
