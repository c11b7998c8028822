"""
Bandwidth selection and Abramson square-root adaptive bandwidths.

Global bandwidths come from the maximal-smoothing rule in space and a
two-stage direct plug-in rule in time.  Per-event bandwidths follow

    eps_i = eps* / gamma_s * sqrt(n / lambda_s(u_i))

where ``lambda_s`` is a fixed-bandwidth pilot estimate of the spatial
marginal intensity and ``gamma_s`` the geometric mean of the square-root
factors, so that the geometric mean of ``eps_i`` is ``eps*``.  The temporal
bandwidths are built the same way from the temporal marginal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .convolution import convolve, kernel_fft, pad
from .geom import Grid3D, PointPattern, voxel_index
from .kernels import gauss1d

__all__ = [
    "PILOT_FLOOR",
    "TRIM",
    "oversmooth_bandwidth",
    "temporal_plugin_bandwidth",
    "PilotIntensities",
    "pilot_spatial",
    "pilot_temporal",
    "pilot_intensities",
    "constant_pilots",
    "AdaptiveBandwidths",
    "abramson_bandwidths",
    "bandwidth_fields",
]

PILOT_FLOOR = 1e-12
TRIM = 5.0

_SQRT2PI = np.sqrt(2.0 * np.pi)
_SQRTPI = np.sqrt(np.pi)


def _iqr(x):
    q75, q25 = np.percentile(x, [75, 25])
    return q75 - q25


def oversmooth_bandwidth(xy) -> float:
    """Maximal-smoothing spatial bandwidth ``1.085 * sigma * n^(-1/6)``.

    ``sigma`` is the smaller, over the two axes, of the average of the
    sample standard deviation and IQR / 1.34.

    Parameters
    ----------
    xy : PointPattern or array_like, shape (n, 2)
    """
    if isinstance(xy, PointPattern):
        xy = xy.xyt[:, :2]
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    n = xy.shape[0]
    if n < 2:
        raise ValueError("oversmoothing bandwidth needs at least 2 points")
    sigma = min(0.5 * (np.std(xy[:, a], ddof=1) + _iqr(xy[:, a]) / 1.34) for a in range(2))
    if not sigma > 0:
        raise ValueError("degenerate spatial spread: all points coincide")
    return 1.085 * sigma * n ** (-1.0 / 6.0)


def _phi_deriv(z, r):
    """r-th derivative of the standard normal density (r = 4 or 6)."""
    z2 = z * z
    if r == 4:
        he = z2 * z2 - 6.0 * z2 + 3.0
    elif r == 6:
        he = z2 * z2 * z2 - 15.0 * z2 * z2 + 45.0 * z2 - 15.0
    else:
        raise ValueError(r)
    return he * np.exp(-0.5 * z2) / _SQRT2PI


def _psi_hat(x, g, r, exact_max=4000, nbins=4096):
    """Kernel estimate of the density functional ``int f^(r) f``.

    Pairwise sums are exact up to ``exact_max`` points; larger samples are
    binned on a regular grid first.
    """
    n = x.size
    if n <= exact_max:
        total = 0.0
        for s in range(0, n, 1024):
            d = (x[s:s + 1024, None] - x[None, :]) / g
            total += _phi_deriv(d, r).sum()
        return total / (n * n * g ** (r + 1))
    lo, hi = x.min(), x.max()
    counts, edges = np.histogram(x, bins=nbins, range=(lo, hi))
    step = edges[1] - edges[0]
    lags = np.arange(-(nbins - 1), nbins) * step / g
    kern = _phi_deriv(lags, r)
    # sum_ij k(x_i - x_j) = sum_l k(l) * autocorr(counts)[l]
    from scipy.signal import fftconvolve

    ac = fftconvolve(counts.astype(float), counts[::-1].astype(float))
    return float(ac @ kern) / (n * n * g ** (r + 1))


def temporal_plugin_bandwidth(times) -> float:
    """Two-stage direct plug-in bandwidth for a Gaussian kernel.

    Normal-reference start for the sixth-derivative functional, two
    kernel-functional estimation stages, then the AMISE-optimal bandwidth
    ``(R(K) / (mu2^2 * psi4 * n))^(1/5)``.
    """
    if isinstance(times, PointPattern):
        times = times.t
    x = np.asarray(times, dtype=float).ravel()
    n = x.size
    if n < 4:
        raise ValueError("plug-in bandwidth needs at least 4 observations")
    sd = np.std(x, ddof=1)
    iqr = _iqr(x) / 1.349
    scale = min(sd, iqr) if iqr > 0 else sd
    if not scale > 0:
        raise ValueError("zero temporal spread")

    psi8 = 105.0 / (32.0 * _SQRTPI * scale ** 9)
    g1 = (30.0 / (_SQRT2PI * psi8 * n)) ** (1.0 / 9.0)
    psi6 = _psi_hat(x, g1, 6)
    g2 = (-6.0 / (_SQRT2PI * psi6 * n)) ** (1.0 / 7.0)
    psi4 = _psi_hat(x, g2, 4)
    return float((1.0 / (2.0 * _SQRTPI * psi4 * n)) ** 0.2)


@dataclass(frozen=True, eq=False)
class PilotIntensities:
    """Marginal pilot intensities on the grid and at the events.

    ``spatial`` is (M1, M2) and zero off the window; ``temporal`` is (M3,).
    ``spatial_full``/``temporal_full`` are the unmasked, floored ratio
    fields used for interpolation and for bandwidth fields.
    """

    spatial: np.ndarray
    temporal: np.ndarray
    at_s: np.ndarray
    at_t: np.ndarray
    spatial_full: np.ndarray
    temporal_full: np.ndarray
    grid: Grid3D | None = None

    def spatial_integral(self) -> float:
        m1, m2, _ = self.grid.spacing
        return float(self.spatial.sum() * m1 * m2)

    def temporal_integral(self) -> float:
        return float(self.temporal.sum() * self.grid.spacing[2])


def _floored(values, full):
    floor = PILOT_FLOOR * max(float(np.max(full)), np.finfo(float).tiny)
    return np.maximum(values, floor), floor


def _spatial_field(pattern: PointPattern, eps: float, grid: Grid3D):
    M1, M2, _ = grid.shape
    m1, m2, _ = grid.spacing
    w = np.zeros((M1, M2))
    if pattern.n:
        idx = voxel_index(grid, pattern.xyt)
        np.add.at(w, (idx[:, 0], idx[:, 1]), 1.0)
    g = lambda u: gauss1d(u, eps)  # noqa: E731
    kf = kernel_fft((g, g), (M1, M2), (m1, m2))
    num = np.maximum(convolve(pad(w), kf), 0.0)
    edge = m1 * m2 * convolve(pad(grid.spatial_inside.astype(float)), kf)
    return num / np.maximum(edge, 1e-6)


def _temporal_field(pattern: PointPattern, delta: float, grid: Grid3D):
    M3, m3 = grid.shape[2], grid.spacing[2]
    w = np.zeros(M3)
    if pattern.n:
        idx = voxel_index(grid, pattern.xyt)
        np.add.at(w, idx[:, 2], 1.0)
    kf = kernel_fft((lambda u: gauss1d(u, delta),), (M3,), (m3,))
    num = np.maximum(convolve(pad(w), kf), 0.0)
    edge = m3 * convolve(pad(grid.temporal_inside.astype(float)), kf)
    return num / np.maximum(edge, 1e-6)


def _interp2(field, grid: Grid3D, x, y):
    cx, cy = grid.axis_centers(0), grid.axis_centers(1)
    pts = np.column_stack([np.clip(x, cx[0], cx[-1]), np.clip(y, cy[0], cy[-1])])
    return RegularGridInterpolator((cx, cy), field, method="linear")(pts)


def pilot_spatial(pattern: PointPattern, eps: float, grid: Grid3D):
    """Fixed-bandwidth, edge-corrected spatial marginal intensity.

    Returns
    -------
    field : ndarray (M1, M2)
        Pilot on the spatial grid, zero outside the window.
    at_points : ndarray (n,)
        Bilinear interpolation of the field at the events.
    full : ndarray (M1, M2)
        Unmasked field, floored.
    """
    if not eps > 0:
        raise ValueError("pilot bandwidth must be positive")
    full = _spatial_field(pattern, eps, grid)
    full, floor = _floored(full, full)
    at = np.maximum(_interp2(full, grid, pattern.x, pattern.y), floor) if pattern.n else np.zeros(0)
    return np.where(grid.spatial_inside, full, 0.0), at, full


def pilot_temporal(pattern: PointPattern, delta: float, grid: Grid3D):
    """1D analogue of :func:`pilot_spatial` with linear interpolation."""
    if not delta > 0:
        raise ValueError("pilot bandwidth must be positive")
    full = _temporal_field(pattern, delta, grid)
    full, floor = _floored(full, full)
    ct = grid.axis_centers(2)
    at = np.maximum(np.interp(pattern.t, ct, full), floor) if pattern.n else np.zeros(0)
    return np.where(grid.temporal_inside, full, 0.0), at, full


def pilot_intensities(pattern: PointPattern, eps_star: float, delta_star: float, grid: Grid3D) -> PilotIntensities:
    s, s_at, s_full = pilot_spatial(pattern, eps_star, grid)
    t, t_at, t_full = pilot_temporal(pattern, delta_star, grid)
    return PilotIntensities(s, t, s_at, t_at, s_full, t_full, grid)


def constant_pilots(pattern: PointPattern, grid: Grid3D, value_s: float = 1.0, value_t: float = 1.0) -> PilotIntensities:
    """Flat pilots; Abramson bandwidths then collapse to the global ones."""
    M1, M2, M3 = grid.shape
    s_full = np.full((M1, M2), float(value_s))
    t_full = np.full(M3, float(value_t))
    return PilotIntensities(np.where(grid.spatial_inside, s_full, 0.0), t_full.copy(),
                            np.full(pattern.n, float(value_s)), np.full(pattern.n, float(value_t)),
                            s_full, t_full, grid)


@dataclass(frozen=True, eq=False)
class AdaptiveBandwidths:
    """Per-event bandwidths and the normalisers used to build them."""

    eps: np.ndarray
    delta: np.ndarray
    gamma_s: float
    gamma_t: float
    eps_star: float
    delta_star: float
    n: int
    trim: float = TRIM

    @property
    def trimmed(self) -> bool:
        return bool(np.any(self.eps >= self.trim * self.eps_star) or np.any(self.delta >= self.trim * self.delta_star))

    def spatial_from_pilot(self, values):
        """Apply the same Abramson map (same gamma, same trim) to pilot values."""
        raw = self.eps_star / self.gamma_s * np.sqrt(self.n / np.asarray(values, dtype=float))
        return np.minimum(raw, self.trim * self.eps_star)

    def temporal_from_pilot(self, values):
        raw = self.delta_star / self.gamma_t * np.sqrt(self.n / np.asarray(values, dtype=float))
        return np.minimum(raw, self.trim * self.delta_star)


def _geomean(v):
    return float(np.exp(np.mean(np.log(v))))


def abramson_bandwidths(pattern: PointPattern, eps_star: float, delta_star: float,
                        pilots: PilotIntensities, trim: float | None = TRIM) -> AdaptiveBandwidths:
    """Square-root-law bandwidths normalised to geometric mean ``eps*``/``delta*``.

    Bandwidths are capped at ``trim`` times the global bandwidth (the
    pre-trim geometric mean); ``trim=None`` disables the cap.
    """
    n = pattern.n
    if n < 1:
        raise ValueError("adaptive bandwidths need at least one event")
    if not (eps_star > 0 and delta_star > 0):
        raise ValueError("global bandwidths must be positive")
    ls = np.asarray(pilots.at_s, dtype=float)
    lt = np.asarray(pilots.at_t, dtype=float)
    if np.any(ls <= 0) or np.any(lt <= 0) or ls.size != n or lt.size != n:
        raise RuntimeError("pilot values at events must be positive and one per event")
    fs = np.sqrt(n / ls)
    ft = np.sqrt(n / lt)
    gamma_s, gamma_t = _geomean(fs), _geomean(ft)
    eps = eps_star / gamma_s * fs
    delta = delta_star / gamma_t * ft
    cap = np.inf if trim is None else float(trim)
    eps = np.minimum(eps, cap * eps_star)
    delta = np.minimum(delta, cap * delta_star)
    return AdaptiveBandwidths(eps, delta, gamma_s, gamma_t, float(eps_star), float(delta_star), n, cap)


def bandwidth_fields(bw: AdaptiveBandwidths, pilots: PilotIntensities):
    """Bandwidths at every spatial voxel (M1, M2) and time slice (M3,)."""
    return bw.spatial_from_pilot(pilots.spatial_full), bw.temporal_from_pilot(pilots.temporal_full)
