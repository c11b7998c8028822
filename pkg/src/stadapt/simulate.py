"""
Log-Gaussian Cox process simulation with Gneiting space-time covariance.

The Gaussian field ``Z`` is sampled at voxel centroids of a (coarse) field
grid, either by circulant embedding on the doubled grid or, when the
embedding is not non-negative definite and the grid is small enough, by a
dense Cholesky factor.  Events are then drawn voxel by voxel from a Poisson
law with mean ``exp(Z) * V`` and placed uniformly inside the voxel.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .fixed import IntensityGrid
from .geom import Grid3D, PointPattern, SpatialWindow, TimeInterval, make_grid

__all__ = [
    "GneitingParams",
    "SET1",
    "SET2",
    "SET3",
    "PARAMETER_SETS",
    "TEST_POLYGON",
    "SimConfig",
    "EmbeddingError",
    "gneiting_cov",
    "simulate_grf",
    "simulate_lgcp",
]

DENSE_MAX_NODES = 4096

# fixed irregular test window inside the unit square
TEST_POLYGON = np.array([
    [0.05, 0.10], [0.45, 0.02], [0.95, 0.12], [0.88, 0.52], [0.98, 0.93],
    [0.55, 0.97], [0.38, 0.72], [0.10, 0.92], [0.16, 0.50],
])


class EmbeddingError(RuntimeError):
    """Circulant embedding failed on a grid too large for the dense fallback."""


@dataclass(frozen=True)
class GneitingParams:
    """Stable-model Gneiting covariance plus the target expected count.

    ``C(h, u) = sigma2 / psi(u^2)^power * exp(-c |h|^2 / psi(u^2))`` with
    ``psi(r) = (1 + a r^alpha)^beta``.  ``power`` is the exponent of the
    normalising prefactor; 1 corresponds to two spatial dimensions.
    """

    sigma2: float
    c: float
    a: float
    alpha: float
    beta: float
    mu: float = 1000.0
    power: float = 1.0

    def __post_init__(self):
        if not self.sigma2 >= 0:
            raise ValueError("sigma2 must be non-negative")
        if self.c < 0 or self.a < 0:
            raise ValueError("scale parameters c and a must be non-negative")
        if not (0 < self.alpha <= 1 and 0 <= self.beta <= 1):
            raise ValueError("alpha must lie in (0, 1] and beta in [0, 1]")
        if not self.mu > 0:
            raise ValueError("mu must be positive")

    def with_mu(self, mu) -> "GneitingParams":
        return GneitingParams(self.sigma2, self.c, self.a, self.alpha, self.beta, float(mu), self.power)


SET1 = GneitingParams(sigma2=2.0, c=0.5, a=0.8, alpha=0.1, beta=0.1)
SET2 = GneitingParams(sigma2=0.5, c=0.5, a=0.8, alpha=0.1, beta=0.1)
SET3 = GneitingParams(sigma2=0.5, c=0.5, a=0.8, alpha=0.8, beta=0.8)
PARAMETER_SETS = {1: SET1, 2: SET2, 3: SET3}


def gneiting_cov(du, dv, params: GneitingParams):
    """Covariance at spatial lag ``du`` (..., 2) and temporal lag ``dv``."""
    du = np.asarray(du, dtype=float)
    r2 = np.sum(du * du, axis=-1)
    dv = np.asarray(dv, dtype=float)
    psi = (1.0 + params.a * np.abs(dv) ** (2.0 * params.alpha)) ** params.beta
    return params.sigma2 / psi ** params.power * np.exp(-params.c * r2 / psi)


def _cov_lags(dx, dy, dt, p: GneitingParams):
    psi = (1.0 + p.a * np.abs(dt) ** (2.0 * p.alpha)) ** p.beta
    return p.sigma2 / psi ** p.power * np.exp(-p.c * (dx * dx + dy * dy) / psi)


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Everything needed to reproduce one LGCP realisation.

    ``shape`` is the resolution of the Gaussian field grid; the default
    16^3 keeps the dense fallback available.
    """

    params: GneitingParams
    window: SpatialWindow = field(default_factory=lambda: SpatialWindow(TEST_POLYGON))
    interval: TimeInterval = field(default_factory=lambda: TimeInterval(0.0, 1.0))
    shape: tuple[int, int, int] = (16, 16, 16)
    seed: int = 0

    def grid(self) -> Grid3D:
        return make_grid(self.window, self.interval, *self.shape)

    def field_mean(self) -> float:
        vol = self.window.area * self.interval.length
        return float(np.log(self.params.mu / vol) - 0.5 * self.params.sigma2)


@functools.lru_cache(maxsize=16)
def _embedding_eigs(p: GneitingParams, shape, spacing):
    axes = []
    for M, m in zip(shape, spacing):
        ell = np.arange(2 * M)
        axes.append(np.minimum(ell, 2 * M - ell) * m)
    dx, dy, dt = np.meshgrid(*axes, indexing="ij", sparse=True)
    base = _cov_lags(dx, dy, dt, p)
    eig = sfft.fftn(base).real
    return eig


@functools.lru_cache(maxsize=8)
def _dense_factor(p: GneitingParams, shape, spacing):
    cs = [(np.arange(M) + 0.5) * m for M, m in zip(shape, spacing)]
    X, Y, T = (a.ravel() for a in np.meshgrid(*cs, indexing="ij"))
    C = _cov_lags(X[:, None] - X[None], Y[:, None] - Y[None], T[:, None] - T[None], p)
    jitter = 1e-10 * max(p.sigma2, 1e-300)
    eye = np.eye(C.shape[0])
    while True:
        try:
            return np.linalg.cholesky(C + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= 10
            if jitter > 1e-4 * p.sigma2:
                raise


def simulate_grf(config: SimConfig, rng=None, method: str = "auto"):
    """Sample the Gaussian field at the centroids of ``config.grid()``.

    Parameters
    ----------
    config : SimConfig
    rng : numpy Generator, optional
        Defaults to ``default_rng(config.seed)``.
    method : {"auto", "circulant", "dense"}

    Returns
    -------
    Z : ndarray of ``config.shape``
    grid : Grid3D
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    grid = config.grid()
    p = config.params
    mean = config.field_mean()
    shape = grid.shape
    if p.sigma2 == 0:
        return np.full(shape, mean), grid

    use_dense = method == "dense"
    if method in ("auto", "circulant"):
        eig = _embedding_eigs(p, shape, grid.spacing)
        ok = eig.min() >= -1e-10 * eig.max()
        if ok:
            N = eig.size
            xi = rng.standard_normal(eig.shape) + 1j * rng.standard_normal(eig.shape)
            y = sfft.fftn(np.sqrt(np.maximum(eig, 0.0) / N) * xi)
            z = y.real[: shape[0], : shape[1], : shape[2]]
            return mean + z, grid
        if method == "circulant" or np.prod(shape) > DENSE_MAX_NODES:
            raise EmbeddingError(
                f"circulant embedding of the covariance on a {shape} grid is not non-negative "
                f"definite (min eigenvalue {eig.min():.3g}); use a grid with at most "
                f"{DENSE_MAX_NODES} nodes or parameters with shorter correlation ranges")
        use_dense = True
    if use_dense:
        if np.prod(shape) > DENSE_MAX_NODES:
            raise EmbeddingError(f"dense factorisation limited to {DENSE_MAX_NODES} nodes")
        L = _dense_factor(p, shape, grid.spacing)
        z = L @ rng.standard_normal(L.shape[0])
        return mean + z.reshape(shape), grid
    raise ValueError(f"unknown method {method!r}")


def simulate_lgcp(config: SimConfig, rng=None, method: str = "auto"):
    """Simulate one LGCP pattern.

    Returns
    -------
    pattern : PointPattern
    truth : IntensityGrid
        Realised intensity ``exp(Z)`` on the field grid (zero off the mask).
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    Z, grid = simulate_grf(config, rng, method)
    lam = np.where(grid.inside, np.exp(np.minimum(Z, 700.0)), 0.0)
    counts = rng.poisson(lam * grid.volume)
    idx = np.repeat(np.argwhere(counts > 0), counts[counts > 0], axis=0)
    lo = np.array(grid.origin) + idx * np.array(grid.spacing)
    xyt = lo + rng.random(idx.shape) * np.array(grid.spacing)
    keep = config.window.contains(xyt[:, 0], xyt[:, 1]) if len(xyt) else np.zeros(0, bool)
    pattern = PointPattern(xyt[keep], config.window, config.interval)
    truth = IntensityGrid(grid, lam, None, dict(kind="truth", n=pattern.n, seed=config.seed))
    return pattern, truth
