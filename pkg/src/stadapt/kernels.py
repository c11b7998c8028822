"""Isotropic Gaussian space-time product kernels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SQRT2PI = np.sqrt(2.0 * np.pi)


def gauss1d(x, h):
    """Univariate Gaussian density with standard deviation ``h``.

    ``h`` may be an array broadcasting against ``x``.
    """
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * (x / h) ** 2) / (_SQRT2PI * h)


@dataclass(frozen=True)
class KernelSpec:
    """Product of a bivariate spatial and univariate temporal Gaussian.

    ``K(du, dv) = K^s_eps(du) * K^t_delta(dv)`` with
    ``K^s_eps(du) = exp(-|du|^2 / (2 eps^2)) / (2 pi eps^2)``.
    """

    eps: float
    delta: float

    def __post_init__(self):
        if not (np.isfinite(self.eps) and self.eps > 0):
            raise ValueError(f"spatial bandwidth must be positive, got {self.eps}")
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise ValueError(f"temporal bandwidth must be positive, got {self.delta}")

    def spatial(self, dx, dy):
        return gauss1d(dx, self.eps) * gauss1d(dy, self.eps)

    def temporal(self, dt):
        return gauss1d(dt, self.delta)

    def __call__(self, dx, dy, dt):
        return self.spatial(dx, dy) * self.temporal(dt)

    def factors(self):
        """Per-axis 1D factors ``(x, y, t)`` of the separable kernel."""
        return (lambda u: gauss1d(u, self.eps),
                lambda u: gauss1d(u, self.eps),
                lambda u: gauss1d(u, self.delta))

    @property
    def peak(self) -> float:
        return 1.0 / (2.0 * np.pi * self.eps ** 2) / (_SQRT2PI * self.delta)
