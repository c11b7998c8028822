"""Spherical Albers equal-area conic projection (forward)."""

from __future__ import annotations

import numpy as np

__all__ = ["EARTH_RADIUS_KM", "project_albers"]

EARTH_RADIUS_KM = 6371.0088


def project_albers(lon, lat, parallels, origin, radius=EARTH_RADIUS_KM):
    """Forward spherical Albers projection.

    Parameters
    ----------
    lon, lat : array_like
        Degrees.
    parallels : (float, float)
        Standard parallels ``(phi1, phi2)`` in degrees.
    origin : (float, float)
        ``(phi0, lambda0)``: latitude and central meridian of the origin.
    radius : float
        Sphere radius; output is in the same units.

    Returns
    -------
    x, y : ndarray
    """
    lon = np.asarray(lon, dtype=float)
    lat = np.asarray(lat, dtype=float)
    phi1, phi2 = np.radians(parallels[0]), np.radians(parallels[1])
    phi0, lam0 = np.radians(origin[0]), np.radians(origin[1])
    if not (abs(parallels[0]) < 90 and abs(parallels[1]) < 90 and abs(origin[0]) < 90):
        raise ValueError("standard parallels and origin latitude must lie in (-90, 90)")
    if np.any(np.abs(lat) >= 90):
        raise ValueError("latitudes must lie in (-90, 90)")
    n = 0.5 * (np.sin(phi1) + np.sin(phi2))
    if abs(n) < 1e-12:
        raise ValueError("standard parallels symmetric about the equator (phi1 = -phi2)")
    C = np.cos(phi1) ** 2 + 2.0 * n * np.sin(phi1)
    rho0 = radius * np.sqrt(C - 2.0 * n * np.sin(phi0)) / n
    rho = radius * np.sqrt(C - 2.0 * n * np.sin(np.radians(lat))) / n
    dlam = np.radians(lon) - lam0
    dlam = (dlam + np.pi) % (2.0 * np.pi) - np.pi
    theta = n * dlam
    return rho * np.sin(theta), rho0 - rho * np.cos(theta)
