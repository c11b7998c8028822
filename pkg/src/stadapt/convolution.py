"""
Zero-padded FFT convolution on regular grids (1, 2 or 3 dimensions).

The source array of shape ``M`` is embedded at the lowest corner of a zero
array of shape ``P = 2M``.  The kernel is evaluated on the same padded shape
in wrap-around order, i.e. along each axis the offsets are::

    0, m, ..., (M-1) m, -M m, ..., -m

so that a circular convolution of the two padded arrays reproduces, on the
lowest ``M`` block, the linear (non-periodic) discrete convolution

    out[i] = sum_l  source[i - l] * K(m * l),   l = 1-M, ..., M-1.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

__all__ = ["wrapped_offsets", "pad", "wrap_kernel", "kernel_fft", "convolve", "convolve_direct"]


def wrapped_offsets(M: int, m: float) -> np.ndarray:
    """Axis offsets of length ``2M`` in wrap-around order."""
    ell = np.concatenate([np.arange(M), np.arange(-M, 0)])
    return ell * m


def pad(source) -> np.ndarray:
    """Embed ``source`` at the lowest corner of a zero array twice its size."""
    source = np.asarray(source, dtype=float)
    out = np.zeros(tuple(2 * s for s in source.shape))
    out[tuple(slice(0, s) for s in source.shape)] = source
    return out


def _check_factors(factors, shape, spacing):
    if not (len(factors) == len(shape) == len(spacing)):
        raise ValueError("need one kernel factor and one spacing per axis")
    if any(m <= 0 for m in spacing):
        raise ValueError("grid spacing must be positive")


def wrap_kernel(factors: Sequence[Callable], shape: Sequence[int], spacing: Sequence[float]) -> np.ndarray:
    """Evaluate a separable kernel on the padded grid in wrap-around layout.

    Parameters
    ----------
    factors : sequence of callables
        One 1D kernel factor per axis; the kernel is their product.
    shape : sequence of int
        Unpadded grid shape ``M``.
    spacing : sequence of float
        Voxel side lengths ``m``.

    Returns
    -------
    ndarray of shape ``2M``; entry ``[l1, l2, ...]`` equals
    ``K(m1*o1, m2*o2, ...)`` where ``o`` are the wrapped offsets.
    """
    _check_factors(factors, shape, spacing)
    out = np.ones(())
    for f, M, m in zip(factors, shape, spacing):
        v = np.asarray(f(wrapped_offsets(M, m)), dtype=float)
        out = np.multiply.outer(out, v)
    return out


def kernel_fft(factors: Sequence[Callable], shape: Sequence[int], spacing: Sequence[float]) -> np.ndarray:
    """Real FFT of :func:`wrap_kernel`, built from per-axis 1D transforms.

    The transform of a separable array is the outer product of the axis
    transforms, which avoids one full-size FFT per kernel.
    """
    _check_factors(factors, shape, spacing)
    out = np.ones(())
    last = len(shape) - 1
    for a, (f, M, m) in enumerate(zip(factors, shape, spacing)):
        v = np.asarray(f(wrapped_offsets(M, m)), dtype=float)
        fv = sfft.rfft(v) if a == last else sfft.fft(v)
        out = np.multiply.outer(out, fv)
    return out


def convolve(a, k, *, real: bool = True, return_imag: bool = False):
    """Circular convolution of padded arrays, cropped to the source block.

    Parameters
    ----------
    a : ndarray
        Padded source (see :func:`pad`).
    k : ndarray
        Either the wrapped kernel (same shape as ``a``) or, with
        ``real=True``, its precomputed :func:`kernel_fft`.
    real : bool
        Use the real-input FFT pipeline.  ``real=False`` runs the complex
        pipeline and takes the real part of the inverse transform.
    return_imag : bool
        With ``real=False``, also return the largest absolute imaginary
        residue of the inverse transform.
    """
    a = np.asarray(a, dtype=float)
    k = np.asarray(k)
    if any(p % 2 for p in a.shape):
        raise ValueError(f"padded dims must be even, got {a.shape}")
    out_block = tuple(slice(0, p // 2) for p in a.shape)

    if real:
        if k.shape == a.shape and not np.iscomplexobj(k):
            kf = sfft.rfftn(k)
        else:
            kf = k
        expected = a.shape[:-1] + (a.shape[-1] // 2 + 1,)
        if kf.shape != expected:
            raise ValueError(f"kernel shape {k.shape} does not match padded shape {a.shape}")
        res = sfft.irfftn(sfft.rfftn(a) * kf, s=a.shape)
        return res[out_block]

    if k.shape != a.shape:
        raise ValueError(f"kernel shape {k.shape} does not match padded shape {a.shape}")
    res = sfft.ifftn(sfft.fftn(a) * sfft.fftn(k))
    if return_imag:
        return res.real[out_block], float(np.abs(res.imag).max())
    return res.real[out_block]


def convolve_direct(source, factors, spacing) -> np.ndarray:
    """Reference O(M^2) evaluation of the same discrete convolution.

    Only meant for checking :func:`convolve` on small grids.
    """
    source = np.asarray(source, dtype=float)
    shape = source.shape
    out = np.zeros(shape)
    for src in np.argwhere(source != 0):
        term = np.asarray(source[tuple(src)])
        for f, M, m, s in zip(factors, shape, spacing, src):
            term = np.multiply.outer(term, f(m * (np.arange(M) - s)))
        out += term
    return out
