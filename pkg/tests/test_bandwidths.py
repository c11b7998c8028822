import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq
from scipy.stats import norm

from stadapt.bandwidths import (
    PilotIntensities,
    abramson_bandwidths,
    constant_pilots,
    oversmooth_bandwidth,
    pilot_intensities,
    pilot_spatial,
    pilot_temporal,
    temporal_plugin_bandwidth,
)
from stadapt.geom import PointPattern, SpatialWindow, TimeInterval, make_grid
from stadapt.kernels import gauss1d

from conftest import uniform_pattern


def _pilots_at(at_s, at_t):
    at_s, at_t = np.asarray(at_s, float), np.asarray(at_t, float)
    z2, z1 = np.zeros((2, 2)), np.zeros(2)
    return PilotIntensities(z2, z1, at_s, at_t, z2, z1)


def _sd_equals_iqr_sample(n=64):
    """Sample with sd(ddof=1) = IQR/1.34 = 1: stretch the tails only.

    Type-7 quartiles of 64 points sit between order statistics 15/16 and
    47/48, so scaling the outer 15 on each side changes the sd but not the IQR.
    """
    base = norm.ppf((np.arange(n) + 0.5) / n)
    tails = np.r_[np.ones(15), np.zeros(n - 30), np.ones(15)].astype(bool)

    def sample(s):
        return np.where(tails, base * s, base)

    def gap(s):
        x = sample(s)
        q = np.percentile(x, [25, 75])
        return np.std(x, ddof=1) - (q[1] - q[0]) / 1.34

    x = sample(brentq(gap, 0.5, 3.0))
    return x / np.std(x, ddof=1)


def test_oversmooth_closed_form():
    x = _sd_equals_iqr_sample()
    q = np.percentile(x, [25, 75])
    assert np.std(x, ddof=1) == pytest.approx(1.0, rel=1e-14)
    assert (q[1] - q[0]) / 1.34 == pytest.approx(1.0, rel=1e-12)
    y = np.random.default_rng(0).permutation(x)
    assert oversmooth_bandwidth(np.column_stack([x, y])) == pytest.approx(0.5425, rel=1e-12)


def test_oversmooth_formula_on_random_input():
    rng = np.random.default_rng(1)
    xy = rng.gamma(2.0, size=(137, 2)) * [1.0, 3.0]
    sig = []
    for a in range(2):
        q = np.percentile(xy[:, a], [25, 75])
        sig.append(0.5 * (np.std(xy[:, a], ddof=1) + (q[1] - q[0]) / 1.34))
    assert oversmooth_bandwidth(xy) == pytest.approx(1.085 * min(sig) * 137 ** (-1 / 6), rel=1e-15)


def test_oversmooth_degenerate():
    with pytest.raises(ValueError):
        oversmooth_bandwidth(np.ones((10, 2)))
    with pytest.raises(ValueError):
        oversmooth_bandwidth(np.zeros((1, 2)))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 100), st.integers(0, 2**31))
def test_oversmooth_scale_equivariant(s, seed):
    xy = np.random.default_rng(seed).random((50, 2))
    assert oversmooth_bandwidth(s * xy) == pytest.approx(s * oversmooth_bandwidth(xy), rel=1e-12)


def test_plugin_normal_reference():
    t = np.random.default_rng(2).standard_normal(5000)
    ref = 1.06 * np.std(t, ddof=1) * t.size ** (-0.2)
    assert abs(temporal_plugin_bandwidth(t) / ref - 1) < 0.15


@pytest.mark.parametrize("s", [1e-3, 0.5, 7.0])
def test_plugin_equivariant(s):
    t = np.random.default_rng(3).gamma(3.0, size=300)
    assert temporal_plugin_bandwidth(s * t) == pytest.approx(s * temporal_plugin_bandwidth(t), rel=1e-9)


def test_plugin_two_clusters_smaller():
    rng = np.random.default_rng(4)
    t = np.r_[rng.normal(0, 0.05, 200), rng.normal(10, 0.05, 200)]
    ref = 1.06 * np.std(t, ddof=1) * t.size ** (-0.2)
    assert temporal_plugin_bandwidth(t) < ref


def test_plugin_binned_matches_exact():
    # above the exact-pair limit the pair sums are histogram-binned
    t = np.random.default_rng(5).standard_normal(4001)
    exact = temporal_plugin_bandwidth(t[:4000])
    assert temporal_plugin_bandwidth(t) == pytest.approx(exact, rel=0.02)


def test_plugin_errors():
    with pytest.raises(ValueError):
        temporal_plugin_bandwidth([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        temporal_plugin_bandwidth(np.ones(10))


def test_pilot_single_point():
    win, T = SpatialWindow.rectangle(), TimeInterval(0, 1)
    g = make_grid(win, T, 64, 64, 32)
    c = [g.axis_centers(a)[n // 2] for a, n in zip(range(3), g.shape)]
    pat = PointPattern(np.array([c]), win, T)
    eps = 0.05
    field, at, _ = pilot_spatial(pat, eps, g)
    assert at[0] > 0
    # edge ~ 1 in the centre
    assert at[0] == pytest.approx(1 / (2 * np.pi * eps**2), rel=0.02)
    tf, _, _ = pilot_temporal(pat, 0.05, g)
    assert np.argmax(tf) == 16


def test_pilot_mass_and_constant():
    pat = uniform_pattern(1000, seed=6)
    g = make_grid(pat.window, pat.interval, 64, 64, 32)
    pil = pilot_intensities(pat, 0.3, 0.3, g)
    assert pil.spatial_integral() == pytest.approx(1000, rel=0.01)
    assert pil.temporal_integral() == pytest.approx(1000, rel=0.01)
    interior = pil.spatial[16:48, 16:48]
    assert np.abs(interior / 1000 - 1).max() < 0.10
    assert np.abs(pil.temporal[8:24] / 1000 - 1).max() < 0.10


def test_pilot_mass_polygon():
    win = SpatialWindow(np.array([[0, 0], [1, 0], [1, 0.5], [0.5, 0.5], [0.5, 1], [0, 1]], float))
    rng = np.random.default_rng(7)
    xy = rng.random((4000, 2))
    xy = xy[win.contains(xy[:, 0], xy[:, 1])][:800]
    pat = PointPattern(np.column_stack([xy, rng.random(len(xy))]), win, TimeInterval(0, 1))
    g = make_grid(win, pat.interval, 64, 64, 32)
    pil = pilot_intensities(pat, 0.08, 0.1, g)
    assert pil.spatial_integral() == pytest.approx(pat.n, rel=0.01)
    assert pil.temporal_integral() == pytest.approx(pat.n, rel=0.01)


def test_abramson_constant_pilot():
    pat = uniform_pattern(40, seed=8)
    g = make_grid(pat.window, pat.interval, 8, 8, 4)
    bw = abramson_bandwidths(pat, 0.1, 0.2, constant_pilots(pat, g, 3.0, 7.0))
    assert np.allclose(bw.eps, 0.1, rtol=1e-14) and np.allclose(bw.delta, 0.2, rtol=1e-14)


def test_abramson_hand_computed_ten_points():
    pat = uniform_pattern(10, seed=9)
    lam_s = np.array([50, 50, 50, 50, 2, 1, 3, 2, 1, 4], float)  # dense cluster + sparse background
    lam_t = np.arange(1, 11, dtype=float)
    bw = abramson_bandwidths(pat, 0.1, 0.2, _pilots_at(lam_s, lam_t), trim=None)
    f = np.sqrt(10 / lam_s)
    gamma = np.prod(f) ** (1 / 10)
    assert np.allclose(bw.eps, 0.1 / gamma * f, rtol=1e-12)
    assert np.all(bw.eps[:4] < 0.1) and np.all(bw.eps[4:] > 0.1)
    ft = np.sqrt(10 / lam_t)
    assert np.allclose(bw.delta, 0.2 / np.prod(ft) ** 0.1 * ft, rtol=1e-12)


def test_abramson_trim_cap():
    pat = uniform_pattern(10, seed=10)
    lam = np.r_[np.full(9, 1e6), 1e-6]
    bw = abramson_bandwidths(pat, 0.1, 0.2, _pilots_at(lam, np.ones(10)))
    assert bw.eps.max() == pytest.approx(0.5) and bw.trimmed


def test_abramson_rejects_nonpositive():
    pat = uniform_pattern(3, seed=11)
    with pytest.raises(RuntimeError):
        abramson_bandwidths(pat, 0.1, 0.1, _pilots_at([1, 0, 1], [1, 1, 1]))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 200), st.floats(1e-3, 1e3), st.integers(0, 2**31))
def test_abramson_identities(n, c, seed):
    rng = np.random.default_rng(seed)
    pat = uniform_pattern(n, seed=seed)
    ls, lt = np.exp(rng.normal(0, 2, n)), np.exp(rng.normal(0, 2, n))
    bw = abramson_bandwidths(pat, 0.07, 0.3, _pilots_at(ls, lt), trim=None)
    assert np.exp(np.mean(np.log(bw.eps))) == pytest.approx(0.07, rel=1e-9)
    assert np.exp(np.mean(np.log(bw.delta))) == pytest.approx(0.3, rel=1e-9)
    scaled = abramson_bandwidths(pat, 0.07, 0.3, _pilots_at(c * ls, c * lt), trim=None)
    assert np.allclose(scaled.eps, bw.eps, rtol=1e-9) and np.allclose(scaled.delta, bw.delta, rtol=1e-9)
    # monotone: higher pilot, narrower kernel
    o = np.argsort(ls)
    assert np.all(np.diff(bw.eps[o]) <= 0)


def test_gauss1d_normalised():
    x = np.linspace(-10, 10, 20001)
    assert np.trapezoid(gauss1d(x, 0.7), x) == pytest.approx(1.0, rel=1e-10)


def test_temporal_pilot_peak_at_nearest_node():
    win, T = SpatialWindow.rectangle(), TimeInterval(0, 1)
    g = make_grid(win, T, 8, 8, 33)
    pat = PointPattern(np.array([[0.3, 0.6, 0.5]]), win, T)
    tf, at, _ = pilot_temporal(pat, 0.05, g)
    assert np.argmax(tf) == np.argmin(np.abs(g.axis_centers(2) - 0.5)) == 16
    assert at[0] == pytest.approx(tf.max(), rel=1e-12)
