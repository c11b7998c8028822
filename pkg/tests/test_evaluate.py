import numpy as np
import pytest

from stadapt.adaptive import build_partition, estimate_adaptive_direct
from stadapt.bandwidths import abramson_bandwidths, oversmooth_bandwidth, pilot_intensities, temporal_plugin_bandwidth
from stadapt.evaluate import (
    BenchmarkRecord,
    check_refinement_trend,
    ise_density_scale,
    median_ise,
    pattern_seeds,
    read_records,
    run_bins_experiment,
    write_records,
)
from stadapt.fixed import IntensityGrid, estimate_fixed_fft
from stadapt.geom import SpatialWindow, TimeInterval, make_grid
from stadapt.kernels import KernelSpec
from stadapt.simulate import SET2, SimConfig, simulate_lgcp


@pytest.fixture
def g442():
    return make_grid(SpatialWindow.rectangle(), TimeInterval(0, 1), 4, 4, 2)


def test_ise_identical_and_scale_invariant(g442):
    lam = np.random.default_rng(0).random(g442.shape) + 0.1
    f = IntensityGrid(g442, lam)
    assert ise_density_scale(f, f) == 0
    assert ise_density_scale(IntensityGrid(g442, 3.7 * lam), f) == pytest.approx(0, abs=1e-28)


def test_ise_hand_value(g442):
    # fhat = 3 on x < 1/2, 1 elsewhere -> density 1.5 / 0.5; f uniform -> 1
    a = np.where(np.arange(4)[:, None, None] < 2, 3.0, 1.0) * np.ones(g442.shape)
    assert ise_density_scale(IntensityGrid(g442, a), IntensityGrid(g442, np.ones(g442.shape))) == pytest.approx(0.25)


def test_ise_symmetric(g442):
    rng = np.random.default_rng(1)
    a, b = IntensityGrid(g442, rng.random(g442.shape)), IntensityGrid(g442, rng.random(g442.shape))
    assert ise_density_scale(a, b) == pytest.approx(ise_density_scale(b, a), rel=1e-14)


def test_ise_errors(g442):
    with pytest.raises(ValueError):
        ise_density_scale(IntensityGrid(g442, np.zeros(g442.shape)), IntensityGrid(g442, np.ones(g442.shape)))
    other = make_grid(SpatialWindow.rectangle(), TimeInterval(0, 1), 4, 4, 4)
    with pytest.raises(ValueError):
        ise_density_scale(IntensityGrid(other, np.ones(other.shape)), IntensityGrid(g442, np.ones(g442.shape)))


def test_pattern_seeds_distinct_and_stable():
    s = pattern_seeds(7, 5)
    assert len(set(s)) == 5 and s == pattern_seeds(7, 5)


def test_single_bin_experiment_collapse():
    params = SET2.with_mu(150)
    shape = (32, 32, 16)
    (rec,) = run_bins_experiment(1, params, [(1, 1)], shape, seed=3)
    pat, _ = simulate_lgcp(SimConfig(params, seed=pattern_seeds(3, 1)[0]))
    g = make_grid(pat.window, pat.interval, *shape)
    eps_star, delta_star = oversmooth_bandwidth(pat), temporal_plugin_bandwidth(pat.t)
    pil = pilot_intensities(pat, eps_star, delta_star, g)
    bw = abramson_bandwidths(pat, eps_star, delta_star, pil)
    sc = build_partition(bw, 1, 1)
    fixed = estimate_fixed_fft(pat, KernelSpec(sc.eps_mid[0], sc.delta_mid[0]), g)
    ref = ise_density_scale(fixed, estimate_adaptive_direct(pat, bw, pil, g))
    assert rec.n == pat.n and rec.ise == pytest.approx(ref, rel=1e-10)


def test_experiment_reproducible_and_csv_round_trip(tmp_path):
    xi = [(0.5, 0.5), (0.1, 0.1)]
    a = run_bins_experiment(2, SET2.with_mu(120), xi, (24, 24, 12), seed=9)
    b = run_bins_experiment(2, SET2.with_mu(120), xi, (24, 24, 12), seed=9)
    assert [r.ise for r in a] == [r.ise for r in b]
    assert [(r.pattern_id, r.xi1) for r in a] == [(0, 0.5), (0, 0.1), (1, 0.5), (1, 0.1)]
    path = tmp_path / "rec.csv"
    write_records(a, path)
    assert path.read_text().splitlines()[0] == \
        "pattern_id,n,m1,m2,m3,xi1,xi2,ise,time_partition_s,time_direct_s,seed"
    assert read_records(path) == a


def test_refinement_trend_assertion():
    def rec(xi, ise):
        return BenchmarkRecord(0, 10, 8, 8, 4, xi, xi, ise, 0.0, 0.0, 0)

    ok = [rec(0.1, 3.0), rec(0.05, 2.0), rec(0.01, 1.0)]
    assert [v for _, v in check_refinement_trend(ok)] == [3.0, 2.0, 1.0]
    with pytest.raises(AssertionError):
        check_refinement_trend([rec(0.1, 1.0), rec(0.05, 2.0)])
    assert median_ise(ok + [rec(0.1, 5.0)])[(0.1, 0.1)] == 4.0
