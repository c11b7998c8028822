"""Adaptive spatio-temporal kernel intensity estimation on gridded windows."""

from .adaptive import PartitionScheme, build_partition, estimate_adaptive_direct, estimate_adaptive_partition
from .bandwidths import (
    AdaptiveBandwidths,
    abramson_bandwidths,
    oversmooth_bandwidth,
    pilot_intensities,
    temporal_plugin_bandwidth,
)
from .evaluate import ise_density_scale, run_bins_experiment
from .fixed import IntensityGrid, estimate_fixed_direct, estimate_fixed_fft
from .geom import Grid3D, PointPattern, SpatialWindow, TimeInterval, bin_points, make_grid
from .kernels import KernelSpec
from .projection import project_albers
from .simulate import GneitingParams, SimConfig, simulate_grf, simulate_lgcp

__version__ = "0.1.0"
