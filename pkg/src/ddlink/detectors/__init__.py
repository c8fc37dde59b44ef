"""Detector suite for the unified linear model y = H x + noise."""

from ddlink.detectors.common import (
    ComposedChannel,
    DenseChannel,
    DetectorError,
    DetectorOptions,
    DetectorResult,
    SparseChannel,
    as_channel,
)
from ddlink.detectors.constellation import (
    Constellation,
    bit_llrs,
    by_name,
    demap_bits,
    map_bits,
    posterior,
    qam16,
    qpsk,
    slice_symbols,
)
from ddlink.detectors.cross_domain import cross_domain_detect
from ddlink.detectors.gmp import gmp_detect, prune_channel
from ddlink.detectors.linear import linear_detect, lmmse_matrix
from ddlink.detectors.mamp import mamp_detect
from ddlink.detectors.ml import ml_detect, ml_feasible
from ddlink.detectors.oamp import oamp_detect

__all__ = [
    "ComposedChannel", "Constellation", "DenseChannel", "DetectorError",
    "DetectorOptions", "DetectorResult", "SparseChannel", "as_channel",
    "bit_llrs", "by_name", "cross_domain_detect", "demap_bits", "gmp_detect",
    "linear_detect", "lmmse_matrix", "map_bits", "mamp_detect", "ml_detect",
    "ml_feasible", "oamp_detect", "posterior", "prune_channel", "qam16",
    "qpsk", "slice_symbols",
]
