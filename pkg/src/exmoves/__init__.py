"""Exemplar-movement classifiers as mid-level features for action recognition."""

from .classifier import ActionClassifierBank, RfeTrace, predict, rfe_rank, train_ovr
from .codebook import Codebook, fit_codebook, quantize
from .core import (
    CodewordHistogram,
    QuantizedVideo,
    Volume,
    enumerate_positions,
    histogram,
    histogram_score,
    overlap_ratio,
)
from .descriptor import (
    ExmoveDescriptor,
    PyramidSpec,
    bow_descriptor,
    build_pyramid,
    extract_descriptor,
    scaled_extent,
)
from .exemplar import ActiveSet, ExMoveModel, ExMoveParams, calibrate, solve_linear_svm, train_exmove
from .integral import (
    IntegralStack,
    build_denominator,
    build_integral_stack,
    raw_score,
    sliding_scores,
    subvolume_sum,
)

__version__ = "0.1.0"

__all__ = [
    "ActionClassifierBank", "RfeTrace", "predict", "rfe_rank", "train_ovr",
    "Codebook", "fit_codebook", "quantize",
    "CodewordHistogram", "QuantizedVideo", "Volume", "enumerate_positions", "histogram",
    "histogram_score", "overlap_ratio",
    "ExmoveDescriptor", "PyramidSpec", "bow_descriptor", "build_pyramid", "extract_descriptor",
    "scaled_extent",
    "ActiveSet", "ExMoveModel", "ExMoveParams", "calibrate", "solve_linear_svm", "train_exmove",
    "IntegralStack", "build_denominator", "build_integral_stack", "raw_score", "sliding_scores",
    "subvolume_sum",
]
