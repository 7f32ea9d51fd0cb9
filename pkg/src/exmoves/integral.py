"""Integral videos: O(1) subvolume sums and sliding classifier scores.

A linear score over an L1-normalized histogram is a ratio of two voxel sums,
(sum of w[codeword] over points in x) / (number of points in x). Both sums
come from 3D prefix-sum buffers with eight corner lookups, so scoring every
sliding position costs O(R*C*T + positions) regardless of how many points
each box holds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    EMPTY_SCORE,
    QuantizedVideo,
    Volume,
    flatten_weights,
    position_origins,
)
from .errors import DimensionError


class IntegralBuffer:
    """3D prefix sums B(r,c,t) = sum of h over r'<=r, c'<=c, t'<=t.

    Stored with one leading zero plane per axis so corner lookups never branch.
    """

    def __init__(self, padded: np.ndarray):
        padded.setflags(write=False)
        self._padded = padded

    @classmethod
    def from_voxels(cls, voxels: np.ndarray) -> "IntegralBuffer":
        R, C, T = voxels.shape
        padded = np.zeros((R + 1, C + 1, T + 1), dtype=np.float64)
        acc = padded[1:, 1:, 1:]
        np.cumsum(voxels, axis=0, out=acc)
        np.cumsum(acc, axis=1, out=acc)
        np.cumsum(acc, axis=2, out=acc)
        return cls(padded)

    @property
    def dims(self) -> tuple[int, int, int]:
        R, C, T = self._padded.shape
        return (R - 1, C - 1, T - 1)

    @property
    def values(self) -> np.ndarray:
        return self._padded[1:, 1:, 1:]

    @property
    def total(self) -> float:
        return float(self._padded[-1, -1, -1])

    def box_sums(self, origins: np.ndarray, extent: Sequence[int]) -> np.ndarray:
        """Sums over boxes of one ``extent`` at many ``origins`` (P, 3)."""
        P = self._padded
        r0, c0, t0 = (origins[:, i] for i in range(3))
        r1, c1, t1 = r0 + extent[0], c0 + extent[1], t0 + extent[2]
        return (
            P[r1, c1, t1]
            - P[r0, c1, t1]
            - P[r1, c0, t1]
            - P[r1, c1, t0]
            + P[r0, c0, t1]
            + P[r0, c1, t0]
            + P[r1, c0, t0]
            - P[r0, c0, t0]
        )


def subvolume_sum(buffer: IntegralBuffer, vol: Volume) -> float:
    vol.check(buffer.dims)
    return float(buffer.box_sums(np.asarray([vol.origin]), vol.extent)[0])


def _voxel_index(video: QuantizedVideo) -> np.ndarray:
    R, C, T = video.dims
    p = video.points
    return (p[:, 0] * C + p[:, 1]) * T + p[:, 2]


def _accumulate(video: QuantizedVideo, weights=None, mask=None) -> IntegralBuffer:
    idx = _voxel_index(video)
    if mask is not None:
        idx = idx[mask]
        if weights is not None:
            weights = weights[mask]
    n = int(np.prod(video.dims))
    voxels = np.bincount(idx, weights=weights, minlength=n).astype(np.float64)
    return IntegralBuffer.from_voxels(voxels.reshape(video.dims))


def build_denominator(video: QuantizedVideo) -> IntegralBuffer:
    """Point-count integral video. Independent of any model, so share it across a bank."""
    return _accumulate(video)


@dataclass(frozen=True)
class IntegralStack:
    dims: tuple[int, int, int]
    numerators: tuple[IntegralBuffer, ...]
    denominator: IntegralBuffer
    model_id: str = ""

    def scores(self, bias: float, origins: np.ndarray, extent: Sequence[int]) -> np.ndarray:
        num = np.zeros(len(origins))
        for buf in self.numerators:
            num += buf.box_sums(origins, extent)
        den = self.denominator.box_sums(origins, extent)
        out = np.full(len(origins), EMPTY_SCORE, dtype=np.float64)
        # counts are integers stored exactly, so > 0.5 means "at least one point"
        nonempty = den > 0.5
        out[nonempty] = num[nonempty] / den[nonempty]
        return out + bias


def build_integral_stack(
    video: QuantizedVideo,
    weights,
    *,
    denominator: IntegralBuffer | None = None,
    model_id: str = "",
) -> IntegralStack:
    """Per-channel numerator buffers of summed point weights plus the count buffer.

    Pass ``denominator`` to reuse a count buffer already built for this video.
    """
    w = flatten_weights(weights, video.codebook_sizes)
    if denominator is None:
        denominator = build_denominator(video)
    elif denominator.dims != video.dims:
        raise DimensionError("shared denominator buffer was built for a different video size")
    point_w = w[video.global_codes]
    channel = video.points[:, 3]
    numerators = tuple(
        _accumulate(video, point_w, channel == k) for k in range(video.n_channels)
    )
    return IntegralStack(video.dims, numerators, denominator, model_id)


def raw_score(stack: IntegralStack, bias: float, vol: Volume) -> float:
    vol.check(stack.dims)
    return float(stack.scores(bias, np.asarray([vol.origin]), vol.extent)[0])


def sliding_scores(stack: IntegralStack, bias: float, extent, stride) -> tuple[np.ndarray, np.ndarray]:
    """Raw scores at every lattice position.

    Returns ``(origins, scores)``; origins are (P, 3) in the order produced by
    :func:`exmoves.core.enumerate_positions`.
    """
    origins = position_origins(stack.dims, extent, stride)
    return origins, stack.scores(bias, origins, tuple(int(e) for e in extent))


def naive_sliding_scores(video: QuantizedVideo, weights, bias: float, extent, stride):
    """Reference path: build the explicit histogram of every box and take wᵀφ(x) + b.

    Points are sorted by row so each box only scans the slab of rows it spans;
    the work per box still grows with the number of points near it.
    """
    w = flatten_weights(weights, video.codebook_sizes)
    order = np.argsort(video.points[:, 0], kind="stable")
    pts = video.points[order]
    codes = video.global_codes[order]
    rows = pts[:, 0]
    D = video.dictionary_size
    origins = position_origins(video.dims, extent, stride)
    h, wd, l = extent
    out = np.empty(len(origins))
    for i, (r, c, t) in enumerate(origins):
        lo, hi = np.searchsorted(rows, [r, r + h])
        slab = pts[lo:hi]
        inside = (slab[:, 1] >= c) & (slab[:, 1] < c + wd) & (slab[:, 2] >= t) & (slab[:, 2] < t + l)
        counts = np.bincount(codes[lo:hi][inside], minlength=D)
        total = counts.sum()
        if total == 0:
            out[i] = bias + EMPTY_SCORE
        else:
            out[i] = w @ (counts / total) + bias
    return origins, out
