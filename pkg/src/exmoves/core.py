"""Videos of quantized feature points, space-time boxes and codeword histograms.

Everything here is the slow, obviously-correct reference path. The integral
video module reproduces ``histogram``-based scores without ever building a
histogram, and its tests compare against the functions in this file.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, IncompatibleModelError

Triple = tuple[int, int, int]


def _triple(values, name: str) -> Triple:
    out = tuple(int(v) for v in values)
    if len(out) != 3:
        raise DimensionError(f"{name} must have 3 components, got {len(out)}")
    return out  # type: ignore[return-value]


@dataclass(frozen=True)
class Volume:
    """Axis-aligned space-time box: ``origin`` (r0, c0, t0) and ``extent`` (h, w, l)."""

    origin: Triple
    extent: Triple

    def __post_init__(self):
        object.__setattr__(self, "origin", _triple(self.origin, "origin"))
        object.__setattr__(self, "extent", _triple(self.extent, "extent"))
        if min(self.extent) < 1:
            raise DimensionError(f"volume extent must be >= 1 on every axis, got {self.extent}")

    @property
    def end(self) -> Triple:
        """Exclusive upper corner."""
        return tuple(o + e for o, e in zip(self.origin, self.extent))  # type: ignore[return-value]

    @property
    def voxel_count(self) -> int:
        h, w, l = self.extent
        return h * w * l

    @property
    def center(self) -> Triple:
        return tuple(o + (e - 1) // 2 for o, e in zip(self.origin, self.extent))  # type: ignore[return-value]

    def fits(self, dims: Sequence[int]) -> bool:
        return all(o >= 0 for o in self.origin) and all(
            e <= d for e, d in zip(self.end, dims)
        )

    def check(self, dims: Sequence[int]) -> None:
        if not self.fits(dims):
            raise DimensionError(
                f"volume origin={self.origin} extent={self.extent} does not fit video dims {tuple(dims)}"
            )

    def key(self) -> tuple[int, ...]:
        return self.origin + self.extent

    @classmethod
    def whole(cls, dims: Sequence[int]) -> "Volume":
        return cls((0, 0, 0), tuple(dims))


@dataclass(frozen=True, eq=False)
class QuantizedVideo:
    """An R x C x T grid holding quantized feature points.

    ``points`` is an integer array of shape (N, 5) with columns
    (r, c, t, channel, codeword). The array is made read-only on construction.
    """

    dims: Triple
    codebook_sizes: tuple[int, ...]
    points: np.ndarray
    id: str = ""
    _codes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        dims = _triple(self.dims, "dims")
        if min(dims) < 1:
            raise DimensionError(f"video dims must be positive, got {dims}")
        sizes = tuple(int(d) for d in self.codebook_sizes)
        if not sizes or min(sizes) < 1:
            raise DimensionError(f"codebook sizes must be positive, got {sizes}")
        pts = np.asarray(self.points, dtype=np.int64)
        if pts.size == 0:
            pts = np.zeros((0, 5), dtype=np.int64)
        if pts.ndim != 2 or pts.shape[1] != 5:
            raise DimensionError(f"points must have shape (N, 5), got {pts.shape}")
        if len(pts):
            if pts.min() < 0:
                raise DimensionError("negative coordinate, channel or codeword in points")
            for axis in range(3):
                if pts[:, axis].max() >= dims[axis]:
                    raise DimensionError(f"point coordinate outside video along axis {axis}")
            if pts[:, 3].max() >= len(sizes):
                raise DimensionError("point channel outside the video's channel count")
            if np.any(pts[:, 4] >= np.asarray(sizes)[pts[:, 3]]):
                raise DimensionError("point codeword outside its channel's codebook")
        pts = pts.copy()
        pts.setflags(write=False)
        codes = channel_offsets(sizes)[pts[:, 3]] + pts[:, 4]
        codes.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "codebook_sizes", sizes)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_codes", codes)

    @property
    def n_channels(self) -> int:
        return len(self.codebook_sizes)

    @property
    def dictionary_size(self) -> int:
        """Total number of bins D across all channels."""
        return int(sum(self.codebook_sizes))

    @property
    def global_codes(self) -> np.ndarray:
        """Codeword of each point as an index into the concatenated dictionary."""
        return self._codes

    def __len__(self) -> int:
        return len(self.points)

    def with_points(self, extra: np.ndarray) -> "QuantizedVideo":
        extra = np.asarray(extra, dtype=np.int64).reshape(-1, 5)
        return QuantizedVideo(self.dims, self.codebook_sizes, np.vstack([self.points, extra]), self.id)


def channel_offsets(codebook_sizes: Sequence[int]) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(codebook_sizes)[:-1]]).astype(np.int64)


@dataclass(frozen=True)
class CodewordHistogram:
    counts: tuple[np.ndarray, ...]
    total: int

    @property
    def concatenated(self) -> np.ndarray:
        return np.concatenate(self.counts)

    def normalized(self) -> np.ndarray:
        """L1-normalized concatenated histogram; all zeros when the volume is empty."""
        flat = self.concatenated.astype(np.float64)
        if self.total == 0:
            return flat
        return flat / self.total


def points_in(video: QuantizedVideo, vol: Volume) -> np.ndarray:
    """Boolean mask of the video's points lying inside ``vol``."""
    xyz = video.points[:, :3]
    lo = np.asarray(vol.origin)
    hi = np.asarray(vol.end)
    return np.all((xyz >= lo) & (xyz < hi), axis=1)


def histogram(video: QuantizedVideo, vol: Volume) -> CodewordHistogram:
    vol.check(video.dims)
    mask = points_in(video, vol)
    flat = np.bincount(video.global_codes[mask], minlength=video.dictionary_size)
    offsets = channel_offsets(video.codebook_sizes)
    counts = tuple(
        flat[o : o + d].copy() for o, d in zip(offsets, video.codebook_sizes)
    )
    return CodewordHistogram(counts, int(mask.sum()))


def intersection_count(a: Volume, b: Volume) -> int:
    n = 1
    for lo_a, hi_a, lo_b, hi_b in zip(a.origin, a.end, b.origin, b.end):
        side = min(hi_a, hi_b) - max(lo_a, lo_b)
        if side <= 0:
            return 0
        n *= side
    return n


def overlap_ratio(a: Volume, b: Volume) -> float:
    """|a ∩ b| / |b|, measured on full space-time boxes. Not symmetric."""
    return intersection_count(a, b) / b.voxel_count


def lattice_axes(dims: Sequence[int], extent: Sequence[int], stride: Sequence[int]):
    """Per-axis origin coordinates of the sliding lattice (empty if the extent does not fit)."""
    return [np.arange(0, d - e + 1, s, dtype=np.int64) for d, e, s in zip(dims, extent, stride)]


def position_origins(dims, extent, stride) -> np.ndarray:
    """(P, 3) array of lattice origins in row, col, time-major order."""
    if any(int(s) < 1 for s in stride):
        raise DimensionError(f"stride must be >= 1, got {tuple(stride)}")
    axes = lattice_axes(dims, extent, stride)
    if any(len(a) == 0 for a in axes):
        return np.zeros((0, 3), dtype=np.int64)
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


def enumerate_positions(dims, extent, stride) -> list[Volume]:
    extent = _triple(extent, "extent")
    return [Volume(tuple(o), extent) for o in position_origins(dims, extent, stride)]


EMPTY_SCORE = 0.0


def flatten_weights(weights, codebook_sizes: Sequence[int]) -> np.ndarray:
    """Concatenate per-channel weight vectors, checking them against ``codebook_sizes``."""
    if isinstance(weights, np.ndarray) and weights.ndim == 1:
        if len(weights) != sum(codebook_sizes):
            raise IncompatibleModelError(
                f"weight length {len(weights)} != dictionary size {sum(codebook_sizes)}"
            )
        return np.asarray(weights, dtype=np.float64)
    parts = [np.asarray(w, dtype=np.float64).ravel() for w in weights]
    got = tuple(len(p) for p in parts)
    if got != tuple(codebook_sizes):
        raise IncompatibleModelError(
            f"per-channel weight lengths {got} do not match codebook sizes {tuple(codebook_sizes)}"
        )
    return np.concatenate(parts)


def histogram_score(video: QuantizedVideo, weights, bias: float, vol: Volume) -> float:
    """wᵀφ(x) + b through an explicit histogram; bias alone for point-free volumes."""
    w = flatten_weights(weights, video.codebook_sizes)
    h = histogram(video, vol)
    if h.total == 0:
        return float(bias) + EMPTY_SCORE
    return float(w @ h.normalized()) + float(bias)


def overlap_ratios(origins: np.ndarray, extent: Sequence[int], ref: Volume) -> np.ndarray:
    """Vectorized ``overlap_ratio`` of boxes (origins, extent) against ``ref``."""
    lo = np.maximum(origins, np.asarray(ref.origin))
    hi = np.minimum(origins + np.asarray(extent), np.asarray(ref.end))
    sides = np.clip(hi - lo, 0, None)
    return np.prod(sides, axis=1) / ref.voxel_count
