"""Multi-scale sliding evaluation of an EXMOVE bank and octree max-pooling.

Descriptor layout is exemplar-major, then scale, then pyramid cell:
``values[(a * n_scales + s) * n_cells + p]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import QuantizedVideo, Volume, histogram
from .errors import ContractError, IncompatibleModelError
from .exemplar import ExMoveModel
from .integral import build_denominator, build_integral_stack, sliding_scores

DEFAULT_SCALES = (1.0, 0.75, 0.5)


def _axis_bounds(dim: int, n: int) -> np.ndarray:
    """n+1 cell boundaries along one axis; the last cell absorbs the remainder."""
    base = dim // n
    b = np.arange(n + 1, dtype=np.int64) * base
    b[-1] = dim
    return b


@dataclass(frozen=True, eq=False)
class PyramidSpec:
    levels: int = 3
    scales: tuple[float, ...] = DEFAULT_SCALES
    dims: tuple[int, int, int] | None = None

    @property
    def n_cells(self) -> int:
        return sum(8 ** (l - 1) for l in range(1, self.levels + 1))

    @property
    def n_scales(self) -> int:
        return len(self.scales)

    def for_dims(self, dims) -> "PyramidSpec":
        dims = tuple(int(d) for d in dims)
        if dims == self.dims:
            return self
        return PyramidSpec(self.levels, tuple(self.scales), dims)

    def bounds(self) -> np.ndarray:
        """(n_cells, 2, 3) array of [lo, hi) corners, level-major then row/col/time-major."""
        if self.dims is None:
            raise ContractError("pyramid has no video dims; call for_dims first")
        out = []
        for level in range(1, self.levels + 1):
            n = 2 ** (level - 1)
            br, bc, bt = (_axis_bounds(d, n) for d in self.dims)
            for i in range(n):
                for j in range(n):
                    for k in range(n):
                        out.append([[br[i], bc[j], bt[k]], [br[i + 1], bc[j + 1], bt[k + 1]]])
        return np.asarray(out, dtype=np.int64)

    @property
    def cells(self) -> list[Volume | None]:
        """Cells as volumes; None marks a cell left empty because an axis is shorter than the split."""
        cells = []
        for lo, hi in self.bounds():
            ext = hi - lo
            cells.append(Volume(tuple(lo), tuple(ext)) if ext.min() > 0 else None)
        return cells

    def assign(self, centers: np.ndarray) -> np.ndarray:
        """Cell index of each center at every level: (P, levels) into the flat cell list."""
        if self.dims is None:
            raise ContractError("pyramid has no video dims; call for_dims first")
        centers = np.asarray(centers, dtype=np.int64).reshape(-1, 3)
        out = np.empty((len(centers), self.levels), dtype=np.int64)
        offset = 0
        for level in range(1, self.levels + 1):
            n = 2 ** (level - 1)
            idx = []
            for axis, d in enumerate(self.dims):
                base = d // n
                if base == 0:
                    idx.append(np.full(len(centers), n - 1))
                else:
                    idx.append(np.minimum(centers[:, axis] // base, n - 1))
            out[:, level - 1] = offset + (idx[0] * n + idx[1]) * n + idx[2]
            offset += n ** 3
        return out


def build_pyramid(dims, levels: int = 3, scales: Sequence[float] = DEFAULT_SCALES) -> PyramidSpec:
    if levels < 1:
        raise ValueError("pyramid needs at least one level")
    return PyramidSpec(levels, tuple(float(s) for s in scales), tuple(int(d) for d in dims))


def scaled_extent(extent: Sequence[int], scale: float) -> tuple[int, int, int]:
    if not 0 < scale <= 1:
        raise ValueError(f"scale must lie in (0, 1], got {scale}")
    # round half up, never below one voxel
    return tuple(max(1, int(np.floor(side * scale + 0.5))) for side in extent)


@dataclass(frozen=True, eq=False)
class ExmoveDescriptor:
    values: np.ndarray
    layout: tuple[int, int, int]  # (n_exemplars, n_scales, n_cells)
    bank_id: str = ""
    video_id: str = ""

    def __len__(self) -> int:
        return len(self.values)

    def block(self, exemplar: int) -> np.ndarray:
        _, n_s, n_p = self.layout
        return self.values.reshape(self.layout)[exemplar].reshape(n_s, n_p)


def check_bank(bank: Sequence[ExMoveModel], codebook_sizes=None) -> tuple[int, ...]:
    if not bank:
        raise ContractError("EXMOVE bank is empty")
    sizes = bank[0].codebook_sizes
    for m in bank:
        if m.codebook_sizes != sizes:
            raise IncompatibleModelError(
                f"model {m.exemplar_id!r} has codebook sizes {m.codebook_sizes}, bank uses {sizes}"
            )
    if codebook_sizes is not None and tuple(codebook_sizes) != sizes:
        raise IncompatibleModelError(
            f"video codebook sizes {tuple(codebook_sizes)} differ from the bank's {sizes}"
        )
    return sizes


def extract_descriptor(
    video: QuantizedVideo,
    bank: Sequence[ExMoveModel],
    pyramid: PyramidSpec | None = None,
    stride=(8, 8, 4),
    *,
    pool: str = "probability",
    bank_id: str = "",
) -> ExmoveDescriptor:
    """Max-pool calibrated sliding scores of every model, scale and pyramid cell.

    A sliding position belongs to each cell (one per level) containing its
    center voxel. Cells that receive no position stay at 0. ``pool="raw"``
    pools uncalibrated scores instead, for ablations.
    """
    if pool not in ("probability", "raw"):
        raise ValueError(f"unknown pooling target {pool!r}")
    check_bank(bank, video.codebook_sizes)
    if pool == "probability":
        for m in bank:
            if not m.calibrated:
                raise ContractError(f"model {m.exemplar_id!r} is not calibrated")
    pyramid = (pyramid or PyramidSpec()).for_dims(video.dims)
    n_s, n_p = pyramid.n_scales, pyramid.n_cells
    values = np.zeros((len(bank), n_s, n_p))
    den = build_denominator(video)
    for a, model in enumerate(bank):
        stack = build_integral_stack(video, model.weights, denominator=den, model_id=model.exemplar_id)
        for s, scale in enumerate(pyramid.scales):
            extent = scaled_extent(model.exemplar_extent, scale)
            origins, raw = sliding_scores(stack, model.bias, extent, stride)
            if len(origins) == 0:
                continue
            vals = model.probability(raw) if pool == "probability" else raw
            cells = pyramid.assign(origins + (np.asarray(extent) - 1) // 2)
            pooled = np.full(n_p, -np.inf)
            for level in range(cells.shape[1]):
                np.maximum.at(pooled, cells[:, level], vals)
            pooled[np.isinf(pooled)] = 0.0
            values[a, s] = pooled
    return ExmoveDescriptor(values.ravel(), (len(bank), n_s, n_p), bank_id, video.id)


def bow_descriptor(video: QuantizedVideo) -> np.ndarray:
    """Whole-video L1-normalized codeword histogram (the bag-of-words baseline)."""
    return histogram(video, Volume.whole(video.dims)).normalized()
