"""Planted-motif synthetic videos for exercising the whole pipeline without real footage.

Every video belongs to one class. Its class motif is a dense cloud of that
class's codewords inside a labelled box. On top of that the video receives
uniform background noise of shared codewords, plus a diffuse cloud of a
randomly chosen *other* class's codewords scattered outside the box. The cloud
holds about as many points as that class's own motif would, so global
bag-of-words counts see two classes' codewords in similar amounts and only a
local detector can tell which of them is concentrated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import QuantizedVideo, Volume
from .errors import DimensionError


@dataclass
class SyntheticSpec:
    n_classes: int = 3
    motif_size: int = 3  # codewords per class motif, per channel
    noise_rate: float = 0.02  # background points per voxel
    dims: tuple[int, int, int] = (32, 32, 32)
    seed: int = 0
    videos_per_class: int = 30
    test_per_class: int = 10
    exemplars_per_class: int = 2
    motif_density: tuple[float, float] = (0.25, 0.4)
    motif_extent: tuple[int, int] = (8, 13)  # per-axis side range of a class's box shape
    distractor_scale: float = 1.0  # size of the diffuse other-class cloud relative to a motif
    background_codewords: int = 8
    n_channels: int = 1

    @property
    def codebook_size(self) -> int:
        return self.n_classes * self.motif_size + self.background_codewords


@dataclass
class SyntheticDataset:
    videos: list[QuantizedVideo]
    labels: list[str]
    volumes: list[Volume]  # planted motif box of every video
    splits: list[str]  # "train" or "test"
    exemplars: list[int] = field(default_factory=list)  # indices of annotated exemplar videos
    spec: SyntheticSpec | None = None

    def indices(self, split: str) -> list[int]:
        return [i for i, s in enumerate(self.splits) if s == split]


def _motif_codes(cls: int, spec: SyntheticSpec) -> np.ndarray:
    return np.arange(cls * spec.motif_size, (cls + 1) * spec.motif_size)


def _background_codes(spec: SyntheticSpec) -> np.ndarray:
    start = spec.n_classes * spec.motif_size
    return np.arange(start, start + spec.background_codewords)


def _points(rng, xyz: np.ndarray, codes: np.ndarray, n_channels: int) -> np.ndarray:
    """One point per channel at every location, codeword drawn from ``codes``."""
    if len(xyz) == 0:
        return np.zeros((0, 5), dtype=np.int64)
    rows = []
    for k in range(n_channels):
        cw = rng.choice(codes, size=len(xyz))
        rows.append(np.column_stack([xyz, np.full(len(xyz), k), cw]))
    return np.vstack(rows)


def gen_synthetic(spec: SyntheticSpec) -> SyntheticDataset:
    dims = tuple(spec.dims)
    lo, hi = spec.motif_extent
    if hi > min(dims) or lo < 1 or lo > hi:
        raise DimensionError(f"motif extent range {spec.motif_extent} infeasible for dims {dims}")
    if spec.n_classes < 2:
        raise ValueError("need at least two classes")
    rng = np.random.default_rng(spec.seed)
    shapes = [tuple(int(s) for s in rng.integers(lo, hi + 1, size=3)) for _ in range(spec.n_classes)]
    n_vox = int(np.prod(dims))
    sizes = (spec.codebook_size,) * spec.n_channels
    bg = _background_codes(spec)

    videos, labels, volumes, splits, exemplars = [], [], [], [], []
    per_class = spec.videos_per_class + spec.test_per_class
    for cls in range(spec.n_classes):
        for j in range(per_class):
            ext = shapes[cls]
            origin = tuple(int(rng.integers(0, d - e + 1)) for d, e in zip(dims, ext))
            box = Volume(origin, ext)
            density = rng.uniform(*spec.motif_density)
            inside = rng.random(box.voxel_count) < density
            local = np.argwhere(inside.reshape(ext)) + np.asarray(origin)
            parts = [_points(rng, local, _motif_codes(cls, spec), spec.n_channels)]

            # diffuse copy of another class's motif, outside the box, with a count
            # distributed like that class's own motif count
            other = int(rng.choice([c for c in range(spec.n_classes) if c != cls]))
            n_other = int(np.prod(shapes[other]))
            n_dis = rng.binomial(n_other, rng.uniform(*spec.motif_density))
            n_dis = int(round(n_dis * spec.distractor_scale))
            outside = np.ones(dims, dtype=bool)
            outside[box.origin[0]:box.end[0], box.origin[1]:box.end[1], box.origin[2]:box.end[2]] = False
            free = np.flatnonzero(outside.ravel())
            pick = rng.choice(free, size=min(n_dis, len(free)), replace=False)
            xyz = np.column_stack(np.unravel_index(pick, dims))
            parts.append(_points(rng, xyz, _motif_codes(other, spec), spec.n_channels))

            noisy = np.flatnonzero(rng.random(n_vox) < spec.noise_rate)
            xyz = np.column_stack(np.unravel_index(noisy, dims))
            parts.append(_points(rng, xyz, bg, spec.n_channels))

            split = "train" if j < spec.videos_per_class else "test"
            vid = f"c{cls}_{split}_{j:03d}"
            videos.append(QuantizedVideo(dims, sizes, np.vstack(parts), vid))
            labels.append(f"class{cls}")
            volumes.append(box)
            splits.append(split)
            if j < spec.exemplars_per_class:
                exemplars.append(len(videos) - 1)
    return SyntheticDataset(videos, labels, volumes, splits, exemplars, spec)


def negatives_for(dataset: SyntheticDataset, index: int, split: str = "train") -> list[QuantizedVideo]:
    """Training videos whose label differs from video ``index``'s."""
    label = dataset.labels[index]
    return [
        v for v, lab, s in zip(dataset.videos, dataset.labels, dataset.splits)
        if lab != label and s == split
    ]
