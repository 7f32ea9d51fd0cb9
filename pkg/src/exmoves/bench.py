"""Timing of integral-video scoring against naive per-box rescanning."""

from __future__ import annotations

import time

import numpy as np

from .core import QuantizedVideo, position_origins
from .integral import build_integral_stack, naive_sliding_scores, sliding_scores


def random_video(dims, density: float, codebook_sizes=(64,), seed: int = 0, video_id: str = "") -> QuantizedVideo:
    """Uniformly scattered points, ``density`` points per voxel per channel on average."""
    rng = np.random.default_rng(seed)
    n = rng.binomial(int(np.prod(dims)), density)
    xyz = np.column_stack([rng.integers(0, d, size=n) for d in dims])
    parts = []
    for k, d in enumerate(codebook_sizes):
        parts.append(np.column_stack([xyz, np.full(n, k), rng.integers(0, d, size=n)]))
    return QuantizedVideo(tuple(dims), tuple(codebook_sizes), np.vstack(parts), video_id)


def bench_sliding(dims=(64, 64, 64), extent=(16, 16, 16), stride=(2, 2, 3), density: float = 0.05,
                  seed: int = 0, repeats: int = 1) -> dict:
    video = random_video(dims, density, seed=seed)
    rng = np.random.default_rng(seed + 1)
    w = rng.normal(size=video.dictionary_size)
    b = float(rng.normal())
    n_pos = len(position_origins(dims, extent, stride))

    naive_t, fast_t = [], []
    for _ in range(repeats):
        t0 = time.perf_counter()
        _, slow = naive_sliding_scores(video, w, b, extent, stride)
        naive_t.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        stack = build_integral_stack(video, w)
        _, fast = sliding_scores(stack, b, extent, stride)
        fast_t.append(time.perf_counter() - t0)

    origins = position_origins(dims, extent, stride)
    counts = build_integral_stack(video, w).denominator.box_sums(origins, extent)
    naive_s, fast_s = min(naive_t), min(fast_t)
    return {
        "dims": list(dims),
        "extent": list(extent),
        "stride": list(stride),
        "points": len(video),
        "positions": n_pos,
        "mean_points_per_volume": float(counts.mean()),
        "naive_seconds": naive_s,
        "integral_seconds": fast_s,
        "speedup": naive_s / fast_s,
        "max_abs_diff": float(np.max(np.abs(slow - fast))),
        "scores_match": bool(np.allclose(fast, slow, rtol=1e-9, atol=1e-12)),
    }
