"""Exemplar-SVM training with alternating hard mining, and its calibration.

One model is learned from a single annotated positive box against many
unannotated negative videos. Training alternates between solving a linear SVM
on an active set and scanning every video (through integral videos) for
boxes that violate the margin.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .calibration import fit_platt, sigmoid_probability
from .core import QuantizedVideo, Volume, histogram, overlap_ratios
from .errors import ContractError, DegenerateSetError, IncompatibleModelError
from .integral import build_denominator, build_integral_stack, sliding_scores
from .svm import SVMSolution, fit_hinge_svm, primal_objective


@dataclass(frozen=True, eq=False)
class ExMoveModel:
    weights: tuple[np.ndarray, ...]
    bias: float
    exemplar_extent: tuple[int, int, int]
    platt: tuple[float, float] | None = None
    exemplar_id: str = ""
    training_meta: dict = field(default_factory=dict)

    @property
    def codebook_sizes(self) -> tuple[int, ...]:
        return tuple(len(w) for w in self.weights)

    @property
    def flat_weights(self) -> np.ndarray:
        return np.concatenate(self.weights)

    @property
    def calibrated(self) -> bool:
        return self.platt is not None

    def decision(self, features: np.ndarray) -> np.ndarray:
        """Raw scores wᵀφ + b for rows of normalized histograms."""
        return np.asarray(features) @ self.flat_weights + self.bias

    def probability(self, raw_scores) -> np.ndarray:
        if self.platt is None:
            raise ContractError(f"model {self.exemplar_id!r} is not calibrated")
        return sigmoid_probability(raw_scores, *self.platt)


@dataclass(frozen=True)
class ActiveEntry:
    video_id: str
    volume: Volume
    label: int
    features: np.ndarray = field(repr=False, compare=False)
    iteration: int = 0
    mined_score: float | None = None


class ActiveSet:
    """Labelled training boxes, deduplicated on (video, box)."""

    def __init__(self):
        self.entries: list[ActiveEntry] = []
        self._keys: set = set()

    def key(self, video_id: str, vol: Volume):
        return (video_id, vol.key())

    def __contains__(self, item) -> bool:
        return item in self._keys

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, entry: ActiveEntry) -> bool:
        k = self.key(entry.video_id, entry.volume)
        if k in self._keys:
            return False
        self._keys.add(k)
        self.entries.append(entry)
        return True

    @property
    def n_pos(self) -> int:
        return sum(1 for e in self.entries if e.label > 0)

    @property
    def n_neg(self) -> int:
        return len(self.entries) - self.n_pos

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        X = np.vstack([e.features for e in self.entries])
        y = np.array([e.label for e in self.entries], dtype=np.float64)
        return X, y


def balanced_costs(y: np.ndarray, C: float) -> np.ndarray:
    """C1 = C * |S-|/|S| on positives and C2 = C * |S+|/|S| on negatives."""
    n = len(y)
    n_pos = float(np.sum(y > 0))
    return np.where(y > 0, C * (n - n_pos) / n, C * n_pos / n)


def solve_linear_svm(active: ActiveSet, C1: float, C2: float, *, tol: float = 1e-6) -> SVMSolution:
    if active.n_pos == 0 or active.n_neg == 0:
        raise DegenerateSetError(
            f"active set has {active.n_pos} positive and {active.n_neg} negative entries"
        )
    if C1 <= 0 or C2 <= 0:
        raise ValueError("C1 and C2 must be positive")
    X, y = active.arrays()
    return fit_hinge_svm(X, y, np.where(y > 0, C1, C2), tol=tol)


def active_objective(active: ActiveSet, w, b, C1: float, C2: float) -> float:
    X, y = active.arrays()
    return primal_objective(X, y, np.where(y > 0, C1, C2), np.asarray(w), b)


@dataclass
class ExMoveParams:
    C: float = 1.0
    max_iterations: int = 10
    k_pos: int = 10
    k_neg: int = 3
    stride: tuple[int, int, int] = (4, 4, 4)
    seed: int = 0
    solver_tol: float = 1e-6


def _features(video: QuantizedVideo, vol: Volume) -> np.ndarray:
    return histogram(video, vol).normalized()


def _video_key(video: QuantizedVideo, index: int, prefix: str) -> str:
    return video.id if video.id else f"{prefix}{index}"


def _split(flat: np.ndarray, sizes: Sequence[int]) -> tuple[np.ndarray, ...]:
    return tuple(np.split(flat.copy(), np.cumsum(sizes)[:-1]))


def train_exmove(
    positive: QuantizedVideo,
    exemplar: Volume,
    negatives: Sequence[QuantizedVideo],
    params: ExMoveParams | None = None,
    *,
    exemplar_id: str = "",
) -> tuple[ExMoveModel, ActiveSet]:
    """Learn one uncalibrated EXMOVE; returns the model and the final active set.

    Negatives must come from action classes other than the exemplar's; that
    is the caller's responsibility.
    """
    params = params or ExMoveParams()
    exemplar.check(positive.dims)
    if not negatives:
        raise DegenerateSetError("exemplar training needs at least one negative video")
    sizes = positive.codebook_sizes
    for v in negatives:
        if v.codebook_sizes != sizes:
            raise IncompatibleModelError(
                f"negative video {v.id!r} has codebook sizes {v.codebook_sizes}, expected {sizes}"
            )
    extent = exemplar.extent
    rng = np.random.default_rng(params.seed)
    pos_key = _video_key(positive, 0, "pos")
    neg_keys = [_video_key(v, i, "neg") for i, v in enumerate(negatives)]

    active = ActiveSet()
    active.add(ActiveEntry(pos_key, exemplar, +1, _features(positive, exemplar)))
    for key, video in zip(neg_keys, negatives):
        if any(e > d for e, d in zip(extent, video.dims)):
            continue
        origin = tuple(int(rng.integers(0, d - e + 1)) for d, e in zip(video.dims, extent))
        vol = Volume(origin, extent)
        active.add(ActiveEntry(key, vol, -1, _features(video, vol)))
    if active.n_neg == 0:
        raise DegenerateSetError("no negative video is large enough to hold the exemplar volume")

    pos_den = build_denominator(positive)
    neg_dens = [build_denominator(v) for v in negatives]
    objectives = []
    converged = False
    iteration = 0
    sol = None
    for iteration in range(1, params.max_iterations + 1):
        X, y = active.arrays()
        sol = fit_hinge_svm(X, y, balanced_costs(y, params.C), tol=params.solver_tol)
        objectives.append(sol.objective)
        w, b = sol.weights, sol.bias
        added = 0

        # false negatives: boxes mostly covering the exemplar but scoring below 1
        stack = build_integral_stack(positive, w, denominator=pos_den)
        origins, scores = sliding_scores(stack, b, extent, params.stride)
        ov = overlap_ratios(origins, extent, exemplar)
        added += _mine(active, positive, pos_key, origins, extent, scores,
                       (scores < 1.0) & (ov > 0.5), +1, params.k_pos, iteration)

        # false positives: boxes in negative videos scoring above -1
        for key, video, den in zip(neg_keys, negatives, neg_dens):
            stack = build_integral_stack(video, w, denominator=den)
            origins, scores = sliding_scores(stack, b, extent, params.stride)
            added += _mine(active, video, key, origins, extent, scores,
                           scores > -1.0, -1, params.k_neg, iteration)
        if added == 0:
            converged = True
            break

    model = ExMoveModel(
        weights=_split(sol.weights, sizes),
        bias=float(sol.bias),
        exemplar_extent=extent,
        platt=None,
        exemplar_id=exemplar_id or pos_key,
        training_meta={
            "iterations": iteration,
            "active_size": len(active),
            "converged": converged,
            "seed": params.seed,
            "objectives": objectives,
        },
    )
    return model, active


def _mine(active, video, key, origins, extent, scores, violating, label, k, iteration) -> int:
    """Add up to ``k`` new violators, worst first; ties keep lattice order."""
    idx = np.flatnonzero(violating)
    if len(idx) == 0:
        return 0
    # positives: lowest score is worst; negatives: highest score is worst
    order = np.argsort(scores[idx] if label > 0 else -scores[idx], kind="stable")
    added = 0
    for i in idx[order]:
        if added >= k:
            break
        vol = Volume(tuple(origins[i]), extent)
        if active.key(key, vol) in active:
            continue
        active.add(ActiveEntry(key, vol, label, _features(video, vol), iteration, float(scores[i])))
        added += 1
    return added


def calibrate(model: ExMoveModel, final_active: ActiveSet) -> ExMoveModel:
    """Fit the Platt sigmoid on raw scores (bias included) of the final active set."""
    X, y = final_active.arrays()
    if X.shape[1] != len(model.flat_weights):
        raise IncompatibleModelError("active-set features do not match the model's dictionary")
    alpha, beta = fit_platt(model.decision(X), y)
    return replace(model, platt=(alpha, beta))

