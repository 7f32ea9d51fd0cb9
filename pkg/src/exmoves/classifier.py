"""One-vs-rest linear SVMs on descriptors, and exemplar-level recursive elimination."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateSetError, DimensionError
from .svm import fit_hinge_svm


@dataclass(frozen=True, eq=False)
class ActionClassifierBank:
    classes: tuple[str, ...]
    weights: np.ndarray  # (n_classes, dim)
    biases: np.ndarray  # (n_classes,)
    C: float
    training_meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def decision(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise DimensionError(f"descriptor length {X.shape[1]} != classifier length {self.dim}")
        return X @ self.weights.T + self.biases

    def predict_many(self, X: np.ndarray) -> list[str]:
        # argmax returns the first maximum, i.e. ties go to the earlier class
        return [self.classes[i] for i in np.argmax(self.decision(X), axis=1)]

    def accuracy(self, X, labels: Sequence[str]) -> float:
        pred = self.predict_many(X)
        return float(np.mean([p == t for p, t in zip(pred, labels)]))


def train_ovr(X, labels: Sequence[str], C: float = 1.0, *, tol: float = 1e-6) -> ActionClassifierBank:
    """One binary hinge-loss SVM per class (class vs rest), cost C on every example."""
    X = np.asarray(X, dtype=np.float64)
    labels = [str(l) for l in labels]
    if len(labels) != len(X):
        raise DimensionError("descriptor and label counts differ")
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise DegenerateSetError("one-vs-rest training needs at least two classes")
    lab = np.asarray(labels)
    W = np.zeros((len(classes), X.shape[1]))
    b = np.zeros(len(classes))
    objectives = []
    for i, cls in enumerate(classes):
        y = np.where(lab == cls, 1.0, -1.0)
        sol = fit_hinge_svm(X, y, C, tol=tol)
        W[i], b[i] = sol.weights, sol.bias
        objectives.append(sol.objective)
    return ActionClassifierBank(classes, W, b, float(C), {"objectives": objectives})


def predict(bank: ActionClassifierBank, descriptor) -> tuple[str, np.ndarray]:
    values = getattr(descriptor, "values", descriptor)
    scores = bank.decision(values)[0]
    return bank.classes[int(np.argmax(scores))], scores


def select_c(X, labels, grid=(0.1, 1.0, 10.0, 100.0), folds: int = 3, seed: int = 0):
    """Pick C by k-fold cross-validation accuracy; returns (best_C, {C: mean accuracy})."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray([str(l) for l in labels])
    fold = np.random.default_rng(seed).permutation(len(labels)) % folds
    record = {}
    for C in grid:
        accs = []
        for f in range(folds):
            tr, te = fold != f, fold == f
            if len(set(labels[tr])) < 2 or not te.any():
                continue
            bank = train_ovr(X[tr], labels[tr], C)
            accs.append(bank.accuracy(X[te], labels[te]))
        record[float(C)] = float(np.mean(accs)) if accs else 0.0
    best = max(record, key=lambda c: (record[c], -c))
    return best, record


@dataclass
class RfeTrace:
    elimination_order: list[str]
    accuracy_curve: list[float]  # held-out accuracy after each elimination
    remaining: list[int]  # exemplars left after each elimination
    survivors: list[str]
    full_accuracy: float | None = None


def exemplar_usage(bank: ActionClassifierBank, n_exemplars: int) -> np.ndarray:
    """Mean |w| over all classes and all entries of each exemplar's block."""
    blocks = np.abs(bank.weights).reshape(len(bank.classes), n_exemplars, -1)
    return blocks.mean(axis=(0, 2))


def rfe_rank(
    X,
    labels: Sequence[str],
    layout: tuple[int, int, int],
    C: float,
    survivors: int,
    *,
    heldout: tuple[np.ndarray, Sequence[str]] | None = None,
    exemplar_ids: Sequence[str] | None = None,
) -> RfeTrace:
    """Drop the least used exemplar block one at a time, retraining from scratch each step."""
    X = np.asarray(X, dtype=np.float64)
    n_a, n_s, n_p = layout
    block = n_s * n_p
    if X.shape[1] != n_a * block:
        raise DimensionError(f"descriptor length {X.shape[1]} != {n_a}x{n_s}x{n_p}")
    if not 0 < survivors < n_a:
        raise ValueError(f"survivors must lie in [1, {n_a - 1}], got {survivors}")
    ids = list(exemplar_ids) if exemplar_ids is not None else [str(i) for i in range(n_a)]
    if len(ids) != n_a:
        raise DimensionError("exemplar id count does not match the layout")
    if heldout is not None:
        hX = np.asarray(heldout[0], dtype=np.float64)
        if hX.shape[1] != X.shape[1]:
            raise DimensionError("held-out descriptors do not match the training layout")

    def columns(alive):
        return np.concatenate([np.arange(a * block, (a + 1) * block) for a in alive])

    def evaluate(bank, alive):
        if heldout is None:
            return None
        return bank.accuracy(hX[:, columns(alive)], heldout[1])

    alive = list(range(n_a))
    bank = train_ovr(X, labels, C)
    trace = RfeTrace([], [], [], [], evaluate(bank, alive))
    while len(alive) > survivors:
        usage = exemplar_usage(bank, len(alive))
        drop = int(np.argmin(usage))  # first minimum, i.e. ties go to the earlier exemplar
        trace.elimination_order.append(ids[alive.pop(drop)])
        bank = train_ovr(X[:, columns(alive)], labels, C)
        acc = evaluate(bank, alive)
        if acc is not None:
            trace.accuracy_curve.append(acc)
        trace.remaining.append(len(alive))
    trace.survivors = [ids[a] for a in alive]
    return trace
