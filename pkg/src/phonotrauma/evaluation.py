"""Stratified k-fold cross-validation, undersampling, and ROC analysis.

Normalization parameters and model weights for a fold come from that fold's
training rows only; held-out rows are touched only when scoring.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ClassTooSmall, DPIError, SingleClass
from .model import DECISION_THRESHOLD, DpiModel, ZScoreNormalizer, dpi_score, fit_dpi
from .parallel import map_ordered


def repetition_seed(base_seed: int, repetition: int) -> int:
    """Seed for repetition ``r``: ``base_seed XOR r``."""
    return int(base_seed) ^ int(repetition)


# -- folds and balancing -----------------------------------------------------

@dataclass(frozen=True)
class FoldAssignment:
    k: int
    folds: np.ndarray  # fold index per row
    ids: tuple

    @property
    def fold_of(self) -> dict:
        return dict(zip(self.ids, (int(f) for f in self.folds)))

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds != fold)


def stratified_kfold_split(labels, k: int = 10, seed=0, ids: Optional[Sequence] = None) -> FoldAssignment:
    """Shuffle each class with a seeded RNG, then deal it round-robin into ``k`` folds."""
    labels = np.asarray(labels)
    if ids is None:
        ids = tuple(str(i) for i in range(len(labels)))
    rng = np.random.default_rng(seed)
    folds = np.empty(len(labels), dtype=np.int64)
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if len(members) < k:
            raise ClassTooSmall(f"class {cls!r} has {len(members)} members, fewer than k={k}")
        folds[rng.permutation(members)] = np.arange(len(members)) % k
    return FoldAssignment(k, folds, tuple(ids))


def undersample_balance(labels, seed=0) -> np.ndarray:
    """Row indices of all minority-class rows plus a random equal-size subset of the majority.

    Indices are returned in ascending (input) order.
    """
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    if len(classes) < 2 or counts[0] == counts[1]:
        return np.arange(len(labels))
    n_min = counts.min()
    major = classes[np.argmax(counts)]
    rng = np.random.default_rng(seed)
    major_rows = np.flatnonzero(labels == major)
    keep = rng.choice(major_rows, size=n_min, replace=False)
    return np.sort(np.concatenate([np.flatnonzero(labels != major), keep]))


# -- metrics -----------------------------------------------------------------

@dataclass(frozen=True)
class EvalMetrics:
    tp: int
    fp: int
    tn: int
    fn: int

    @classmethod
    def from_predictions(cls, labels, predicted) -> "EvalMetrics":
        labels = np.asarray(labels, dtype=bool)
        predicted = np.asarray(predicted, dtype=bool)
        return cls(
            int(np.sum(labels & predicted)),
            int(np.sum(~labels & predicted)),
            int(np.sum(~labels & ~predicted)),
            int(np.sum(labels & ~predicted)),
        )

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / (self.tp + self.fp + self.tn + self.fn)

    @property
    def sensitivity(self) -> float:
        pos = self.tp + self.fn
        return self.tp / pos if pos else float("nan")

    @property
    def specificity(self) -> float:
        neg = self.tn + self.fp
        return self.tn / neg if neg else float("nan")


@dataclass
class FoldResult:
    repetition: int
    fold: int
    test_rows: np.ndarray
    metrics: Optional[EvalMetrics] = None
    model: Optional[DpiModel] = None
    scores: Optional[np.ndarray] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def normalizer(self) -> Optional[ZScoreNormalizer]:
        return None if self.model is None else self.model.normalizer


def _mean_std(values) -> tuple[float, float]:
    v = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
    if len(v) == 0:
        return float("nan"), float("nan")
    return float(v.mean()), float(v.std(ddof=1)) if len(v) > 1 else 0.0


@dataclass
class EvalReport:
    k: int
    folds: list[FoldResult]
    labels: np.ndarray  # labels of the evaluated rows, by row
    seeds: list[int] = field(default_factory=list)

    @property
    def ok_folds(self) -> list[FoldResult]:
        return [f for f in self.folds if not f.failed]

    @property
    def n_failed(self) -> int:
        return sum(f.failed for f in self.folds)

    @property
    def fold_accuracies(self) -> np.ndarray:
        return np.array([f.metrics.accuracy for f in self.ok_folds])

    @property
    def repetition_accuracies(self) -> np.ndarray:
        """Mean fold accuracy of each repetition, in repetition order."""
        reps = sorted({f.repetition for f in self.ok_folds})
        return np.array(
            [np.mean([f.metrics.accuracy for f in self.ok_folds if f.repetition == r]) for r in reps]
        )

    @property
    def pooled_scores(self) -> tuple[np.ndarray, np.ndarray]:
        """All held-out (score, label) pairs across folds and repetitions."""
        ok = self.ok_folds
        if not ok:
            return np.empty(0), np.empty(0, dtype=int)
        scores = np.concatenate([f.scores for f in ok])
        labels = np.concatenate([self.labels[f.test_rows] for f in ok])
        return scores, labels

    def summary(self) -> dict:
        out = {}
        for name in ("accuracy", "sensitivity", "specificity"):
            mean, std = _mean_std([getattr(f.metrics, name) for f in self.ok_folds])
            out[name] = {"mean": mean, "std": std}
        out["n_folds"] = len(self.ok_folds)
        out["n_failed"] = self.n_failed
        scores, labels = self.pooled_scores
        out["n_pooled"] = int(len(scores))
        try:
            out["auc"] = auc(scores, labels)
        except SingleClass:
            out["auc"] = float("nan")
        return out

    def to_dict(self, include_models: bool = False) -> dict:
        folds = []
        for f in self.folds:
            entry = {"repetition": f.repetition, "fold": f.fold, "n_test": int(len(f.test_rows))}
            if f.failed:
                entry["error"] = f.error
            else:
                m = f.metrics
                entry.update(
                    tp=m.tp, fp=m.fp, tn=m.tn, fn=m.fn,
                    accuracy=m.accuracy, sensitivity=m.sensitivity, specificity=m.specificity,
                )
                if include_models:
                    entry["model"] = f.model.to_dict()
            folds.append(entry)
        return {"k": self.k, "seeds": list(self.seeds), "summary": self.summary(), "folds": folds}


# -- cross-validation --------------------------------------------------------

def evaluate_fold(X, y, train_rows, test_rows, repetition: int = 0, fold: int = 0, **model_kw) -> FoldResult:
    """Fit normalizer and model on ``train_rows``, score ``test_rows``."""
    try:
        model = fit_dpi(X[train_rows], y[train_rows], **model_kw)
    except DPIError as exc:
        return FoldResult(repetition, fold, test_rows, error=f"{type(exc).__name__}: {exc}")
    scores = dpi_score(model, X[test_rows])
    metrics = EvalMetrics.from_predictions(y[test_rows] == 1, scores >= DECISION_THRESHOLD)
    return FoldResult(repetition, fold, test_rows, metrics, model, scores)


def cross_validate_folds(X, y, k, seed, repetition, ids, model_kw) -> list[FoldResult]:
    split = stratified_kfold_split(y, k, seed, ids)
    return [
        evaluate_fold(X, y, split.train_rows(f), split.test_rows(f), repetition, f, **model_kw)
        for f in range(k)
    ]


def run_cross_validation(X, y, k: int = 10, seed=0, ids=None, repetition: int = 0, **model_kw) -> EvalReport:
    """One round of stratified k-fold CV of the DPI pipeline.

    ``y`` holds 1 for PVH and 0 for control. ``model_kw`` goes to
    :func:`phonotrauma.model.train_logistic` (``l2_lambda``, ``tol``, ``max_iter``).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    folds = cross_validate_folds(X, y, k, seed, repetition, ids, model_kw)
    return EvalReport(k, folds, y, [int(seed)] if np.isscalar(seed) else [])


def _one_repetition(r, ctx):
    X, y, k, base_seed, ids, model_kw = ctx
    return cross_validate_folds(X, y, k, repetition_seed(base_seed, r), r, ids, model_kw)


def repeat_cross_validation(X, y, k: int = 10, n_reps: int = 10, base_seed: int = 0, ids=None,
                            workers: int = 1, **model_kw) -> EvalReport:
    """Repeated stratified CV; repetition ``r`` uses seed ``base_seed ^ r``.

    Fold results from all repetitions are pooled into one report.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    ctx = (X, y, k, base_seed, ids, model_kw)
    per_rep = map_ordered(_one_repetition, range(n_reps), workers, ctx)
    folds = [f for rep in per_rep for f in rep]
    return EvalReport(k, folds, y, [repetition_seed(base_seed, r) for r in range(n_reps)])


# -- ROC ---------------------------------------------------------------------

def _check_binary(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    if labels.all() or not labels.any():
        raise SingleClass("ROC needs both classes")
    return scores, labels


def roc_curve(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Threshold sweep, predicting positive when ``score >= threshold``.

    Returns ``(fpr, tpr, thresholds)``. The first point is (0, 0) at an
    infinite threshold; each distinct score adds one point, ending at (1, 1).
    """
    scores, labels = _check_binary(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    s, lab = scores[order], labels[order]
    last_of_run = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp = np.cumsum(lab)[last_of_run]
    fp = np.cumsum(~lab)[last_of_run]
    tpr = np.r_[0.0, tp / lab.sum()]
    fpr = np.r_[0.0, fp / (~lab).sum()]
    thresholds = np.r_[np.inf, s[last_of_run]]
    return fpr, tpr, thresholds


def auc(scores, labels) -> float:
    """Trapezoidal area under :func:`roc_curve`."""
    fpr, tpr, _ = roc_curve(scores, labels)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
