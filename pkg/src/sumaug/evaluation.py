"""Macro-F1 scoring and stratified cross-validated evaluation."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .corpus import Document, FoldAssignment, LabeledCorpus

Predictor = Callable[[Sequence[Document]], Sequence[str]]
Trainer = Callable[[Sequence[Document]], Predictor]
# Returns (augmented document, source document id) pairs derived from the
# train split it was handed.
Augmenter = Callable[[Sequence[Document]], Sequence[tuple[Document, str]]]


class EvaluationError(ValueError):
    pass


class LeakageError(RuntimeError):
    """An augmented example leaked from a held-out document into training."""


@dataclass(frozen=True)
class FoldReport:
    per_fold_f1: tuple[float, ...]
    mean: float
    std: float
    per_class_f1: dict[str, float]

    @classmethod
    def from_folds(cls, per_fold_f1, per_class_f1) -> "FoldReport":
        arr = np.asarray(per_fold_f1, dtype=np.float64)
        return cls(
            per_fold_f1=tuple(float(v) for v in arr),
            mean=float(arr.mean()),
            std=float(arr.std()),  # population std over folds
            per_class_f1=dict(per_class_f1),
        )


def per_class_f1(gold: Sequence[str], pred: Sequence[str]) -> dict[str, float]:
    """F1 per gold class; zero when precision, recall, or their sum is zero."""
    if len(gold) != len(pred):
        raise EvaluationError(f"gold ({len(gold)}) and pred ({len(pred)}) lengths differ")
    if not gold:
        raise EvaluationError("empty inputs")
    tp: Counter[str] = Counter()
    fp: Counter[str] = Counter()
    fn: Counter[str] = Counter()
    for g, p in zip(gold, pred):
        if g == p:
            tp[g] += 1
        else:
            fn[g] += 1
            fp[p] += 1
    scores = {}
    for cls in set(gold):
        denom_p = tp[cls] + fp[cls]
        denom_r = tp[cls] + fn[cls]
        precision = tp[cls] / denom_p if denom_p else 0.0
        recall = tp[cls] / denom_r if denom_r else 0.0
        scores[cls] = (
            2 * precision * recall / (precision + recall) if precision + recall else 0.0
        )
    return scores


def macro_f1(gold: Sequence[str], pred: Sequence[str]) -> float:
    """Unweighted mean of per-class F1 over the distinct gold labels."""
    scores = per_class_f1(gold, pred)
    return sum(scores.values()) / len(scores)


def cross_validate(
    corpus: LabeledCorpus,
    folds: FoldAssignment,
    trainer: Trainer,
    augmenter: Optional[Augmenter] = None,
) -> FoldReport:
    """Train on k-1 folds, score macro-F1 on the held-out fold, aggregate.

    The augmenter, when given, is called with the training split only, and
    every augmented example must trace back to a training-split document
    (checked; violation raises LeakageError). The trainer is responsible for
    fitting its own featurizer per fold.
    """
    fold_of = folds.fold_of
    missing = [d.id for d in corpus.documents if d.id not in fold_of]
    if missing:
        raise EvaluationError(f"documents without fold assignment: {missing[:5]}")
    per_fold = []
    class_sums: defaultdict[str, float] = defaultdict(float)
    class_runs: Counter[str] = Counter()
    for fold in range(folds.k):
        train_docs = [d for d in corpus.documents if fold_of[d.id] != fold]
        heldout = [d for d in corpus.documents if fold_of[d.id] == fold]
        if augmenter is not None:
            heldout_ids = {d.id for d in heldout}
            for aug_doc, source_id in list(augmenter(train_docs)):
                if source_id in heldout_ids:
                    raise LeakageError(
                        f"fold {fold}: augmented example {aug_doc.id!r} derives from "
                        f"held-out document {source_id!r}"
                    )
                train_docs.append(aug_doc)
        try:
            predictor = trainer(train_docs)
            pred = list(predictor(heldout))
        except Exception as exc:
            raise EvaluationError(f"fold {fold}: {exc}") from exc
        gold = [d.label for d in heldout]
        scores = per_class_f1(gold, pred)
        for cls, value in scores.items():
            class_sums[cls] += value
            class_runs[cls] += 1
        per_fold.append(sum(scores.values()) / len(scores))
    mean_per_class = {cls: class_sums[cls] / class_runs[cls] for cls in class_sums}
    return FoldReport.from_folds(per_fold, mean_per_class)
