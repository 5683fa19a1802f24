import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from sklearn.metrics import confusion_matrix

from pipeline.exceptions import LabelError, PreconditionError, ShapeError, UndefinedClassError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts with rows = truth and columns = prediction, in ``labels`` order."""

    counts: np.ndarray
    labels: Tuple[str, ...]

    @property
    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def recalls(self) -> List[float]:
        support = self.support
        return [float(self.counts[i, i] / support[i]) if support[i] else float("nan") for i in range(len(self.labels))]

    def as_rows(self) -> List[List[object]]:
        return [[label] + [int(v) for v in row] for label, row in zip(self.labels, self.counts)]


def confusion(truth: Sequence[str], pred: Sequence[str], label_order: Sequence[str]) -> ConfusionMatrix:
    if len(truth) != len(pred):
        raise ShapeError(f"Got {len(truth)} ground-truth labels but {len(pred)} predictions.")
    labels = tuple(label_order)
    known = set(labels)
    unknown = sorted({label for label in list(truth) + list(pred) if label not in known})
    if unknown:
        raise LabelError(f"Label(s) outside the label order: {', '.join(unknown)}")
    if not truth:
        return ConfusionMatrix(np.zeros((len(labels), len(labels)), dtype=np.int64), labels)
    counts = confusion_matrix(list(truth), list(pred), labels=list(labels))
    return ConfusionMatrix(counts.astype(np.int64), labels)


def uar(cm: ConfusionMatrix, skip_empty: bool = False) -> float:
    """Mean per-class recall.

    With ``skip_empty`` classes without ground-truth items are left out of the
    mean instead of raising.
    """
    support = cm.support
    present = support > 0
    if not skip_empty:
        for label, has_items in zip(cm.labels, present):
            if not has_items:
                raise UndefinedClassError(label)
    if not present.any():
        raise PreconditionError("Confusion matrix holds no items.")
    diagonal = np.diag(cm.counts)[present]
    return float(np.mean(diagonal / support[present]))


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total <= 0:
        raise PreconditionError("Confusion matrix holds no items.")
    return float(np.trace(cm.counts) / cm.total)
