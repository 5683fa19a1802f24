"""Hyper-parameter search on validation UAR and the single-probe test protocol."""

import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from classifier.evaluation.metrics import ConfusionMatrix, accuracy, confusion, uar
from classifier.features.functionals import FeatureVector
from classifier.kelm import KelmModel, gram, predict_batch, solve_kelm, target_matrix, train_kelm
from classifier.normalization import NormMode, apply_norm, as_matrix, fit_norm
from pipeline.exceptions import NumericalError, PreconditionError, ProtocolError
from pipeline.utils.atomic import atomic_write
from pipeline.utils.table_loader import TableBatchLoader, write_table

logger = logging.getLogger(__name__)

DEFAULT_GRIDS: Dict[NormMode, List[float]] = {
    NormMode.ZN: [10.0 ** e for e in range(-6, 2)],
    NormMode.ZN_L2: [10.0 ** e for e in range(-1, 7)],
}


@dataclass(frozen=True)
class GridPoint:
    C: float
    accuracy: float
    uar: float


@dataclass
class GridReport:
    norm_mode: NormMode
    best_C: float
    points: List[GridPoint] = field(default_factory=list)
    missing_classes: Tuple[str, ...] = ()
    skipped: Tuple[float, ...] = ()

    @property
    def best(self) -> GridPoint:
        return next(point for point in self.points if point.C == self.best_C)


@dataclass(frozen=True)
class TestReport:
    __test__ = False

    task: str
    norm_mode: NormMode
    C: float
    accuracy: float
    uar: float
    confusion: ConfusionMatrix
    model: KelmModel


def _labels(vectors: Sequence[FeatureVector], name: str) -> List[str]:
    labels = [vector.label for vector in vectors]
    if any(label is None for label in labels):
        raise PreconditionError(f"Every {name} vector needs a label.")
    return labels


def check_disjoint(**sets: Sequence[FeatureVector]) -> None:
    """Raise when chunks of different sets overlap in time on the same recording."""
    spans: Dict[str, List[Tuple[float, float, str]]] = {}
    for name, vectors in sets.items():
        for vector in vectors:
            ref = vector.chunk_ref
            if ref is not None:
                spans.setdefault(ref.source_id, []).append((ref.interval.begin_s, ref.interval.end_s, name))
    for source_id, items in spans.items():
        items.sort()
        # Sweep keeping the furthest end reached by each set so far.
        reach: Dict[str, float] = {}
        for begin, end, name in items:
            for other, other_end in reach.items():
                if other != name and other_end > begin:
                    raise ProtocolError(f"{name} and {other} chunks overlap on {source_id} at {begin} s.")
            reach[name] = max(reach.get(name, -np.inf), end)


def grid_search(
    train: Sequence[FeatureVector],
    valid: Sequence[FeatureVector],
    grid: Optional[Sequence[float]],
    norm_mode: NormMode,
) -> Tuple[float, GridReport]:
    """Train on ``train`` for every C and score UAR on ``valid``; ties go to the smaller C."""
    norm_mode = NormMode(norm_mode)
    grid = sorted(DEFAULT_GRIDS[norm_mode] if grid is None else grid)
    if not grid:
        raise PreconditionError("The C grid is empty.")
    check_disjoint(train=train, valid=valid)
    train_labels = _labels(train, "training")
    valid_labels = _labels(valid, "validation")
    label_order = tuple(sorted(set(train_labels)))
    unseen = sorted(set(valid_labels) - set(label_order))
    if unseen:
        raise ProtocolError(
            f"The validation split holds class(es) absent from the training split: {', '.join(unseen)}."
        )

    stats = fit_norm(train, norm_mode.apply_l2)
    train_z = apply_norm(as_matrix(train), stats)
    valid_z = apply_norm(as_matrix(valid), stats)
    kernel = gram(train_z, train_z)
    valid_kernel = gram(valid_z, train_z)
    targets = target_matrix(train_labels, label_order)

    missing = tuple(label for label in label_order if label not in set(valid_labels))
    if missing:
        logger.warning(
            "Validation set lacks class(es) %s; UAR is averaged over the classes present.", ", ".join(missing)
        )

    points: List[GridPoint] = []
    skipped: List[float] = []
    for C in grid:
        try:
            beta = solve_kelm(kernel, targets, C)
        except NumericalError as error:
            logger.warning("%s C=%g skipped: %s", norm_mode.value, C, error)
            skipped.append(float(C))
            continue
        predicted = [label_order[i] for i in np.argmax(valid_kernel @ beta, axis=1)]
        cm = confusion(valid_labels, predicted, label_order)
        point = GridPoint(C=float(C), accuracy=accuracy(cm), uar=uar(cm, skip_empty=True))
        points.append(point)
        logger.info("%s C=%g: valid accuracy %.4f, UAR %.4f", norm_mode.value, C, point.accuracy, point.uar)

    if not points:
        raise NumericalError(f"Every C in the {norm_mode.value} grid failed to solve.")
    best = points[0]
    for point in points[1:]:
        if point.uar > best.uar:
            best = point
    return best.C, GridReport(norm_mode, best.C, points, missing, tuple(skipped))


class TestProbeLedger:
    """Records test-set probes and refuses a second one for the same (task, norm)."""

    __test__ = False
    COLUMNS = ["task", "norm", "C", "timestamp"]

    def __init__(self, path: Optional[Path] = None) -> None:
        self.path = Path(path) if path else None
        self._entries: List[List[str]] = []
        if self.path and self.path.exists():
            self._entries = [
                [row.get(column) or "" for column in self.COLUMNS]
                for _, row in TableBatchLoader(self.path, delimiter="\t").iter_rows()
            ]

    def probed(self, task: str, norm_mode: NormMode) -> bool:
        return any(entry[0] == task and entry[1] == NormMode(norm_mode).value for entry in self._entries)

    def record(self, task: str, norm_mode: NormMode, C: float) -> None:
        norm_mode = NormMode(norm_mode)
        if self.probed(task, norm_mode):
            raise ProtocolError(f"The test set was already probed for task '{task}' with {norm_mode.value}.")
        self._entries.append([task, norm_mode.value, repr(float(C)), datetime.now(timezone.utc).isoformat()])
        logger.info("Test probe recorded for task '%s' with %s (C=%g).", task, norm_mode.value, C)
        if self.path:
            with atomic_write(self.path) as handle:
                write_table(handle, self.COLUMNS, self._entries)


def refit_and_test(
    train: Sequence[FeatureVector],
    valid: Sequence[FeatureVector],
    test: Sequence[FeatureVector],
    best_C: float,
    norm_mode: NormMode,
    task: str = "",
    ledger: Optional[TestProbeLedger] = None,
) -> TestReport:
    """Refit normalisation and model on train+valid, then evaluate once on test."""
    norm_mode = NormMode(norm_mode)
    check_disjoint(train=train, valid=valid, test=test)
    ledger = ledger if ledger is not None else TestProbeLedger()
    ledger.record(task, norm_mode, best_C)

    combined = list(train) + list(valid)
    labels = _labels(combined, "training")
    test_labels = _labels(test, "test")
    stats = fit_norm(combined, norm_mode.apply_l2)
    model = train_kelm(apply_norm(as_matrix(combined), stats), labels, best_C, stats)

    _, predicted = predict_batch(model, apply_norm(as_matrix(test), stats))
    label_order = tuple(sorted(set(model.labels) | set(test_labels)))
    cm = confusion(test_labels, predicted, label_order)
    report = TestReport(
        task=task,
        norm_mode=norm_mode,
        C=float(best_C),
        accuracy=accuracy(cm),
        uar=uar(cm, skip_empty=True),
        confusion=cm,
        model=model,
    )
    logger.info(
        "Test %s/%s C=%g: accuracy %.4f, UAR %.4f", task or "-", norm_mode.value, best_C, report.accuracy, report.uar
    )
    return report
