"""Chronological train/valid/test splits that never separate a recording session."""

import logging
from dataclasses import dataclass
from datetime import timedelta
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from annotation.records import Annotation, ChunkRef, TimeInterval
from annotation.utils.manifest import CorpusManifest
from pipeline.exceptions import PreconditionError, ProtocolError, SchemaError
from pipeline.utils.atomic import atomic_write
from pipeline.utils.table_loader import TableBatchLoader, write_table

logger = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")
SPLIT_COLUMNS = ["source_id", "begin_s", "end_s", "label", "split"]


@dataclass
class SplitSpec:
    entries: List[Tuple[Annotation, str]]
    ratios: Tuple[float, float, float] = (3, 1, 1)

    def __post_init__(self) -> None:
        self.assignment: Dict[ChunkRef, str] = {}
        for annotation, split in self.entries:
            if split not in SPLITS:
                raise SchemaError(f"Unknown split '{split}'.")
            if annotation.chunk_ref in self.assignment:
                raise ProtocolError(f"Chunk {annotation.chunk_ref} is assigned twice.")
            self.assignment[annotation.chunk_ref] = split

    def split_of(self, ref: ChunkRef) -> str:
        return self.assignment[ref]

    def members(self, split: str) -> List[Annotation]:
        return [annotation for annotation, name in self.entries if name == split]

    def durations(self) -> Tuple[float, float, float]:
        totals = {name: 0.0 for name in SPLITS}
        for annotation, split in self.entries:
            totals[split] += annotation.duration
        return tuple(totals[name] for name in SPLITS)

    def achieved_ratio(self) -> Tuple[float, float, float]:
        """Duration shares of train, valid and test."""
        totals = self.durations()
        overall = sum(totals)
        return tuple(t / overall for t in totals) if overall else (0.0, 0.0, 0.0)


def _absolute_begins(annotations: Sequence[Annotation], manifest: CorpusManifest) -> List:
    begins = []
    for annotation in annotations:
        start = manifest.get(annotation.source_id).start
        if start is None:
            raise ProtocolError(
                f"Recording '{annotation.source_id}' has no start timestamp; a chronological split needs one."
            )
        begins.append(start + timedelta(seconds=annotation.begin_s))
    return begins


def _valid_cuts(order: Sequence[int], groups: Sequence[Tuple[str, ...]], begins: Sequence) -> np.ndarray:
    """Mask over cut positions 0..n: True where no session group spans the cut and times strictly increase."""
    n = len(order)
    valid = np.ones(n + 1, dtype=bool)
    first: Dict[Tuple[str, ...], int] = {}
    last: Dict[Tuple[str, ...], int] = {}
    for position, i in enumerate(order):
        first.setdefault(groups[i], position)
        last[groups[i]] = position
    blocked = np.zeros(n + 2, dtype=np.int64)
    for group, start in first.items():
        # A group covering positions start..last blocks cuts start+1..last.
        blocked[start + 1] += 1
        blocked[last[group] + 1] -= 1
    valid &= np.cumsum(blocked)[: n + 1] == 0
    for k in range(1, n):
        if not begins[order[k - 1]] < begins[order[k]]:
            valid[k] = False
    return valid


def _nearest_cut(candidates: np.ndarray, cumulative: np.ndarray, target: float) -> int:
    distances = np.abs(cumulative[candidates] - target)
    return int(candidates[np.argmin(distances)])


def chronological_split(
    annotations: Sequence[Annotation],
    manifest: CorpusManifest,
    ratios: Sequence[float] = (3, 1, 1),
) -> SplitSpec:
    """Oldest chunks train, newest test; cuts sit at session-group boundaries nearest the ratio quantiles."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise PreconditionError(f"Split ratios must be three positive numbers, got {ratios}.")
    if len(annotations) < 3:
        raise ProtocolError(f"At least 3 chunks are needed for a three-way split, got {len(annotations)}.")

    begins = _absolute_begins(annotations, manifest)
    groups = [manifest.session_group(annotation.source_id) for annotation in annotations]
    order = sorted(range(len(annotations)), key=lambda i: (begins[i], annotations[i].source_id))
    durations = np.array([annotations[i].duration for i in order])
    cumulative = np.concatenate([[0.0], np.cumsum(durations)]) / durations.sum()

    valid = _valid_cuts(order, groups, begins)
    valid[0] = valid[-1] = False
    candidates = np.flatnonzero(valid)
    if len(candidates) < 2:
        raise ProtocolError("The corpus has fewer than two session boundaries; it cannot be split three ways.")

    total = sum(ratios)
    first_target, second_target = ratios[0] / total, (ratios[0] + ratios[1]) / total
    first = _nearest_cut(candidates[:-1], cumulative, first_target)
    second = _nearest_cut(candidates[candidates > first], cumulative, second_target)

    names = ["train"] * first + ["valid"] * (second - first) + ["test"] * (len(order) - second)
    spec = SplitSpec([(annotations[i], name) for i, name in zip(order, names)], ratios)
    achieved = spec.achieved_ratio()
    logger.info(
        "Split %s chunks chronologically: train %.3f, valid %.3f, test %.3f of the duration (requested %s).",
        len(order), *achieved, ":".join(f"{r:g}" for r in ratios),
    )
    return spec


def write_split(spec: SplitSpec, path: Path) -> int:
    rows = [
        [annotation.source_id, repr(annotation.begin_s), repr(annotation.end_s), annotation.label, split]
        for annotation, split in spec.entries
    ]
    with atomic_write(Path(path)) as handle:
        return write_table(handle, SPLIT_COLUMNS, rows)


def read_split(path: Path) -> SplitSpec:
    path = Path(path)
    loader = TableBatchLoader(path, delimiter="\t")
    loader.require_columns(SPLIT_COLUMNS)
    entries = []
    for line, row in loader.iter_rows():
        try:
            interval = TimeInterval(float(row["begin_s"]), float(row["end_s"]))
        except (TypeError, ValueError, PreconditionError):
            raise SchemaError(f"{path}: row {line}: invalid chunk times.") from None
        entries.append((Annotation(row["source_id"], interval, row["label"]), row["split"]))
    return SplitSpec(entries)
