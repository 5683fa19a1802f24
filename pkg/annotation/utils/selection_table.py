"""Raven-style selection tables (tab-separated, UTF-8, header row)."""

import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional

from django.conf import settings

from annotation.records import BACKGROUND_LABEL, Annotation, TimeInterval
from annotation.utils.manifest import CorpusManifest
from pipeline.exceptions import AnnotationReferenceError, AnnotationTableError
from pipeline.utils.atomic import atomic_write
from pipeline.utils.table_loader import TableBatchLoader, parse_float, write_table

logger = logging.getLogger(__name__)

SELECTION = "Selection"
BEGIN_TIME = "Begin Time (s)"
END_TIME = "End Time (s)"
LOW_FREQ = "Low Freq (Hz)"
HIGH_FREQ = "High Freq (Hz)"
SOURCE_COLUMN = "Begin File"
LABEL_COLUMN = "Species"


def source_id_from_table(path: Path) -> str:
    """``rec01.Table.1.selections.txt`` -> ``rec01``."""
    return Path(path).name.split(".")[0]


def _max_error_records() -> int:
    return getattr(settings, "VOCAL_MAX_ERROR_RECORDS", 50)


def _normalize_row(
    row_number: int,
    row: Dict[str, Optional[str]],
    *,
    label_column: str,
    default_source: str,
    allowed_labels: Iterable[str],
) -> "tuple[Optional[Annotation], Optional[Dict[str, object]]]":
    try:
        begin = parse_float(row.get(BEGIN_TIME))
        end = parse_float(row.get(END_TIME))
        low = parse_float(row.get(LOW_FREQ))
        high = parse_float(row.get(HIGH_FREQ))
    except ValueError as exc:
        return None, {"row": row_number, "error": f"Invalid number: {exc}."}

    if begin is None or end is None:
        return None, {"row": row_number, "error": "Begin and end times are required."}
    if not (math.isfinite(begin) and math.isfinite(end)):
        return None, {"row": row_number, "error": "Begin and end times must be finite."}
    if begin < 0:
        return None, {"row": row_number, "error": f"Begin time {begin} is negative."}
    if end <= begin:
        return None, {"row": row_number, "error": f"End time {end} does not exceed begin time {begin}."}

    label = (row.get(label_column) or "").strip()
    if label not in allowed_labels:
        return None, {"row": row_number, "error": f"Label '{label}' is not in the corpus label set."}

    source = (row.get(SOURCE_COLUMN) or "").strip()
    source_id = source_id_from_table(Path(source)) if source else default_source

    return (
        Annotation(
            source_id=source_id,
            interval=TimeInterval(begin, end),
            label=label,
            low_freq_hz=low,
            high_freq_hz=high,
        ),
        None,
    )


def read_annotations(
    path: Path,
    manifest: CorpusManifest,
    label_column: str = LABEL_COLUMN,
    check_sources: bool = True,
) -> List[Annotation]:
    """Parse one selection table into annotations, preserving row order.

    Row-level problems are collected (up to ``VOCAL_MAX_ERROR_RECORDS``) and
    raised together; a missing required column fails before any row is read.
    Tables of a condensed file pass ``check_sources=False`` since their
    source is not a manifest recording.
    """
    path = Path(path)
    loader = TableBatchLoader(
        path,
        batch_size=getattr(settings, "VOCAL_TABLE_BATCH_SIZE", 5000),
        delimiter="\t",
    )
    loader.require_columns([SELECTION, BEGIN_TIME, END_TIME, label_column])

    allowed_labels = set(manifest.label_set) | {BACKGROUND_LABEL}
    default_source = source_id_from_table(path)
    annotations: List[Annotation] = []
    error_details: List[Dict[str, object]] = []
    error_count = 0

    for batch in loader:
        for row_number, row in batch:
            annotation, error = _normalize_row(
                row_number,
                row,
                label_column=label_column,
                default_source=default_source,
                allowed_labels=allowed_labels,
            )
            if error:
                error_count += 1
                if len(error_details) < _max_error_records():
                    error_details.append(error)
                continue
            annotations.append(annotation)

    if error_count:
        logger.warning("Rejected %s row(s) in %s", error_count, path)
        raise AnnotationTableError(str(path), error_details)

    unknown = sorted({a.source_id for a in annotations if a.source_id not in manifest})
    if unknown and check_sources:
        raise AnnotationReferenceError(
            f"{path}: source id(s) not in manifest: {', '.join(unknown)}"
        )

    logger.info("Loaded %s annotations from %s", len(annotations), path)
    return annotations


def read_annotation_dir(path: Path, manifest: CorpusManifest, label_column: str = LABEL_COLUMN) -> List[Annotation]:
    """Read one table, or every ``*.txt`` table of a directory in name order."""
    path = Path(path)
    if path.is_file():
        return read_annotations(path, manifest, label_column)
    annotations: List[Annotation] = []
    for table in sorted(path.glob("*.txt")):
        annotations.extend(read_annotations(table, manifest, label_column))
    return annotations


def write_annotations(annotations: Iterable[Annotation], path: Path, label_column: str = LABEL_COLUMN) -> int:
    """Write a selection table in the same dialect ``read_annotations`` accepts."""
    columns = [
        SELECTION,
        "View",
        "Channel",
        SOURCE_COLUMN,
        BEGIN_TIME,
        END_TIME,
        LOW_FREQ,
        HIGH_FREQ,
        label_column,
    ]
    rows = (
        [
            index,
            "Spectrogram 1",
            1,
            annotation.source_id,
            repr(annotation.begin_s),
            repr(annotation.end_s),
            "" if annotation.low_freq_hz is None else repr(annotation.low_freq_hz),
            "" if annotation.high_freq_hz is None else repr(annotation.high_freq_hz),
            annotation.label,
        ]
        for index, annotation in enumerate(annotations, start=1)
    )
    with atomic_write(Path(path)) as handle:
        count = write_table(handle, columns, rows, delimiter="\t")
    logger.info("Saved %s annotations to %s", count, path)
    return count
