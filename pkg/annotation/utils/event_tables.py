"""TSV persistence for detected events, condensed indices and threshold reports."""

from dataclasses import asdict, fields
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple

from annotation.condense import CondensedEntry, CondensedIndex
from annotation.detection import DetectorConfig, ThresholdReport
from annotation.records import TimeInterval
from pipeline.exceptions import SchemaError
from pipeline.utils.atomic import atomic_write
from pipeline.utils.table_loader import TableBatchLoader, write_table

EVENT_COLUMNS = ["source_id", "begin_s", "end_s"]
INDEX_COLUMNS = ["condensed_begin_s", "condensed_end_s", "source_id", "source_begin_s", "source_end_s"]
INDEX_TOTAL_KEY = "#total_source_s"
DETECTOR_COLUMNS = [f.name for f in fields(DetectorConfig)]
REPORT_COLUMNS = [f.name for f in fields(ThresholdReport)]
THRESHOLD_COLUMNS = ["species"] + DETECTOR_COLUMNS + REPORT_COLUMNS


def _float(row: Dict[str, str], column: str, path: Path, line: int) -> float:
    try:
        return float(row[column])
    except (KeyError, TypeError, ValueError):
        raise SchemaError(f"{path}: row {line}: invalid value for '{column}'.") from None


def _cell(value: object) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def write_events(events: Mapping[str, Sequence[TimeInterval]], path: Path) -> int:
    rows = (
        [source_id, repr(interval.begin_s), repr(interval.end_s)]
        for source_id in events
        for interval in events[source_id]
    )
    with atomic_write(Path(path)) as handle:
        return write_table(handle, EVENT_COLUMNS, rows)


def read_events(path: Path) -> Dict[str, List[TimeInterval]]:
    path = Path(path)
    loader = TableBatchLoader(path, delimiter="\t")
    loader.require_columns(EVENT_COLUMNS)
    events: Dict[str, List[TimeInterval]] = {}
    for line, row in loader.iter_rows():
        interval = TimeInterval(_float(row, "begin_s", path, line), _float(row, "end_s", path, line))
        events.setdefault(row["source_id"], []).append(interval)
    return events


def write_index(index: CondensedIndex, path: Path) -> int:
    rows = [
        [
            repr(entry.condensed.begin_s),
            repr(entry.condensed.end_s),
            entry.source_id,
            repr(entry.source.begin_s),
            repr(entry.source.end_s),
        ]
        for entry in index.entries
    ]
    with atomic_write(Path(path)) as handle:
        count = write_table(handle, INDEX_COLUMNS, rows)
        handle.write(f"{INDEX_TOTAL_KEY}\t{index.total_source_s!r}\n")
    return count


def read_index(path: Path) -> CondensedIndex:
    path = Path(path)
    loader = TableBatchLoader(path, delimiter="\t")
    loader.require_columns(INDEX_COLUMNS)
    entries: List[CondensedEntry] = []
    total_source_s = 0.0
    for line, row in loader.iter_rows():
        if row["condensed_begin_s"] == INDEX_TOTAL_KEY:
            total_source_s = _float(row, "condensed_end_s", path, line)
            continue
        entries.append(
            CondensedEntry(
                condensed=TimeInterval(
                    _float(row, "condensed_begin_s", path, line), _float(row, "condensed_end_s", path, line)
                ),
                source_id=row["source_id"],
                source=TimeInterval(_float(row, "source_begin_s", path, line), _float(row, "source_end_s", path, line)),
            )
        )
    return CondensedIndex(entries, total_source_s)


def write_thresholds(results: Mapping[str, Tuple[DetectorConfig, ThresholdReport]], path: Path) -> int:
    rows = []
    for species, (config, report) in results.items():
        values = {**asdict(config), **asdict(report)}
        rows.append([species] + [_cell(values[name]) for name in DETECTOR_COLUMNS + REPORT_COLUMNS])
    with atomic_write(Path(path)) as handle:
        return write_table(handle, THRESHOLD_COLUMNS, rows)


def read_thresholds(path: Path) -> Dict[str, DetectorConfig]:
    """Per-species detector configs from a threshold report (report columns are ignored)."""
    path = Path(path)
    loader = TableBatchLoader(path, delimiter="\t")
    loader.require_columns(["species"] + DETECTOR_COLUMNS)
    configs: Dict[str, DetectorConfig] = {}
    for line, row in loader.iter_rows():
        configs[row["species"]] = DetectorConfig(**{name: _float(row, name, path, line) for name in DETECTOR_COLUMNS})
    return configs
