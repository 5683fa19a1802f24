"""Corpus manifest: the recordings of a corpus, its label set and recorder pairings.

File grammar (UTF-8)::

    # comment
    label_set = tone, chirp, burst, harmonic
    pair = burst_a_s1 burst_b_s1
    source_id<TAB>path<TAB>start<TAB>recorder<TAB>enclosure
    burst_a_s1<TAB>audio/burst_a_s1.wav<TAB>2021-03-01T06:00:00<TAB>A<TAB>burst

Key-value lines come first; the line starting with ``source_id`` opens the
recording table. ``start`` is an ISO-8601 timestamp or ``-`` when unknown.
Paths are relative to the manifest file.
"""

import csv
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

from pipeline.exceptions import AnnotationReferenceError, ConfigError
from pipeline.utils.atomic import atomic_write
from pipeline.utils.table_loader import write_table

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ["source_id", "path", "start", "recorder", "enclosure"]
MISSING = "-"


@dataclass(frozen=True)
class Recording:
    source_id: str
    path: Path
    start: Optional[datetime]
    recorder: str
    enclosure: str


@dataclass
class CorpusManifest:
    recordings: List[Recording]
    label_set: List[str]
    pairing: List[Tuple[str, ...]] = field(default_factory=list)
    path: Optional[Path] = None

    def __post_init__(self) -> None:
        self._by_id: Dict[str, Recording] = {}
        for recording in self.recordings:
            if recording.source_id in self._by_id:
                raise ConfigError(f"Duplicate source_id '{recording.source_id}' in manifest.")
            self._by_id[recording.source_id] = recording

        self._group_of: Dict[str, Tuple[str, ...]] = {}
        for group in self.pairing:
            members = tuple(sorted(group))
            for source_id in members:
                if source_id not in self._by_id:
                    raise ConfigError(f"Pairing refers to unknown source_id '{source_id}'.")
                if source_id in self._group_of:
                    raise ConfigError(f"Recording '{source_id}' appears in more than one pairing group.")
                self._group_of[source_id] = members

    def __contains__(self, source_id: object) -> bool:
        return source_id in self._by_id

    def __iter__(self) -> Iterator[Recording]:
        return iter(self.recordings)

    def __len__(self) -> int:
        return len(self.recordings)

    def get(self, source_id: str) -> Recording:
        try:
            return self._by_id[source_id]
        except KeyError:
            raise AnnotationReferenceError(f"Unknown source_id '{source_id}'.") from None

    def session_group(self, source_id: str) -> Tuple[str, ...]:
        """The pairing group holding ``source_id``, or the recording on its own."""
        self.get(source_id)
        return self._group_of.get(source_id, (source_id,))

    def recordings_for(self, species: str) -> List[Recording]:
        """Recordings made in ``species``' enclosure, oldest first."""
        selected = [r for r in self.recordings if r.enclosure == species]
        return sorted(selected, key=_chronological_key)

    @property
    def species(self) -> List[str]:
        return [label for label in self.label_set if any(r.enclosure == label for r in self.recordings)]


def _chronological_key(recording: Recording) -> Tuple[bool, datetime, str]:
    start = recording.start or datetime.min.replace(tzinfo=timezone.utc)
    return (recording.start is None, start, recording.source_id)


def parse_timestamp(text: str) -> Optional[datetime]:
    text = text.strip()
    if not text or text == MISSING:
        return None
    value = datetime.fromisoformat(text)
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    return value


def format_timestamp(value: Optional[datetime]) -> str:
    return MISSING if value is None else value.isoformat()


def load_manifest(path: Path) -> CorpusManifest:
    path = Path(path)
    base_dir = path.resolve().parent
    label_set: List[str] = []
    pairing: List[Tuple[str, ...]] = []
    recordings: List[Recording] = []

    with path.open(encoding="utf-8", newline="") as handle:
        lines = handle.read().splitlines()

    header_index = None
    for number, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.split("\t")[0] == "source_id":
            header_index = number
            break
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ConfigError(f"Expected 'key = value', got '{stripped}'.", number, str(path))
        key = key.strip()
        if key == "label_set":
            label_set = [label.strip() for label in value.split(",") if label.strip()]
        elif key == "pair":
            members = tuple(value.split())
            if len(members) < 2:
                raise ConfigError("A pairing group needs at least two source ids.", number, str(path))
            pairing.append(members)
        else:
            raise ConfigError(f"Unknown manifest key '{key}'.", number, str(path))

    if header_index is None:
        raise ConfigError("Manifest has no recording table header.", None, str(path))
    if not label_set:
        raise ConfigError("Manifest must declare a non-empty label_set.", None, str(path))

    header = [name.strip() for name in lines[header_index - 1].split("\t")]
    missing = [name for name in TABLE_COLUMNS if name not in header]
    if missing:
        raise ConfigError(f"Recording table lacks column(s): {', '.join(missing)}", header_index, str(path))

    reader = csv.reader(lines[header_index:], delimiter="\t")
    for offset, row in enumerate(reader, start=header_index + 1):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            raise ConfigError(f"Expected {len(header)} fields, got {len(row)}.", offset, str(path))
        values = {name: row[i].strip() for i, name in enumerate(header)}
        try:
            start = parse_timestamp(values["start"])
        except ValueError:
            raise ConfigError(f"Invalid start timestamp '{values['start']}'.", offset, str(path)) from None
        recordings.append(
            Recording(
                source_id=values["source_id"],
                path=(base_dir / values["path"]).resolve(),
                start=start,
                recorder=values["recorder"],
                enclosure=values["enclosure"],
            )
        )

    try:
        manifest = CorpusManifest(recordings, label_set, pairing, path=path)
    except ConfigError as exc:
        raise ConfigError(str(exc), None, str(path)) from None
    logger.info("Loaded manifest %s with %s recordings", path, len(recordings))
    return manifest


def write_manifest(manifest: CorpusManifest, path: Path) -> None:
    path = Path(path)
    base_dir = path.resolve().parent
    with atomic_write(path) as handle:
        handle.write(f"label_set = {', '.join(manifest.label_set)}\n")
        for group in manifest.pairing:
            handle.write(f"pair = {' '.join(group)}\n")
        write_table(
            handle,
            TABLE_COLUMNS,
            (
                [
                    r.source_id,
                    Path(os.path.relpath(r.path, base_dir)).as_posix(),
                    format_timestamp(r.start),
                    r.recorder,
                    r.enclosure,
                ]
                for r in manifest.recordings
            ),
        )
