"""Condensation of detected events into dense review audio, and the way back."""

import bisect
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from annotation.records import Annotation, AudioClip, TimeInterval
from pipeline.exceptions import BoundsError, PreconditionError

logger = logging.getLogger(__name__)

# Half a sample at 48 kHz; absorbs float round-off at fragment edges.
TIME_TOLERANCE_S = 1e-5


@dataclass(frozen=True)
class CondensedEntry:
    condensed: TimeInterval
    source_id: str
    source: TimeInterval


class CondensedIndex:
    """Maps instants of a condensed file to (recording, time) and back.

    Condensed intervals are contiguous from 0 and each spans exactly the
    duration of its source interval.
    """

    def __init__(self, entries: Sequence[CondensedEntry], total_source_s: float) -> None:
        self.entries: List[CondensedEntry] = list(entries)
        self.total_source_s = float(total_source_s)
        self._starts = [entry.condensed.begin_s for entry in self.entries]
        self._by_source: Dict[str, List[CondensedEntry]] = {}
        for entry in self.entries:
            self._by_source.setdefault(entry.source_id, []).append(entry)
        for items in self._by_source.values():
            items.sort(key=lambda entry: entry.source.begin_s)
        self._check_contiguous()

    def _check_contiguous(self) -> None:
        cursor = 0.0
        for entry in self.entries:
            if abs(entry.condensed.begin_s - cursor) > TIME_TOLERANCE_S:
                raise PreconditionError(
                    f"Condensed intervals are not contiguous at {entry.condensed.begin_s} s (expected {cursor} s)."
                )
            cursor = entry.condensed.end_s

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def total_condensed_s(self) -> float:
        return self.entries[-1].condensed.end_s if self.entries else 0.0

    def entries_for(self, source_id: str) -> List[CondensedEntry]:
        return list(self._by_source.get(source_id, []))

    def map_to_source(self, condensed_s: float) -> Tuple[str, float]:
        total = self.total_condensed_s
        if not self.entries or condensed_s < 0 or condensed_s > total:
            raise BoundsError(f"Condensed time {condensed_s} s lies outside [0, {total}] s.")
        position = max(0, bisect.bisect_right(self._starts, condensed_s) - 1)
        entry = self.entries[position]
        return entry.source_id, entry.source.begin_s + (condensed_s - entry.condensed.begin_s)

    def map_to_condensed(self, source_id: str, source_s: float) -> float:
        for entry in self._by_source.get(source_id, []):
            if entry.source.begin_s <= source_s <= entry.source.end_s:
                return entry.condensed.begin_s + (source_s - entry.source.begin_s)
        raise BoundsError(f"{source_id} at {source_s} s is not covered by any condensed fragment.")


def condense(
    recordings: Sequence[AudioClip],
    events: Mapping[str, Sequence[TimeInterval]],
) -> Tuple[AudioClip, CondensedIndex]:
    """Concatenate event fragments of ``recordings`` (in the given order) sample-exactly.

    Fragment bounds are rounded to whole samples; condensed timestamps are
    derived from cumulative sample counts so no drift accumulates.
    """
    if not recordings:
        raise PreconditionError("Nothing to condense: no recordings given.")
    rates = {clip.sample_rate for clip in recordings}
    if len(rates) != 1:
        raise PreconditionError(f"Cannot condense recordings at mixed sample rates {sorted(rates)}.")
    sample_rate = rates.pop()

    pieces: List[np.ndarray] = []
    entries: List[CondensedEntry] = []
    cursor = 0
    for clip in recordings:
        previous_end = -np.inf
        for interval in sorted(events.get(clip.source_id, []), key=lambda item: item.begin_s):
            if interval.end_s > clip.duration + TIME_TOLERANCE_S:
                raise BoundsError(
                    f"Event [{interval.begin_s}, {interval.end_s}) s extends past the end of "
                    f"{clip.source_id} ({clip.duration} s)."
                )
            if interval.begin_s < previous_end:
                raise PreconditionError(f"Events of {clip.source_id} overlap at {interval.begin_s} s.")
            previous_end = interval.end_s

            start = int(round(interval.begin_s * sample_rate))
            stop = min(int(round(interval.end_s * sample_rate)), len(clip))
            if stop <= start:
                continue
            pieces.append(clip.samples[start:stop])
            entries.append(
                CondensedEntry(
                    condensed=TimeInterval(cursor / sample_rate, (cursor + stop - start) / sample_rate),
                    source_id=clip.source_id,
                    source=TimeInterval(start / sample_rate, stop / sample_rate),
                )
            )
            cursor += stop - start

    samples = np.concatenate(pieces) if pieces else np.zeros(0)
    total_source_s = sum(clip.duration for clip in recordings)
    index = CondensedIndex(entries, total_source_s)
    logger.info(
        "Condensed %s fragments: %.2f s kept of %.2f s.",
        len(entries),
        index.total_condensed_s,
        total_source_s,
    )
    return AudioClip(samples, sample_rate, source_id="condensed"), index


def lift_annotations(condensed_annotations: Sequence[Annotation], index: CondensedIndex) -> List[Annotation]:
    """Map condensed-file annotations to source time, splitting at fragment boundaries."""
    total = index.total_condensed_s
    lifted: List[Annotation] = []
    for annotation in condensed_annotations:
        if annotation.begin_s < -TIME_TOLERANCE_S or annotation.end_s > total + TIME_TOLERANCE_S:
            raise BoundsError(
                f"Annotation [{annotation.begin_s}, {annotation.end_s}) s lies outside the "
                f"condensed file of {total} s."
            )
        for entry in index.entries:
            begin = max(annotation.begin_s, entry.condensed.begin_s)
            end = min(annotation.end_s, entry.condensed.end_s)
            if end <= begin:
                continue
            offset = entry.source.begin_s - entry.condensed.begin_s
            lifted.append(
                Annotation(
                    source_id=entry.source_id,
                    interval=TimeInterval(begin + offset, end + offset),
                    label=annotation.label,
                    low_freq_hz=annotation.low_freq_hz,
                    high_freq_hz=annotation.high_freq_hz,
                )
            )
    return lifted


def project_annotations(
    source_annotations: Sequence[Annotation],
    index: CondensedIndex,
    condensed_id: str = "condensed",
) -> List[Annotation]:
    """Map source annotations onto the condensed timeline; uncovered parts are dropped."""
    projected: List[Annotation] = []
    dropped = 0.0
    for annotation in source_annotations:
        covered = 0.0
        for entry in index.entries_for(annotation.source_id):
            begin = max(annotation.begin_s, entry.source.begin_s)
            end = min(annotation.end_s, entry.source.end_s)
            if end <= begin:
                continue
            covered += end - begin
            offset = entry.condensed.begin_s - entry.source.begin_s
            projected.append(
                Annotation(
                    source_id=condensed_id,
                    interval=TimeInterval(begin + offset, end + offset),
                    label=annotation.label,
                    low_freq_hz=annotation.low_freq_hz,
                    high_freq_hz=annotation.high_freq_hz,
                )
            )
        dropped += annotation.duration - covered
    if dropped > TIME_TOLERANCE_S:
        logger.warning("%.3f s of annotated audio falls outside the condensed fragments.", dropped)
    projected.sort(key=lambda item: item.begin_s)
    return projected
