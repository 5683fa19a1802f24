"""Duration-matched background chunks drawn from unannotated audio."""

import logging
from typing import Dict, List, Mapping, Sequence

import numpy as np

from annotation.records import BACKGROUND_LABEL, Annotation, TimeInterval
from annotation.utils.manifest import CorpusManifest
from pipeline.exceptions import AnnotationReferenceError, ExhaustionError

logger = logging.getLogger(__name__)

RETRY_CAP = 10_000


class _Occupancy:
    """Per-recording intervals that a new chunk must not overlap."""

    def __init__(self) -> None:
        self._spans: Dict[str, List[TimeInterval]] = {}

    def add(self, source_id: str, interval: TimeInterval) -> None:
        self._spans.setdefault(source_id, []).append(interval)

    def is_free(self, source_id: str, interval: TimeInterval) -> bool:
        return not any(span.overlaps(interval) for span in self._spans.get(source_id, ()))


def sample_background(
    recording_durations: Mapping[str, float],
    annotations: Sequence[Annotation],
    manifest: CorpusManifest,
    seed: int,
    retry_cap: int = RETRY_CAP,
) -> List[Annotation]:
    """One background chunk per species chunk, same duration, from that species' recordings.

    Chunks are placed uniformly at random on recordings picked with probability
    proportional to their duration, rejecting any overlap with an annotation or
    an earlier pick. Raises ``ExhaustionError`` once every chunk was tried and at
    least one could not be placed.
    """
    rng = np.random.default_rng(seed)
    occupied = _Occupancy()
    for annotation in annotations:
        occupied.add(annotation.source_id, annotation.interval)

    sampled: List[Annotation] = []
    shortfall_chunks, shortfall_s = 0, 0.0
    for species in manifest.label_set:
        chunks = sorted(
            (a for a in annotations if a.label == species),
            key=lambda a: (a.source_id, a.begin_s, a.end_s),
        )
        if not chunks:
            continue
        recordings = [r.source_id for r in manifest.recordings_for(species)]
        missing = [source_id for source_id in recordings if source_id not in recording_durations]
        if missing:
            raise AnnotationReferenceError(f"No duration known for recording(s) {', '.join(missing)}.")
        durations = np.array([recording_durations[source_id] for source_id in recordings], dtype=np.float64)
        if not recordings or durations.sum() <= 0:
            shortfall_chunks += len(chunks)
            shortfall_s += sum(chunk.duration for chunk in chunks)
            continue
        weights = durations / durations.sum()

        placed_count = 0
        for chunk in chunks:
            placed = _place(rng, chunk.duration, recordings, durations, weights, occupied, retry_cap)
            if placed is None:
                shortfall_chunks += 1
                shortfall_s += chunk.duration
                continue
            occupied.add(placed.source_id, placed.interval)
            sampled.append(placed)
            placed_count += 1
        logger.info("Sampled %s of %s background chunk(s) for %s.", placed_count, len(chunks), species)

    if shortfall_chunks:
        raise ExhaustionError(
            "Not enough unannotated audio to match the annotated chunk durations.",
            shortfall_chunks,
            shortfall_s,
        )
    return sampled


def _place(rng, duration, recordings, durations, weights, occupied: _Occupancy, retry_cap: int):
    for _ in range(retry_cap):
        index = int(rng.choice(len(recordings), p=weights))
        room = durations[index] - duration
        if room < 0:
            continue
        begin = float(rng.uniform(0.0, room))
        interval = TimeInterval(begin, begin + duration)
        if occupied.is_free(recordings[index], interval):
            return Annotation(recordings[index], interval, BACKGROUND_LABEL)
    return None
