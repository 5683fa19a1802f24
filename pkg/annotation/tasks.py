"""Annotation-side stages: detection, threshold optimisation, condensation and lifting.

Each stage reads its inputs, logs progress per species and writes its
artifacts atomically. Management commands are thin wrappers around these.
"""

import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from annotation.condense import CondensedIndex, condense, lift_annotations, project_annotations
from annotation.detection import (
    DetectorConfig,
    ThresholdReport,
    build_global_profile,
    detect_events,
    optimize_thresholds,
)
from annotation.records import BACKGROUND_LABEL, Annotation, AudioClip, TimeInterval
from annotation.utils.event_tables import read_index, write_events, write_index, write_thresholds
from annotation.utils.manifest import CorpusManifest, Recording
from annotation.utils.selection_table import read_annotations, write_annotations
from annotation.utils.wave_io import read_wave, write_wave
from classifier.features.lld import FrameSpec
from pipeline.exceptions import PreconditionError
from pipeline.utils.parallel import parallel_map
from pipeline.utils.progress import log_progress

logger = logging.getLogger(__name__)


def load_recordings(recordings: Sequence[Recording], jobs: int = 1) -> List[AudioClip]:
    """Decode recordings in manifest order."""
    clips = parallel_map(lambda recording: read_wave(recording.path), recordings, jobs)
    return [
        clip if clip.source_id == recording.source_id else AudioClip(clip.samples, clip.sample_rate, recording.source_id)
        for recording, clip in zip(recordings, clips)
    ]


def _species_list(manifest: CorpusManifest, species: Optional[Sequence[str]]) -> List[str]:
    selected = list(species) if species else manifest.species
    unknown = [name for name in selected if name not in manifest.label_set]
    if unknown:
        raise PreconditionError(f"Species not in the label set: {', '.join(unknown)}")
    return selected


def seed_annotations_for(species: str, recordings: Sequence[Recording], annotations: Sequence[Annotation]) -> List[Annotation]:
    """Vocalisation annotations lying on ``species``' recordings."""
    source_ids = {recording.source_id for recording in recordings}
    return [a for a in annotations if a.source_id in source_ids and a.label != BACKGROUND_LABEL]


def optimize_task(
    manifest: CorpusManifest,
    annotations: Sequence[Annotation],
    detector_for,
    spec: FrameSpec,
    out_path: Path,
    species: Optional[Sequence[str]] = None,
    jobs: int = 1,
) -> Dict[str, Tuple[DetectorConfig, ThresholdReport]]:
    """Optimise detector thresholds per species and write the threshold report.

    ``detector_for(species)`` supplies the template config for each species.
    """
    selected = _species_list(manifest, species)
    results: Dict[str, Tuple[DetectorConfig, ThresholdReport]] = {}
    for position, name in enumerate(selected, start=1):
        recordings = manifest.recordings_for(name)
        seeds = seed_annotations_for(name, recordings, annotations)
        if not recordings or not seeds:
            logger.warning("Skipping %s: %s recording(s), %s seed annotation(s).", name, len(recordings), len(seeds))
            continue
        clips = load_recordings(recordings, jobs)
        results[name] = optimize_thresholds(clips, seeds, detector_for(name), spec=spec, jobs=jobs)
        log_progress(logger, "optimize_thresholds", position, len(selected))
    if not results:
        raise PreconditionError("No species had both recordings and seed annotations.")
    write_thresholds(results, out_path)
    logger.info("Wrote thresholds for %s species to %s", len(results), out_path)
    return results


def detect_task(
    manifest: CorpusManifest,
    detector_for,
    spec: FrameSpec,
    out_path: Path,
    species: Optional[Sequence[str]] = None,
    jobs: int = 1,
) -> Dict[str, List[TimeInterval]]:
    """Detect events on every recording of the selected species; one profile per species."""
    selected = _species_list(manifest, species)
    events: Dict[str, List[TimeInterval]] = {}
    for position, name in enumerate(selected, start=1):
        recordings = manifest.recordings_for(name)
        if not recordings:
            continue
        config = detector_for(name)
        clips = load_recordings(recordings, jobs)
        profile = build_global_profile(clips, config, spec, jobs)
        found = parallel_map(lambda clip: detect_events(clip, profile, config, spec), clips, jobs)
        for clip, intervals in zip(clips, found):
            events[clip.source_id] = intervals
        logger.info(
            "%s: %s event(s) on %s recording(s).", name, sum(len(item) for item in found), len(clips)
        )
        log_progress(logger, "detect", position, len(selected))
    write_events(events, out_path)
    return events


def condense_task(
    manifest: CorpusManifest,
    events: Mapping[str, Sequence[TimeInterval]],
    out_dir: Path,
    annotations: Sequence[Annotation] = (),
    species: Optional[Sequence[str]] = None,
    jobs: int = 1,
) -> Dict[str, CondensedIndex]:
    """One condensed file and index per species.

    When source ``annotations`` are given they are projected onto each
    condensed file as a selection table, ready for review.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    indices: Dict[str, CondensedIndex] = {}
    for name in _species_list(manifest, species):
        recordings = manifest.recordings_for(name)
        if not recordings:
            continue
        clips = load_recordings(recordings, jobs)
        condensed, index = condense(clips, events)
        write_wave(condensed, out_dir / f"{name}.wav")
        write_index(index, out_dir / f"{name}.index.tsv")
        if annotations:
            projected = project_annotations(annotations, index, condensed_id=name)
            write_annotations(projected, out_dir / f"{name}.Table.1.selections.txt")
        indices[name] = index
        logger.info(
            "%s: condensed %.1f s into %.1f s (%.1f%%).",
            name,
            index.total_source_s,
            index.total_condensed_s,
            100.0 * index.total_condensed_s / index.total_source_s if index.total_source_s else 0.0,
        )
    return indices


def lift_task(
    manifest: CorpusManifest,
    condensed_table: Path,
    index_path: Path,
    out_path: Path,
) -> List[Annotation]:
    """Map a selection table made on a condensed file back to source recordings."""
    index = read_index(index_path)
    condensed = read_annotations(condensed_table, manifest, check_sources=False)
    lifted = lift_annotations(condensed, index)
    unknown = sorted({a.source_id for a in lifted if a.source_id not in manifest})
    if unknown:
        raise PreconditionError(f"Index refers to recordings missing from the manifest: {', '.join(unknown)}")
    write_annotations(lifted, out_path)
    logger.info("Lifted %s annotation(s) into %s fragment(s) at %s", len(condensed), len(lifted), out_path)
    return lifted
