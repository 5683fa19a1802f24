"""Classifier-side stages: features, splits, background, learning and evaluation."""

import logging
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from annotation.records import BACKGROUND_LABEL, Annotation, AudioClip
from annotation.utils.manifest import CorpusManifest
from annotation.utils.selection_table import write_annotations
from annotation.utils.wave_io import read_wave, wave_duration
from classifier.evaluation.background import sample_background
from classifier.evaluation.snr import SnrProfile, plot_snr_profile, snr_profile, write_snr_csv
from classifier.evaluation.splits import SPLITS, SplitSpec, chronological_split, write_split
from classifier.features.functionals import FeatureVector, summarize, write_feature_csv
from classifier.features.lld import RASTA_MIN_FRAMES, FrameSpec, extract_lld, write_lld_csv
from classifier.kelm import load_model, predict_batch, save_model, train_kelm
from classifier.normalization import NormMode, apply_norm, as_matrix, fit_norm
from classifier.protocol import GridReport, TestProbeLedger, TestReport, grid_search, refit_and_test
from pipeline.exceptions import PreconditionError, ProtocolError
from pipeline.utils.atomic import atomic_write
from pipeline.utils.parallel import parallel_map
from pipeline.utils.progress import calculate_percent
from pipeline.utils.table_loader import write_table

logger = logging.getLogger(__name__)

FOUR_CLASS = "4class"
FIVE_CLASS = "5class"
TASKS = (FOUR_CLASS, FIVE_CLASS)
GRID_COLUMNS = ["task", "norm", "C", "valid_accuracy", "valid_uar"]
REPORT_COLUMNS = ["task", "norm", "C", "valid_accuracy", "valid_uar", "test_accuracy", "test_uar"]


def iter_chunks(
    manifest: CorpusManifest, annotations: Sequence[Annotation]
) -> Iterator[Tuple[List[int], List[AudioClip]]]:
    """Per recording: positions into ``annotations`` and the matching sub-clips.

    Each recording is decoded once; chunk ends past the recording end are clamped.
    """
    by_source: "OrderedDict[str, List[int]]" = OrderedDict()
    for position, annotation in enumerate(annotations):
        by_source.setdefault(annotation.source_id, []).append(position)
    for source_id, positions in by_source.items():
        recording = read_wave(manifest.get(source_id).path)
        clips = []
        for position in positions:
            annotation = annotations[position]
            end_s = min(annotation.end_s, recording.duration)
            if end_s < annotation.end_s:
                logger.warning("Chunk %s ends past %s; clamped to %.3f s.", annotation.chunk_ref, source_id, end_s)
            clip = recording.slice(annotation.begin_s, end_s)
            clips.append(AudioClip(clip.samples, clip.sample_rate, source_id, clip.source_offset))
        yield positions, clips


def pad_to_min_frames(clip: AudioClip, spec: FrameSpec, min_frames: int = RASTA_MIN_FRAMES) -> AudioClip:
    """Zero-pad symmetrically so the clip spans at least ``min_frames`` frames."""
    needed = spec.frame_length(clip.sample_rate) + (min_frames - 1) * spec.hop_length(clip.sample_rate)
    if len(clip) >= needed:
        return clip
    missing = needed - len(clip)
    samples = np.pad(clip.samples, (missing // 2, missing - missing // 2))
    return AudioClip(samples, clip.sample_rate, clip.source_id, clip.source_offset - (missing // 2) / clip.sample_rate)


def extract_features_task(
    manifest: CorpusManifest,
    annotations: Sequence[Annotation],
    spec: FrameSpec,
    out_path: Path,
    lld_dir: Optional[Path] = None,
    jobs: int = 1,
) -> List[FeatureVector]:
    """LLDs and functionals for every annotated chunk, written in annotation order."""
    if not annotations:
        raise PreconditionError("No annotations to extract features for.")
    if lld_dir is not None:
        Path(lld_dir).mkdir(parents=True, exist_ok=True)

    vectors: List[Optional[FeatureVector]] = [None] * len(annotations)
    processed = 0
    padded = 0
    for positions, clips in iter_chunks(manifest, annotations):
        ready = [pad_to_min_frames(clip, spec) for clip in clips]
        padded += sum(1 for before, after in zip(clips, ready) if after is not before)
        llds = parallel_map(lambda clip: extract_lld(clip, spec), ready, jobs)
        for position, lld in zip(positions, llds):
            annotation = annotations[position]
            vectors[position] = summarize(lld, annotation.chunk_ref, annotation.label)
            if lld_dir is not None:
                write_lld_csv(lld, Path(lld_dir) / f"{position:06d}.csv")
        processed += len(positions)
        logger.info(
            "extract_features: %s/%s chunks (%s%%)",
            processed,
            len(annotations),
            calculate_percent(processed, len(annotations)),
        )
    if padded:
        logger.warning("%s chunk(s) were shorter than %s frames and were zero-padded.", padded, RASTA_MIN_FRAMES)
    write_feature_csv(vectors, out_path)
    return vectors


def background_task(
    manifest: CorpusManifest,
    annotations: Sequence[Annotation],
    seed: int,
    out_path: Path,
    retry_cap: int = 10_000,
) -> List[Annotation]:
    durations = {recording.source_id: wave_duration(recording.path) for recording in manifest}
    species_chunks = [a for a in annotations if a.label != BACKGROUND_LABEL]
    sampled = sample_background(durations, species_chunks, manifest, seed, retry_cap)
    write_annotations(sampled, out_path)
    logger.info("Wrote %s background chunk(s) to %s", len(sampled), out_path)
    return sampled


def split_task(
    manifest: CorpusManifest, annotations: Sequence[Annotation], ratios: Sequence[float], out_path: Path
) -> SplitSpec:
    spec = chronological_split(annotations, manifest, ratios)
    write_split(spec, out_path)
    return spec


def select_task(vectors: Sequence[FeatureVector], task: str) -> List[FeatureVector]:
    """Four-class drops background chunks; five-class keeps them."""
    if task not in TASKS:
        raise PreconditionError(f"Unknown task '{task}'; expected one of {', '.join(TASKS)}.")
    if task == FIVE_CLASS:
        return list(vectors)
    return [v for v in vectors if v.label != BACKGROUND_LABEL]


def partition(vectors: Sequence[FeatureVector], split: SplitSpec) -> Dict[str, List[FeatureVector]]:
    sets: Dict[str, List[FeatureVector]] = {name: [] for name in SPLITS}
    unassigned = 0
    for vector in vectors:
        name = split.assignment.get(vector.chunk_ref) if vector.chunk_ref is not None else None
        if name is None:
            unassigned += 1
            continue
        sets[name].append(vector)
    if unassigned:
        raise ProtocolError(f"{unassigned} feature vector(s) have no split assignment.")
    return sets


def grid_search_task(
    vectors: Sequence[FeatureVector],
    split: SplitSpec,
    task: str,
    norm_mode: NormMode,
    grid: Optional[Sequence[float]],
    out_path: Optional[Path] = None,
) -> Tuple[float, GridReport]:
    sets = partition(select_task(vectors, task), split)
    best_C, report = grid_search(sets["train"], sets["valid"], grid, norm_mode)
    if out_path is not None:
        rows = [[task, report.norm_mode.value, repr(p.C), repr(p.accuracy), repr(p.uar)] for p in report.points]
        rows += [[task, report.norm_mode.value, repr(C), "", ""] for C in report.skipped]
        with atomic_write(Path(out_path)) as handle:
            write_table(handle, GRID_COLUMNS, rows)
    logger.info("%s/%s: best C=%g (valid UAR %.4f)", task, report.norm_mode.value, best_C, report.best.uar)
    return best_C, report


def train_task(
    vectors: Sequence[FeatureVector],
    C: float,
    norm_mode: NormMode,
    out_path: Path,
    split: Optional[SplitSpec] = None,
    task: str = FIVE_CLASS,
):
    """Fit normalisation and model on train+valid (or everything without a split) and save it."""
    selected = select_task(vectors, task)
    if split is not None:
        sets = partition(selected, split)
        selected = sets["train"] + sets["valid"]
    norm_mode = NormMode(norm_mode)
    stats = fit_norm(selected, norm_mode.apply_l2)
    model = train_kelm(apply_norm(as_matrix(selected), stats), [v.label for v in selected], C, stats)
    save_model(model, out_path)
    return model


def predict_task(model_path: Path, vectors: Sequence[FeatureVector], out_path: Path) -> List[str]:
    model = load_model(model_path)
    if not vectors:
        predicted: List[str] = []
        scores = np.zeros((0, len(model.labels)))
    else:
        scores, predicted = predict_batch(model, apply_norm(as_matrix(vectors), model.norm))
    rows = [
        ["" if v.chunk_ref is None else str(v.chunk_ref), v.label or "", label] + [repr(float(s)) for s in row]
        for v, label, row in zip(vectors, predicted, scores)
    ]
    with atomic_write(Path(out_path)) as handle:
        write_table(handle, ["chunk_ref", "truth", "predicted"] + [f"score_{name}" for name in model.labels], rows)
    logger.info("Predicted %s chunk(s) with %s", len(predicted), model_path)
    return predicted


def _write_confusion(report: TestReport, path: Path) -> None:
    with atomic_write(Path(path)) as handle:
        write_table(handle, ["truth\\predicted"] + list(report.confusion.labels), report.confusion.as_rows())


def evaluate_task(
    vectors: Sequence[FeatureVector],
    split: SplitSpec,
    out_dir: Path,
    tasks: Sequence[str] = TASKS,
    norm_modes: Sequence[NormMode] = (NormMode.ZN, NormMode.ZN_L2),
    grid: Optional[Sequence[float]] = None,
    ledger_path: Optional[Path] = None,
) -> List[Tuple[GridReport, TestReport]]:
    """Grid search on validation UAR, then a single test probe per (task, norm)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ledger = TestProbeLedger(ledger_path or out_dir / "test_probes.tsv")
    results = []
    rows = []
    for task in tasks:
        sets = partition(select_task(vectors, task), split)
        for norm_mode in norm_modes:
            norm_mode = NormMode(norm_mode)
            best_C, grid_report = grid_search(sets["train"], sets["valid"], grid, norm_mode)
            test_report = refit_and_test(
                sets["train"], sets["valid"], sets["test"], best_C, norm_mode, task=task, ledger=ledger
            )
            _write_confusion(test_report, out_dir / f"confusion_{task}_{norm_mode.name.lower()}.tsv")
            save_model(test_report.model, out_dir / f"model_{task}_{norm_mode.name.lower()}.kelm")
            best = grid_report.best
            rows.append(
                [task, norm_mode.value, repr(best_C), repr(best.accuracy), repr(best.uar),
                 repr(test_report.accuracy), repr(test_report.uar)]
            )
            results.append((grid_report, test_report))
    with atomic_write(out_dir / "report.tsv") as handle:
        write_table(handle, REPORT_COLUMNS, rows)
    logger.info("Wrote evaluation report for %s run(s) to %s", len(rows), out_dir / "report.tsv")
    return results


def snr_task(
    manifest: CorpusManifest,
    annotations: Sequence[Annotation],
    background: Sequence[Annotation],
    species: str,
    spec: FrameSpec,
    out_path: Path,
    max_hz: float = 2000.0,
    db_of_mean: bool = False,
    plot_path: Optional[Path] = None,
    jobs: int = 1,
) -> SnrProfile:
    """Signal chunks of ``species`` against background chunks from its recordings."""
    source_ids = {recording.source_id for recording in manifest.recordings_for(species)}
    signal_ann = [a for a in annotations if a.label == species]
    background_ann = [a for a in background if a.label == BACKGROUND_LABEL and a.source_id in source_ids]
    if not signal_ann or not background_ann:
        raise PreconditionError(
            f"{species}: {len(signal_ann)} signal and {len(background_ann)} background chunk(s); both must be non-empty."
        )
    signal_clips = [clip for _, clips in iter_chunks(manifest, signal_ann) for clip in clips]
    background_clips = [clip for _, clips in iter_chunks(manifest, background_ann) for clip in clips]
    profile = snr_profile(signal_clips, background_clips, max_hz, spec, db_of_mean=db_of_mean, jobs=jobs)
    write_snr_csv(profile, out_path)
    if plot_path is not None:
        plot_snr_profile(profile, plot_path, title=species)
    return profile
