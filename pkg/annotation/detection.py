"""Energy/change based vocalisation detection and threshold optimisation.

A frame is active when its in-band power (dB) exceeds the loudness threshold
or when the cumulative in-band spectral distribution of the surrounding local
window departs from the corpus-wide one by more than the deviation threshold
(sup-norm). Active frames are padded, merged across short gaps and filtered
by minimum duration.
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from annotation.records import Annotation, AudioClip, TimeInterval
from classifier.features.lld import FrameSpec, PowerSpectrogram, frame_signal, power_spectrum
from pipeline.exceptions import AnnotationReferenceError, DetectorConfigError, PreconditionError
from pipeline.utils.parallel import parallel_map

logger = logging.getLogger(__name__)

ENVELOPE_EPS = 1e-12
RECALL_TARGET = 0.95
RECALL_COVERAGE = 0.5
MIN_SEED_ANNOTATIONS = 20
LOUDNESS_STEP_DB = 2.0
DEVIATION_GRID = np.round(np.arange(0.0, 0.5 + 1e-9, 0.02), 10)


@dataclass(frozen=True)
class DetectorConfig:
    band_low_hz: float = 0.0
    band_high_hz: float = 2000.0
    loudness_db_threshold: float = 0.0
    deviation_threshold: float = 0.2
    local_window_s: float = 1.0
    min_event_s: float = 0.1
    merge_gap_s: float = 0.5
    pad_s: float = 0.2

    def __post_init__(self) -> None:
        if not 0 <= self.band_low_hz < self.band_high_hz:
            raise DetectorConfigError(
                f"Detector band [{self.band_low_hz}, {self.band_high_hz}] Hz must satisfy 0 <= low < high."
            )
        if not (np.isfinite(self.loudness_db_threshold) and np.isfinite(self.deviation_threshold)):
            raise DetectorConfigError("Detector thresholds must be finite.")
        if self.local_window_s <= 0:
            raise DetectorConfigError("local_window_s must be positive.")
        for name in ("min_event_s", "merge_gap_s", "pad_s"):
            if getattr(self, name) < 0:
                raise DetectorConfigError(f"{name} must not be negative.")

    def with_thresholds(self, loudness_db: float, deviation: float) -> "DetectorConfig":
        return replace(self, loudness_db_threshold=float(loudness_db), deviation_threshold=float(deviation))


@dataclass(frozen=True, eq=False)
class GlobalSpectralProfile:
    mean_power: np.ndarray
    cdf: np.ndarray
    band_bins: np.ndarray
    sample_rate: int
    fft_size: int
    n_frames: int

    def check_compatible(self, clip: AudioClip, config: DetectorConfig, spec: FrameSpec) -> None:
        if clip.sample_rate != self.sample_rate or spec.fft_size != self.fft_size:
            raise PreconditionError(
                f"Profile was built at {self.sample_rate} Hz / fft {self.fft_size}; "
                f"clip {clip.source_id} is {clip.sample_rate} Hz / fft {spec.fft_size}."
            )
        expected = band_bins(spec.fft_size, clip.sample_rate, config)
        if not np.array_equal(expected, self.band_bins):
            raise PreconditionError("Profile was built for a different detector band.")


@dataclass(frozen=True)
class ThresholdReport:
    recall: float
    retained_fraction: float
    retained_s: float
    total_s: float
    n_annotations: int
    target_met: bool
    grid_points: int


@dataclass(frozen=True, eq=False)
class FrameFeatures:
    """Per-frame detector inputs for one recording."""

    envelope: np.ndarray
    deviation: np.ndarray
    frame_begin_s: np.ndarray
    frame_len_s: float
    duration_s: float
    source_id: str = ""


def detection_spec(spec: FrameSpec) -> FrameSpec:
    """Detection frames skip pre-emphasis so band power reflects the raw signal."""
    return replace(spec, preemphasis=0.0)


def band_bins(fft_size: int, sample_rate: int, config: DetectorConfig) -> np.ndarray:
    nyquist = sample_rate / 2.0
    if config.band_high_hz > nyquist:
        raise DetectorConfigError(
            f"Detector band upper edge {config.band_high_hz} Hz exceeds Nyquist ({nyquist} Hz)."
        )
    freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    bins = np.flatnonzero((freqs >= config.band_low_hz) & (freqs <= config.band_high_hz))
    if bins.size == 0:
        raise DetectorConfigError(
            f"Band [{config.band_low_hz}, {config.band_high_hz}] Hz contains no spectral bins."
        )
    return bins


def detection_spectrogram(clip: AudioClip, spec: FrameSpec) -> PowerSpectrogram:
    spec = detection_spec(spec)
    spec.check_rate(clip.sample_rate)
    return power_spectrum(frame_signal(clip, spec), spec, clip.sample_rate)


def band_power_envelope(pspec: PowerSpectrogram, config: DetectorConfig) -> np.ndarray:
    """Per-frame ``10 * log10(sum of in-band power + eps)``."""
    bins = band_bins(pspec.fft_size, pspec.sample_rate, config)
    return 10.0 * np.log10(pspec.values[:, bins].sum(axis=1) + ENVELOPE_EPS)


def _cdf(power: np.ndarray) -> np.ndarray:
    """Normalised cumulative distribution along the last axis; all-zero rows give a linear ramp."""
    power = np.maximum(power, 0.0)
    cumulative = np.cumsum(power, axis=-1)
    total = cumulative[..., -1:]
    n_bins = power.shape[-1]
    ramp = np.arange(1, n_bins + 1) / n_bins
    with np.errstate(invalid="ignore", divide="ignore"):
        cdf = np.where(total > 0, cumulative / np.where(total > 0, total, 1.0), ramp)
    return cdf


def _band_power_sum(clip: AudioClip, config: DetectorConfig, spec: FrameSpec) -> Tuple[np.ndarray, int]:
    pspec = detection_spectrogram(clip, spec)
    bins = band_bins(pspec.fft_size, pspec.sample_rate, config)
    return pspec.values[:, bins].sum(axis=0), pspec.n_frames


def build_global_profile(
    recordings: Sequence[AudioClip],
    config: DetectorConfig,
    spec: FrameSpec = FrameSpec(),
    jobs: int = 1,
) -> GlobalSpectralProfile:
    """Per-bin mean in-band power over every frame of ``recordings``.

    Partial sums are reduced in ``source_id`` order so the result does not
    depend on the worker count.
    """
    if not recordings:
        raise PreconditionError("At least one recording is needed to build a spectral profile.")
    rates = {clip.sample_rate for clip in recordings}
    if len(rates) != 1:
        raise PreconditionError(f"Recordings mix sample rates {sorted(rates)}.")
    ordered = sorted(recordings, key=lambda clip: clip.source_id)
    partials = parallel_map(lambda clip: _band_power_sum(clip, config, spec), ordered, jobs)

    total = np.zeros_like(partials[0][0])
    n_frames = 0
    for power_sum, frames in partials:
        total = total + power_sum
        n_frames += frames
    mean_power = total / n_frames
    sample_rate = rates.pop()
    return GlobalSpectralProfile(
        mean_power=mean_power,
        cdf=_cdf(mean_power),
        band_bins=band_bins(spec.fft_size, sample_rate, config),
        sample_rate=sample_rate,
        fft_size=spec.fft_size,
        n_frames=n_frames,
    )


def local_deviation(band_power: np.ndarray, profile_cdf: np.ndarray, window_frames: int) -> np.ndarray:
    """Sup-norm distance between each frame's centred local-window CDF and the global CDF.

    Windows are truncated at the clip edges; windows holding no power score 0.
    """
    n_frames = band_power.shape[0]
    half = max(window_frames, 1) // 2
    running = np.vstack([np.zeros((1, band_power.shape[1])), np.cumsum(band_power, axis=0)])
    index = np.arange(n_frames)
    lo = np.clip(index - half, 0, n_frames)
    hi = np.clip(index + half + 1, 0, n_frames)
    window_power = np.maximum(running[hi] - running[lo], 0.0)
    totals = window_power.sum(axis=1)
    deviation = np.abs(_cdf(window_power) - profile_cdf).max(axis=1)
    return np.where(totals > 0, deviation, 0.0)


def frame_features(
    clip: AudioClip,
    profile: GlobalSpectralProfile,
    config: DetectorConfig,
    spec: FrameSpec = FrameSpec(),
) -> FrameFeatures:
    if clip.duration < config.local_window_s:
        raise PreconditionError(
            f"Clip {clip.source_id} ({clip.duration:.3f} s) is shorter than the "
            f"{config.local_window_s} s local window."
        )
    profile.check_compatible(clip, config, spec)
    pspec = detection_spectrogram(clip, spec)
    band_power = pspec.values[:, profile.band_bins]
    envelope = 10.0 * np.log10(band_power.sum(axis=1) + ENVELOPE_EPS)

    hop_samples = spec.hop_length(clip.sample_rate)
    window_frames = int(round(config.local_window_s * clip.sample_rate / hop_samples))
    deviation = local_deviation(band_power, profile.cdf, window_frames)

    return FrameFeatures(
        envelope=envelope,
        deviation=deviation,
        frame_begin_s=np.arange(pspec.n_frames) * hop_samples / clip.sample_rate,
        frame_len_s=spec.frame_length(clip.sample_rate) / clip.sample_rate,
        duration_s=clip.duration,
        source_id=clip.source_id,
    )


def _frame_activity(features: FrameFeatures, loudness_db: float, deviation: float) -> np.ndarray:
    return (features.envelope > loudness_db) | (features.deviation > deviation)


def _events_from_activity(
    active: np.ndarray, features: FrameFeatures, config: DetectorConfig
) -> Tuple[np.ndarray, np.ndarray]:
    """Turn a frame mask into sorted, disjoint (begins, ends) arrays in seconds."""
    if not active.any():
        return np.zeros(0), np.zeros(0)
    edges = np.diff(np.concatenate([[0], active.astype(np.int8), [0]]))
    first = np.flatnonzero(edges == 1)
    last = np.flatnonzero(edges == -1) - 1

    begins = np.maximum(features.frame_begin_s[first] - config.pad_s, 0.0)
    ends = np.minimum(features.frame_begin_s[last] + features.frame_len_s + config.pad_s, features.duration_s)

    # Merge runs whose gap is shorter than merge_gap_s (padding may already overlap them).
    gaps = begins[1:] - ends[:-1]
    starts_new = np.concatenate([[True], gaps >= config.merge_gap_s])
    merged_begins = begins[starts_new]
    merged_ends = np.maximum.reduceat(ends, np.flatnonzero(starts_new))

    keep = (merged_ends - merged_begins) >= config.min_event_s
    return merged_begins[keep], merged_ends[keep]


def _to_intervals(begins: np.ndarray, ends: np.ndarray) -> List[TimeInterval]:
    return [TimeInterval(float(b), float(e)) for b, e in zip(begins, ends) if e > b]


def detect_events(
    clip: AudioClip,
    profile: GlobalSpectralProfile,
    config: DetectorConfig,
    spec: FrameSpec = FrameSpec(),
) -> List[TimeInterval]:
    features = frame_features(clip, profile, config, spec)
    active = _frame_activity(features, config.loudness_db_threshold, config.deviation_threshold)
    return _to_intervals(*_events_from_activity(active, features, config))


def _annotation_arrays(
    annotations: Sequence[Annotation], source_ids: Sequence[str]
) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    known = set(source_ids)
    grouped: Dict[str, List[Annotation]] = {source_id: [] for source_id in source_ids}
    for annotation in annotations:
        if annotation.source_id not in known:
            raise AnnotationReferenceError(
                f"Seed annotation refers to recording '{annotation.source_id}' outside the optimisation set."
            )
        grouped[annotation.source_id].append(annotation)
    return {
        source_id: (
            np.array([a.begin_s for a in items], dtype=np.float64),
            np.array([a.end_s for a in items], dtype=np.float64),
        )
        for source_id, items in grouped.items()
    }


def _recalled_count(ann_begins: np.ndarray, ann_ends: np.ndarray, begins: np.ndarray, ends: np.ndarray) -> int:
    if ann_begins.size == 0:
        return 0
    if begins.size == 0:
        return 0
    overlap = np.minimum(ann_ends[:, None], ends[None, :]) - np.maximum(ann_begins[:, None], begins[None, :])
    covered = np.clip(overlap, 0.0, None).sum(axis=1)
    return int(np.count_nonzero(covered >= RECALL_COVERAGE * (ann_ends - ann_begins)))


def _score(
    features: Sequence[FrameFeatures],
    annotations: Mapping[str, Tuple[np.ndarray, np.ndarray]],
    config: DetectorConfig,
) -> Tuple[int, float]:
    recalled = 0
    retained = 0.0
    for item in features:
        active = _frame_activity(item, config.loudness_db_threshold, config.deviation_threshold)
        begins, ends = _events_from_activity(active, item, config)
        retained += float(np.sum(ends - begins))
        ann_begins, ann_ends = annotations[item.source_id]
        recalled += _recalled_count(ann_begins, ann_ends, begins, ends)
    return recalled, retained


def score_config(
    recordings: Sequence[AudioClip],
    annotations: Sequence[Annotation],
    config: DetectorConfig,
    profile: GlobalSpectralProfile,
    spec: FrameSpec = FrameSpec(),
) -> Tuple[float, float]:
    """Re-score a detector configuration: (annotation recall, retained fraction)."""
    recalled = 0
    retained = 0.0
    grouped = _annotation_arrays(annotations, [clip.source_id for clip in recordings])
    for clip in recordings:
        events = detect_events(clip, profile, config, spec)
        begins = np.array([e.begin_s for e in events])
        ends = np.array([e.end_s for e in events])
        retained += float(np.sum(ends - begins)) if events else 0.0
        recalled += _recalled_count(*grouped[clip.source_id], begins, ends)
    total = sum(clip.duration for clip in recordings)
    recall = recalled / len(annotations) if annotations else 0.0
    return recall, retained / total


def loudness_grid(envelopes: Sequence[np.ndarray]) -> np.ndarray:
    values = np.concatenate(list(envelopes))
    low, high = np.percentile(values, [10.0, 99.9])
    return low + LOUDNESS_STEP_DB * np.arange(int(np.floor((high - low) / LOUDNESS_STEP_DB)) + 1)


def optimize_thresholds(
    recordings: Sequence[AudioClip],
    seed_annotations: Sequence[Annotation],
    config_template: DetectorConfig,
    profile: Optional[GlobalSpectralProfile] = None,
    spec: FrameSpec = FrameSpec(),
    jobs: int = 1,
) -> Tuple[DetectorConfig, ThresholdReport]:
    """Grid-search both thresholds against seed annotations.

    Among settings recalling more than 95 % of the annotations (an annotation
    counts when half of it is covered) the one keeping the least audio wins;
    ties go to the earlier grid point. Without such a setting the best-recall
    one is returned with ``target_met`` False.
    """
    if not recordings:
        raise PreconditionError("Threshold optimisation needs at least one recording.")
    if not seed_annotations:
        raise PreconditionError("Threshold optimisation needs seed annotations.")
    if len(seed_annotations) < MIN_SEED_ANNOTATIONS:
        logger.warning(
            "Only %s seed annotations (fewer than %s); the optimised thresholds are unreliable.",
            len(seed_annotations),
            MIN_SEED_ANNOTATIONS,
        )

    if profile is None:
        profile = build_global_profile(recordings, config_template, spec, jobs)
    features = parallel_map(lambda clip: frame_features(clip, profile, config_template, spec), recordings, jobs)
    annotations = _annotation_arrays(seed_annotations, [clip.source_id for clip in recordings])
    total_s = sum(item.duration_s for item in features)
    n_annotations = len(seed_annotations)

    loudness_values = loudness_grid([item.envelope for item in features])
    best_key = None
    best = None
    grid_points = 0
    for loudness_db in loudness_values:
        for deviation in DEVIATION_GRID:
            grid_points += 1
            candidate = config_template.with_thresholds(loudness_db, deviation)
            recalled, retained = _score(features, annotations, candidate)
            recall = recalled / n_annotations
            met = recall > RECALL_TARGET
            # Met settings beat unmet ones; then least retained (met) or best recall (unmet).
            key = (1, -retained) if met else (0, recall, -retained)
            if best_key is None or key > best_key:
                best_key = key
                best = (candidate, recall, retained, met)

    config, recall, retained, met = best
    report = ThresholdReport(
        recall=recall,
        retained_fraction=retained / total_s,
        retained_s=retained,
        total_s=total_s,
        n_annotations=n_annotations,
        target_met=met,
        grid_points=grid_points,
    )
    if not met:
        logger.warning(
            "No threshold setting reached recall > %.2f; best recall %.3f at loudness %.2f dB, deviation %.2f.",
            RECALL_TARGET,
            recall,
            config.loudness_db_threshold,
            config.deviation_threshold,
        )
    logger.info(
        "Chosen thresholds loudness=%.2f dB deviation=%.2f: recall %.3f, retained %.3f of %.1f s.",
        config.loudness_db_threshold,
        config.deviation_threshold,
        recall,
        report.retained_fraction,
        total_s,
    )
    return config, report
