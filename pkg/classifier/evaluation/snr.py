"""Per-frequency signal-to-background profile of annotated chunks."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from annotation.detection import detection_spec
from annotation.records import AudioClip
from classifier.features.lld import FrameSpec, frame_signal, power_spectrum
from pipeline.exceptions import PreconditionError, ShapeError
from pipeline.utils.atomic import atomic_write
from pipeline.utils.parallel import parallel_map
from pipeline.utils.table_loader import write_table

logger = logging.getLogger(__name__)

SNR_COLUMNS = ["bin_hz", "signal_db", "background_db", "diff_db"]
DB_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class SnrProfile:
    bin_hz: np.ndarray
    signal_db: np.ndarray
    background_db: np.ndarray

    def __post_init__(self) -> None:
        if not (self.bin_hz.shape == self.signal_db.shape == self.background_db.shape):
            raise ShapeError("SNR profile columns differ in length.")

    @property
    def diff_db(self) -> np.ndarray:
        return self.signal_db - self.background_db

    @property
    def peak_hz(self) -> float:
        return float(self.bin_hz[int(np.argmax(self.diff_db))])


def _pad_to_frame(clip: AudioClip, spec: FrameSpec) -> AudioClip:
    length = spec.frame_length(clip.sample_rate)
    if len(clip) >= length:
        return clip
    return AudioClip(np.pad(clip.samples, (0, length - len(clip))), clip.sample_rate, clip.source_id, clip.source_offset)


def _chunk_power(clip: AudioClip, spec: FrameSpec, n_bins: int, db_of_mean: bool) -> Tuple[np.ndarray, int]:
    """Sum over frames of (dB power or power) for the first ``n_bins`` bins, plus the frame count."""
    power = power_spectrum(frame_signal(_pad_to_frame(clip, spec), spec), spec, clip.sample_rate).values[:, :n_bins]
    values = power if db_of_mean else 10.0 * np.log10(power + DB_FLOOR)
    return values.sum(axis=0), power.shape[0]


def _group_mean_db(
    clips: Sequence[AudioClip], spec: FrameSpec, n_bins: int, db_of_mean: bool, jobs: int
) -> np.ndarray:
    parts = parallel_map(lambda clip: _chunk_power(clip, spec, n_bins, db_of_mean), clips, jobs)
    total = np.zeros(n_bins)
    frames = 0
    for summed, count in parts:
        total += summed
        frames += count
    mean = total / frames
    return 10.0 * np.log10(mean + DB_FLOOR) if db_of_mean else mean


def snr_profile(
    signal_chunks: Sequence[AudioClip],
    background_chunks: Sequence[AudioClip],
    max_hz: float = 2000.0,
    spec: FrameSpec = FrameSpec(),
    db_of_mean: bool = False,
    jobs: int = 1,
) -> SnrProfile:
    """Mean dB power per bin up to ``max_hz`` for each group, averaged over all frames.

    By default frames are averaged in dB; ``db_of_mean`` averages linear power
    first and converts once.
    """
    if not signal_chunks or not background_chunks:
        raise PreconditionError("Both signal and background chunk lists must be non-empty.")
    rates = {clip.sample_rate for clip in list(signal_chunks) + list(background_chunks)}
    if len(rates) != 1:
        raise PreconditionError(f"Chunks mix sample rates {sorted(rates)}.")
    sample_rate = rates.pop()
    if not 0 <= max_hz <= sample_rate / 2:
        raise PreconditionError(f"max_hz {max_hz} must lie in [0, {sample_rate / 2}].")

    spec = detection_spec(spec)
    bin_hz = sample_rate / spec.fft_size
    n_bins = int(np.floor(max_hz / bin_hz)) + 1
    profile = SnrProfile(
        bin_hz=np.arange(n_bins) * bin_hz,
        signal_db=_group_mean_db(signal_chunks, spec, n_bins, db_of_mean, jobs),
        background_db=_group_mean_db(background_chunks, spec, n_bins, db_of_mean, jobs),
    )
    logger.info(
        "SNR profile over %s signal and %s background chunk(s): peak %.1f dB at %.0f Hz.",
        len(signal_chunks), len(background_chunks), float(np.max(profile.diff_db)), profile.peak_hz,
    )
    return profile


def write_snr_csv(profile: SnrProfile, path: Path) -> int:
    rows = (
        [f"{values[0]:.17g}", f"{values[1]:.17g}", f"{values[2]:.17g}", f"{values[3]:.17g}"]
        for values in zip(profile.bin_hz, profile.signal_db, profile.background_db, profile.diff_db)
    )
    with atomic_write(Path(path)) as handle:
        return write_table(handle, SNR_COLUMNS, rows, delimiter=",")


def plot_snr_profile(profile: SnrProfile, path: Path, title: Optional[str] = None) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(profile.bin_hz, profile.diff_db, color="k", linewidth=1)
    ax.axhline(0.0, color="0.6", linewidth=0.5)
    ax.set_xlabel("Frequency (Hz)")
    ax.set_ylabel("Signal - background (dB)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    path = Path(path)
    with atomic_write(path, "wb", encoding=None) as handle:
        fig.savefig(handle, format=path.suffix.lstrip(".") or "png")
    plt.close(fig)
