"""Synthetic corpus: four call archetypes planted over noise beds, with ground truth.

Every species is recorded in its own enclosure over ``sessions`` one-minute
sessions that start 62 s apart. The ``burst`` species is captured by two
paired recorders per session; the second hears the same calls 6 dB quieter
and 10 ms later.
"""

import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import signal

from annotation.records import Annotation, AudioClip, TimeInterval
from annotation.utils.manifest import CorpusManifest, Recording, write_manifest
from annotation.utils.selection_table import write_annotations
from annotation.utils.wave_io import write_wave
from pipeline.exceptions import PreconditionError
from pipeline.utils.atomic import atomic_write

logger = logging.getLogger(__name__)

SAMPLE_RATE = 16_000
SESSION_S = 60.0
SESSION_STRIDE_S = 62.0
CALLS_PER_RECORDING = 12
NOISE_RMS = 0.02
PAIRED_GAIN_DB = -6.0
PAIRED_DELAY_S = 0.01
FIRST_SESSION = datetime(2021, 3, 1, 6, 0, tzinfo=timezone.utc)


def _envelope(n: int) -> np.ndarray:
    return signal.windows.tukey(n, alpha=0.3)


def _tone(rng: np.random.Generator, duration: float, sr: int) -> np.ndarray:
    t = np.arange(int(duration * sr)) / sr
    f0 = rng.uniform(550.0, 650.0)
    return (np.sin(2 * np.pi * f0 * t) + 0.4 * np.sin(2 * np.pi * 2 * f0 * t)) * _envelope(len(t))


def _chirp(rng: np.random.Generator, duration: float, sr: int) -> np.ndarray:
    t = np.arange(int(duration * sr)) / sr
    return signal.chirp(t, f0=rng.uniform(350.0, 450.0), t1=duration, f1=rng.uniform(1500.0, 1700.0)) * _envelope(len(t))


def _burst(rng: np.random.Generator, duration: float, sr: int) -> np.ndarray:
    n = int(duration * sr)
    sos = signal.butter(4, [200.0, 1000.0], btype="bandpass", fs=sr, output="sos")
    noise = signal.sosfilt(sos, rng.standard_normal(n))
    gate = np.zeros(n)
    pulse = int(0.08 * sr)
    for start in np.linspace(0, n - pulse, int(rng.integers(3, 6))).astype(int):
        gate[start:start + pulse] = signal.windows.hann(pulse)
    return noise * gate


def _harmonic(rng: np.random.Generator, duration: float, sr: int) -> np.ndarray:
    t = np.arange(int(duration * sr)) / sr
    f0 = rng.uniform(230.0, 270.0)
    phase = 2 * np.pi * f0 * t + 3.0 * np.sin(2 * np.pi * 5.0 * t)
    return sum(np.sin(k * phase) / k for k in range(1, 7)) * _envelope(len(t))


@dataclass(frozen=True)
class CallArchetype:
    name: str
    synthesize: Callable[[np.random.Generator, float, int], np.ndarray]
    duration_range: Tuple[float, float]
    band_hz: Tuple[float, float]
    paired: bool = False


ARCHETYPES: Tuple[CallArchetype, ...] = (
    CallArchetype("tone", _tone, (0.4, 0.8), (500.0, 1400.0)),
    CallArchetype("chirp", _chirp, (0.3, 0.6), (350.0, 1700.0)),
    CallArchetype("burst", _burst, (0.6, 1.0), (200.0, 1000.0), paired=True),
    CallArchetype("harmonic", _harmonic, (0.5, 1.0), (200.0, 1700.0)),
)


@dataclass
class FixtureCorpus:
    root: Path
    manifest: CorpusManifest
    annotations: List[Annotation] = field(default_factory=list)
    config_path: Optional[Path] = None


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x ** 2))) if len(x) else 0.0


def noise_bed(rng: np.random.Generator, n: int) -> np.ndarray:
    """Gently low-passed gaussian noise at ``NOISE_RMS``."""
    bed = signal.lfilter([1.0], [1.0, -0.6], rng.standard_normal(n))
    return bed * (NOISE_RMS / _rms(bed))


def plant_calls(
    rng: np.random.Generator,
    archetype: CallArchetype,
    n_calls: int,
    session_s: float,
    snr_range_db: Tuple[float, float],
    sample_rate: int,
) -> List[Tuple[float, np.ndarray]]:
    """One call per equal slot of the session, with at least 0.5 s of silence around each."""
    slot = session_s / n_calls
    low, high = archetype.duration_range
    if high + 1.0 > slot:
        raise PreconditionError(f"{n_calls} calls of up to {high} s do not fit a {session_s} s session.")
    calls = []
    for k in range(n_calls):
        duration = float(rng.uniform(low, high))
        begin = k * slot + float(rng.uniform(0.5, slot - duration - 0.5))
        waveform = archetype.synthesize(rng, duration, sample_rate)
        snr_db = float(rng.uniform(*snr_range_db))
        waveform = waveform * (NOISE_RMS * 10.0 ** (snr_db / 20.0) / _rms(waveform))
        calls.append((begin, waveform))
    return calls


def _mix(bed: np.ndarray, calls: Sequence[Tuple[float, np.ndarray]], sr: int, gain: float, delay_s: float) -> np.ndarray:
    mixed = bed.copy()
    for begin, waveform in calls:
        start = int(round((begin + delay_s) * sr))
        stop = min(len(mixed), start + len(waveform))
        mixed[start:stop] += gain * waveform[: stop - start]
    return np.clip(mixed, -1.0, 1.0)


def render_fixture_config(seed: int) -> str:
    return "\n".join(
        [
            "# Generated fixture pipeline config",
            "frame.fft_size = 512",
            "detector.band_low_hz = 150",
            "detector.band_high_hz = 2000",
            "learn.norm_mode = zn+l2",
            "snr.max_hz = 2000",
            f"seed = {seed}",
            "paths.manifest = manifest.txt",
            "paths.annotations = tables",
            "paths.work_dir = work",
            "paths.run_log = runs.log",
            "",
        ]
    )


def generate_fixtures(
    root: Path,
    seed: int = 0,
    sessions: int = 5,
    session_s: float = SESSION_S,
    calls_per_recording: int = CALLS_PER_RECORDING,
    snr_range_db: Tuple[float, float] = (-5.0, 20.0),
    sample_rate: int = SAMPLE_RATE,
    archetypes: Sequence[CallArchetype] = ARCHETYPES,
) -> FixtureCorpus:
    """Write audio, ``manifest.txt``, one selection table per recording and ``pipeline.conf``."""
    root = Path(root)
    (root / "audio").mkdir(parents=True, exist_ok=True)
    (root / "tables").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    n_samples = int(session_s * sample_rate)

    recordings: List[Recording] = []
    pairing: List[Tuple[str, ...]] = []
    annotations: List[Annotation] = []
    tables: Dict[str, List[Annotation]] = {}

    for session in range(sessions):
        start = FIRST_SESSION + timedelta(seconds=session * SESSION_STRIDE_S)
        for archetype in archetypes:
            calls = plant_calls(rng, archetype, calls_per_recording, session_s, snr_range_db, sample_rate)
            recorders = [("A", 1.0, 0.0)]
            if archetype.paired:
                recorders.append(("B", 10.0 ** (PAIRED_GAIN_DB / 20.0), PAIRED_DELAY_S))
            group = []
            for recorder, gain, delay in recorders:
                source_id = f"{archetype.name}_{recorder.lower()}_s{session + 1}"
                samples = _mix(noise_bed(rng, n_samples), calls, sample_rate, gain, delay)
                path = root / "audio" / f"{source_id}.wav"
                write_wave(AudioClip(samples, sample_rate, source_id=source_id), path)
                recordings.append(Recording(source_id, path, start, recorder, archetype.name))
                group.append(source_id)
                tables[source_id] = [
                    Annotation(
                        source_id,
                        TimeInterval(begin + delay, min(begin + delay + len(w) / sample_rate, session_s)),
                        archetype.name,
                        low_freq_hz=archetype.band_hz[0],
                        high_freq_hz=archetype.band_hz[1],
                    )
                    for begin, w in calls
                ]
                annotations.extend(tables[source_id])
            if len(group) > 1:
                pairing.append(tuple(group))

    manifest = CorpusManifest(recordings, [a.name for a in archetypes], pairing, root / "manifest.txt")
    write_manifest(manifest, root / "manifest.txt")
    for source_id, rows in tables.items():
        write_annotations(rows, root / "tables" / f"{source_id}.Table.1.selections.txt")
    config_path = root / "pipeline.conf"
    with atomic_write(config_path) as handle:
        handle.write(render_fixture_config(seed))

    logger.info(
        "Generated %s recordings with %s planted calls under %s", len(recordings), len(annotations), root
    )
    return FixtureCorpus(root, manifest, annotations, config_path)
