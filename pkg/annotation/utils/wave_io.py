"""RIFF/WAVE decoding and encoding for mono analysis clips.

16-bit samples map to ``s / 32768``; encoding multiplies by 32768, rounds and
saturates at the int16 range, so a decode/encode cycle of 16-bit PCM is
bit-exact.
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.io import wavfile

from annotation.records import AudioClip
from pipeline.exceptions import PreconditionError, UnsupportedEncodingError, WaveFormatError, WaveWriteError
from pipeline.utils.atomic import atomic_write

logger = logging.getLogger(__name__)

PCM_SCALE = 32768.0

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

_FORMAT_NAMES = {
    WAVE_FORMAT_PCM: "PCM",
    WAVE_FORMAT_IEEE_FLOAT: "IEEE-float",
    0x0006: "A-law",
    0x0007: "mu-law",
    0x0011: "IMA-ADPCM",
}


class WaveHeader(NamedTuple):
    format_tag: int
    channels: int
    sample_rate: int
    bits_per_sample: int
    data_bytes: int

    @property
    def encoding(self) -> str:
        name = _FORMAT_NAMES.get(self.format_tag, f"format 0x{self.format_tag:04x}")
        return f"{name} {self.bits_per_sample}-bit"

    @property
    def frame_count(self) -> int:
        block = self.channels * max(1, self.bits_per_sample // 8)
        return self.data_bytes // block


@dataclass(frozen=True)
class WriteResult:
    path: Path
    samples_written: int
    clipped_samples: int


def read_wave_header(path: Path) -> WaveHeader:
    """Parse the RIFF chunk list up to the data chunk without decoding samples."""
    path = Path(path)
    with path.open("rb") as handle:
        riff = handle.read(12)
        if len(riff) < 12 or riff[:4] != b"RIFF" or riff[8:12] != b"WAVE":
            raise WaveFormatError(f"{path} is not a RIFF/WAVE file.")

        fmt = None
        while True:
            chunk_header = handle.read(8)
            if len(chunk_header) < 8:
                break
            chunk_id, chunk_size = struct.unpack("<4sI", chunk_header)
            if chunk_id == b"fmt ":
                payload = handle.read(chunk_size)
                if len(payload) < 16:
                    raise WaveFormatError(f"{path}: truncated fmt chunk.")
                format_tag, channels, sample_rate, _, _, bits = struct.unpack("<HHIIHH", payload[:16])
                if format_tag == WAVE_FORMAT_EXTENSIBLE and len(payload) >= 26:
                    # The sub-format GUID starts with the real format tag.
                    format_tag = struct.unpack("<H", payload[24:26])[0]
                fmt = (format_tag, channels, sample_rate, bits)
            elif chunk_id == b"data":
                if fmt is None:
                    raise WaveFormatError(f"{path}: data chunk precedes fmt chunk.")
                return WaveHeader(*fmt, data_bytes=chunk_size)
            else:
                handle.seek(chunk_size + (chunk_size & 1), 1)
            if chunk_id == b"fmt " and chunk_size & 1:
                handle.seek(1, 1)

    if fmt is None:
        raise WaveFormatError(f"{path}: missing fmt chunk.")
    raise WaveFormatError(f"{path}: missing data chunk.")


def wave_duration(path: Path) -> float:
    header = read_wave_header(path)
    if header.sample_rate <= 0:
        raise WaveFormatError(f"{path}: sample rate must be positive.")
    return header.frame_count / header.sample_rate


def read_wave(path: Path) -> AudioClip:
    """Decode a 16-bit PCM or 32-bit float WAVE file into a mono clip."""
    path = Path(path)
    header = read_wave_header(path)
    supported = (header.format_tag, header.bits_per_sample) in {
        (WAVE_FORMAT_PCM, 16),
        (WAVE_FORMAT_IEEE_FLOAT, 32),
    }
    if not supported:
        raise UnsupportedEncodingError(header.encoding, str(path))
    if header.channels not in (1, 2):
        raise UnsupportedEncodingError(f"{header.encoding} with {header.channels} channels", str(path))
    if header.sample_rate <= 0:
        raise WaveFormatError(f"{path}: sample rate must be positive.")

    try:
        sample_rate, data = wavfile.read(path)
    except ValueError as exc:
        raise WaveFormatError(f"{path}: {exc}") from exc

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM_SCALE
    else:
        samples = data.astype(np.float64)
        clipped = int(np.count_nonzero(np.abs(samples) > 1.0))
        if clipped:
            logger.warning("%s: clipped %s float sample(s) outside [-1, 1].", path, clipped)
            samples = np.clip(samples, -1.0, 1.0)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if samples.size == 0:
        raise WaveFormatError(f"{path}: data chunk holds no samples.")

    return AudioClip(samples, int(sample_rate), source_id=path.stem.split(".")[0])


def encode_pcm16(samples: np.ndarray) -> "tuple[np.ndarray, int]":
    samples = np.asarray(samples, dtype=np.float64)
    out_of_range = np.abs(samples) > 1.0
    clipped = int(np.count_nonzero(out_of_range))
    clamped = np.clip(samples, -1.0, 1.0)
    scaled = np.rint(clamped * PCM_SCALE)
    return np.clip(scaled, -PCM_SCALE, PCM_SCALE - 1).astype(np.int16), clipped


def write_wave(clip: AudioClip, path: Path) -> WriteResult:
    """Write ``clip`` as 16-bit PCM mono; out-of-range samples are clamped and counted."""
    if len(clip) == 0:
        raise PreconditionError("Cannot write an empty clip.")
    pcm, clipped = encode_pcm16(clip.samples)
    if clipped:
        logger.warning("Clamped %s sample(s) outside [-1, 1] while writing %s", clipped, path)

    path = Path(path)
    try:
        with atomic_write(path, "wb") as handle:
            wavfile.write(handle, clip.sample_rate, pcm)
    except OSError as exc:
        raise WaveWriteError(f"Failed to write {path}: {exc}") from exc
    return WriteResult(path=path, samples_written=int(pcm.size), clipped_samples=clipped)
