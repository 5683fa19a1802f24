"""Frame-level low-level descriptors.

Every chunk becomes a ``frames x 114`` matrix laid out as::

    mfcc_0 .. mfcc_24 | plpcc_0 .. plpcc_12 | <same 38>_delta | <same 38>_delta2

MFCCs use an HTK-style triangular mel filterbank and an orthonormal DCT-II.
The perceptual cepstrum follows the rastamat recipe: Bark integration, log,
RASTA band-pass along time, exp, equal-loudness weighting, cube-root
compression, autocorrelation, Levinson-Durbin and the LPC-to-cepstrum
recursion. ``c0`` (log model gain) is kept.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft as sp_fft
from scipy import signal

from annotation.records import AudioClip
from pipeline.exceptions import ConfigError, FrameTooShortError, NumericalError, ShapeError
from pipeline.utils.atomic import atomic_write
from pipeline.utils.table_loader import write_table

logger = logging.getLogger(__name__)

N_MFCC = 25
N_PLP = 13
N_STATIC = N_MFCC + N_PLP
N_LLD = 3 * N_STATIC

RASTA_NUMERATOR = 0.1 * np.array([2.0, 1.0, 0.0, -1.0, -2.0])
RASTA_MIN_FRAMES = len(RASTA_NUMERATOR)

STATIC_NAMES = [f"mfcc_{i}" for i in range(N_MFCC)] + [f"plpcc_{i}" for i in range(N_PLP)]
LLD_NAMES = STATIC_NAMES + [f"{name}_delta" for name in STATIC_NAMES] + [f"{name}_delta2" for name in STATIC_NAMES]


class WindowKind(str, Enum):
    HAMMING = "hamming"
    HANN = "hann"


@dataclass(frozen=True)
class FrameSpec:
    frame_len_s: float = 0.025
    hop_s: float = 0.010
    window: WindowKind = WindowKind.HAMMING
    fft_size: int = 2048
    preemphasis: float = 0.97
    n_mels: int = 26
    n_mfcc: int = N_MFCC
    log_floor: float = 1e-10
    lp_order: int = 12
    rasta_pole: float = 0.94
    delta_window: int = 2

    def __post_init__(self) -> None:
        object.__setattr__(self, "window", WindowKind(self.window))
        if not self.frame_len_s >= self.hop_s > 0:
            raise ConfigError(f"frame_len_s ({self.frame_len_s}) must be >= hop_s ({self.hop_s}) > 0.")
        if self.fft_size <= 0 or self.fft_size & (self.fft_size - 1):
            raise ConfigError(f"fft_size must be a power of two, got {self.fft_size}.")
        if not 0 <= self.preemphasis < 1:
            raise ConfigError(f"preemphasis must lie in [0, 1), got {self.preemphasis}.")
        if self.n_mfcc != N_MFCC or self.lp_order + 1 != N_PLP:
            raise ConfigError(f"The descriptor layout needs {N_MFCC} MFCCs and LP order {N_PLP - 1}.")
        if self.n_mfcc > self.n_mels:
            raise ConfigError(f"n_mfcc ({self.n_mfcc}) cannot exceed n_mels ({self.n_mels}).")
        if self.log_floor <= 0:
            raise ConfigError("log_floor must be positive.")
        if not 0 < self.rasta_pole < 1:
            raise ConfigError(f"rasta_pole must lie in (0, 1), got {self.rasta_pole}.")
        if self.delta_window < 1:
            raise ConfigError("delta_window must be at least 1.")

    def frame_length(self, sample_rate: int) -> int:
        return int(round(self.frame_len_s * sample_rate))

    def hop_length(self, sample_rate: int) -> int:
        return max(1, int(round(self.hop_s * sample_rate)))

    def check_rate(self, sample_rate: int) -> None:
        if self.frame_length(sample_rate) > self.fft_size:
            raise ConfigError(
                f"fft_size {self.fft_size} is shorter than a {self.frame_len_s} s frame at {sample_rate} Hz."
            )

    def frame_count(self, n_samples: int, sample_rate: int) -> int:
        length = self.frame_length(sample_rate)
        if n_samples < length:
            return 0
        return 1 + (n_samples - length) // self.hop_length(sample_rate)


@dataclass(frozen=True, eq=False)
class PowerSpectrogram:
    values: np.ndarray
    sample_rate: int
    fft_size: int

    @property
    def bin_hz(self) -> float:
        return self.sample_rate / self.fft_size

    @property
    def n_frames(self) -> int:
        return int(self.values.shape[0])

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.values.shape[1]) * self.bin_hz


@dataclass(frozen=True, eq=False)
class LldMatrix:
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != N_LLD:
            raise ShapeError(f"LLD matrix must have {N_LLD} columns, got shape {values.shape}.")
        if values.shape[0] < 1:
            raise ShapeError("LLD matrix needs at least one frame.")
        if not np.all(np.isfinite(values)):
            raise NumericalError("LLD matrix contains non-finite values.")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def frames(self) -> int:
        return int(self.values.shape[0])

    @property
    def dims(self) -> int:
        return int(self.values.shape[1])


def preemphasize(frames: np.ndarray, alpha: float) -> np.ndarray:
    """``y[n] = x[n] - alpha * x[n-1]`` along the last axis; ``y[0] = x[0]``."""
    frames = np.asarray(frames, dtype=np.float64)
    out = frames.copy()
    out[..., 1:] -= alpha * frames[..., :-1]
    return out


def frame_signal(clip: AudioClip, spec: FrameSpec) -> np.ndarray:
    """Slice ``clip`` into pre-emphasised, windowed frames (frames x frame length)."""
    length = spec.frame_length(clip.sample_rate)
    hop = spec.hop_length(clip.sample_rate)
    if len(clip) < length:
        raise FrameTooShortError(
            f"Clip of {len(clip)} samples is shorter than one {length}-sample frame."
        )
    frames = sliding_window_view(clip.samples, length)[::hop]
    window = signal.get_window(spec.window.value, length, fftbins=False)
    return preemphasize(frames, spec.preemphasis) * window


def power_spectrum(frames: np.ndarray, spec: FrameSpec, sample_rate: int) -> PowerSpectrogram:
    frames = np.atleast_2d(frames)
    if frames.shape[1] > spec.fft_size:
        raise ShapeError(f"Frames of {frames.shape[1]} samples exceed fft_size {spec.fft_size}.")
    spectrum = sp_fft.rfft(frames, n=spec.fft_size, axis=1)
    return PowerSpectrogram(np.abs(spectrum) ** 2, sample_rate, spec.fft_size)


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, fft_size: int, sample_rate: int, low_hz: float = 0.0, high_hz: Optional[float] = None) -> np.ndarray:
    """Triangular filters (n_mels x fft_size//2+1) with mel-equidistant edges."""
    high_hz = sample_rate / 2.0 if high_hz is None else high_hz
    edges = mel_to_hz(np.linspace(hz_to_mel(low_hz), hz_to_mel(high_hz), n_mels + 2))
    freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lower) / (center - lower)
    falling = (upper - freqs) / (upper - center)
    return np.maximum(0.0, np.minimum(rising, falling))


def mfcc(pspec: PowerSpectrogram, n_mels: int = 26, n_coeffs: int = N_MFCC, log_floor: float = 1e-10) -> np.ndarray:
    if n_coeffs > n_mels:
        raise ConfigError(f"n_coeffs ({n_coeffs}) cannot exceed n_mels ({n_mels}).")
    bank = mel_filterbank(n_mels, pspec.fft_size, pspec.sample_rate)
    energies = pspec.values @ bank.T
    log_energies = np.log(np.maximum(energies, log_floor))
    return sp_fft.dct(log_energies, type=2, norm="ortho", axis=1)[:, :n_coeffs]


def hz_to_bark(hz):
    return 6.0 * np.arcsinh(np.asarray(hz, dtype=np.float64) / 600.0)


def bark_to_hz(bark):
    return 600.0 * np.sinh(np.asarray(bark, dtype=np.float64) / 6.0)


def bark_band_count(sample_rate: int) -> int:
    return int(np.ceil(hz_to_bark(sample_rate / 2.0))) + 1


def bark_filterbank(fft_size: int, sample_rate: int, n_bands: Optional[int] = None, width: float = 1.0) -> np.ndarray:
    """Trapezoidal critical-band weights (n_bands x fft_size//2+1), one band per Bark."""
    nyquist_bark = hz_to_bark(sample_rate / 2.0)
    n_bands = n_bands or bark_band_count(sample_rate)
    step = nyquist_bark / (n_bands - 1)
    bin_barks = hz_to_bark(np.arange(fft_size // 2 + 1) * sample_rate / fft_size)
    centers = (np.arange(n_bands) * step)[:, None]
    lof = bin_barks - centers - 0.5
    hif = bin_barks - centers + 0.5
    return 10.0 ** (np.minimum(0.0, np.minimum(hif, -2.5 * lof) / width))


def rasta_filter(log_bands: np.ndarray, pole: float = 0.94) -> np.ndarray:
    """Band-pass each band trajectory (frames x bands) along time.

    The first four outputs are zero; the FIR state built over them seeds the
    IIR section, so a constant trajectory yields exactly zero afterwards.
    """
    log_bands = np.asarray(log_bands, dtype=np.float64)
    if log_bands.shape[0] < RASTA_MIN_FRAMES:
        raise FrameTooShortError(
            f"RASTA filtering needs at least {RASTA_MIN_FRAMES} frames, got {log_bands.shape[0]}."
        )
    n_state = len(RASTA_NUMERATOR) - 1
    zi = np.zeros((n_state, log_bands.shape[1]))
    _, zi = signal.lfilter(RASTA_NUMERATOR, [1.0], log_bands[:n_state], axis=0, zi=zi)
    tail, _ = signal.lfilter(RASTA_NUMERATOR, [1.0, -pole], log_bands[n_state:], axis=0, zi=zi)
    return np.vstack([np.zeros((n_state, log_bands.shape[1])), tail])


def equal_loudness(n_bands: int, sample_rate: int) -> np.ndarray:
    center_hz = bark_to_hz(np.linspace(0.0, hz_to_bark(sample_rate / 2.0), n_bands))
    fsq = center_hz ** 2
    return ((fsq / (fsq + 1.6e5)) ** 2) * ((fsq + 1.44e6) / (fsq + 9.61e6))


def autocorrelation(spectrum: np.ndarray) -> np.ndarray:
    """Autocorrelation lags 0..bands-1 from a one-sided power spectrum (frames x bands)."""
    n_bands = spectrum.shape[1]
    mirrored = np.hstack([spectrum, spectrum[:, n_bands - 2:0:-1]])
    return np.real(sp_fft.ifft(mirrored, axis=1))[:, :n_bands]


def levinson_durbin(r: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Solve the normal equations for every row of ``r`` (frames x lags).

    Returns monic predictor polynomials (frames x order+1), final prediction
    errors and reflection coefficients (frames x order).
    """
    r = np.atleast_2d(np.asarray(r, dtype=np.float64))
    if r.shape[1] <= order:
        raise ShapeError(f"Order {order} needs {order + 1} autocorrelation lags, got {r.shape[1]}.")
    n_frames = r.shape[0]
    a = np.zeros((n_frames, order + 1))
    a[:, 0] = 1.0
    reflection = np.zeros((n_frames, order))
    err = r[:, 0].copy()
    _check_error(err, 0)

    for i in range(1, order + 1):
        acc = r[:, i] + np.sum(a[:, 1:i] * r[:, i - 1:0:-1], axis=1)
        k = -acc / err
        previous = a[:, 1:i].copy()
        a[:, 1:i] = previous + k[:, None] * previous[:, ::-1]
        a[:, i] = k
        reflection[:, i - 1] = k
        err = err * (1.0 - k * k)
        _check_error(err, i)
    return a, err, reflection


def _check_error(err: np.ndarray, step: int) -> None:
    bad = np.flatnonzero(~(err > 0))
    if bad.size:
        raise NumericalError(
            f"Non-positive prediction error at frame {int(bad[0])} (recursion step {step})."
        )


def lpc_to_cepstrum(a: np.ndarray, n_out: Optional[int] = None) -> np.ndarray:
    """Cepstra of all-pole models given as gain-scaled polynomials (frames x order+1)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    n_in = a.shape[1]
    n_out = n_in if n_out is None else n_out
    c = np.zeros((a.shape[0], n_out))
    c[:, 0] = -np.log(a[:, 0])
    a = a / a[:, :1]
    for n in range(1, n_out):
        acc = np.zeros(a.shape[0])
        for m in range(1, n):
            if m < n_in:
                acc += (n - m) * a[:, m] * c[:, n - m]
        an = a[:, n] if n < n_in else 0.0
        c[:, n] = -(an + acc / n)
    return c


def rasta_plp(pspec: PowerSpectrogram, lp_order: int = 12, pole: float = 0.94, log_floor: float = 1e-10) -> np.ndarray:
    bank = bark_filterbank(pspec.fft_size, pspec.sample_rate)
    bands = pspec.values @ bank.T
    filtered = np.exp(rasta_filter(np.log(np.maximum(bands, log_floor)), pole))

    compressed = np.cbrt(filtered * equal_loudness(bands.shape[1], pspec.sample_rate))
    # The edge bands are unreliable; copy their neighbours.
    compressed[:, 0] = compressed[:, 1]
    compressed[:, -1] = compressed[:, -2]

    r = autocorrelation(compressed)
    a, err, _ = levinson_durbin(r, lp_order)
    return lpc_to_cepstrum(a / err[:, None], lp_order + 1)


def deltas(x: np.ndarray, window: int = 2) -> np.ndarray:
    """Regression deltas along time with replicated edge frames."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n = x.shape[0]
    padded = np.pad(x, ((window, window), (0, 0)), mode="edge")
    out = np.zeros_like(x)
    for w in range(1, window + 1):
        out += w * (padded[window + w:window + w + n] - padded[window - w:window - w + n])
    return out / (2.0 * sum(w * w for w in range(1, window + 1)))


def extract_lld(clip: AudioClip, spec: FrameSpec) -> LldMatrix:
    spec.check_rate(clip.sample_rate)
    frames = frame_signal(clip, spec)
    pspec = power_spectrum(frames, spec, clip.sample_rate)
    static = np.hstack(
        [
            mfcc(pspec, spec.n_mels, spec.n_mfcc, spec.log_floor),
            rasta_plp(pspec, spec.lp_order, spec.rasta_pole, spec.log_floor),
        ]
    )
    first = deltas(static, spec.delta_window)
    second = deltas(first, spec.delta_window)
    return LldMatrix(np.hstack([static, first, second]))


def write_lld_csv(matrix: LldMatrix, path: Path) -> int:
    rows = ([format(v, ".17g") for v in row] for row in matrix.values)
    with atomic_write(Path(path)) as handle:
        return write_table(handle, LLD_NAMES, rows, delimiter=",")
