"""Value types shared by the annotation and classifier apps."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from pipeline.exceptions import PreconditionError

BACKGROUND_LABEL = "background"


@dataclass(frozen=True, order=True)
class TimeInterval:
    begin_s: float
    end_s: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.begin_s) and np.isfinite(self.end_s)):
            raise PreconditionError(f"Interval bounds must be finite, got [{self.begin_s}, {self.end_s}).")
        if self.begin_s >= self.end_s:
            raise PreconditionError(f"Interval begin {self.begin_s} must precede end {self.end_s}.")

    @property
    def duration(self) -> float:
        return self.end_s - self.begin_s

    def overlaps(self, other: "TimeInterval") -> bool:
        return self.begin_s < other.end_s and other.begin_s < self.end_s

    def overlap_s(self, other: "TimeInterval") -> float:
        return max(0.0, min(self.end_s, other.end_s) - max(self.begin_s, other.begin_s))

    def shifted(self, offset_s: float) -> "TimeInterval":
        return TimeInterval(self.begin_s + offset_s, self.end_s + offset_s)


@dataclass(frozen=True)
class Annotation:
    """A labeled time interval on a named recording (one selection-table row)."""

    source_id: str
    interval: TimeInterval
    label: str
    low_freq_hz: Optional[float] = None
    high_freq_hz: Optional[float] = None

    def __post_init__(self) -> None:
        if self.interval.begin_s < 0:
            raise PreconditionError(f"Annotation on {self.source_id} starts before 0 s.")

    @property
    def begin_s(self) -> float:
        return self.interval.begin_s

    @property
    def end_s(self) -> float:
        return self.interval.end_s

    @property
    def duration(self) -> float:
        return self.interval.duration

    @property
    def chunk_ref(self) -> "ChunkRef":
        return ChunkRef(self.source_id, self.interval)


@dataclass(frozen=True, order=True)
class ChunkRef:
    source_id: str
    interval: TimeInterval

    def __str__(self) -> str:
        return f"{self.source_id}@{self.interval.begin_s!r}:{self.interval.end_s!r}"

    @classmethod
    def parse(cls, text: str) -> "ChunkRef":
        source_id, _, span = text.rpartition("@")
        begin, _, end = span.partition(":")
        return cls(source_id, TimeInterval(float(begin), float(end)))


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Mono samples in [-1, 1] with their rate and provenance."""

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""
    source_offset: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise PreconditionError(f"Sample rate must be positive, got {self.sample_rate}.")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise PreconditionError("AudioClip samples must be one-dimensional (mono).")
        samples = samples.copy() if samples.flags.writeable else samples
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def slice(self, begin_s: float, end_s: float) -> "AudioClip":
        start = int(round(begin_s * self.sample_rate))
        stop = int(round(end_s * self.sample_rate))
        if start < 0 or stop > len(self) or start >= stop:
            raise PreconditionError(
                f"Slice [{begin_s}, {end_s}) s is outside clip {self.source_id or '<anonymous>'} "
                f"of {self.duration:.3f} s."
            )
        return AudioClip(
            self.samples[start:stop],
            self.sample_rate,
            source_id=self.source_id,
            source_offset=self.source_offset + start / self.sample_rate,
        )

    def scaled(self, gain: float) -> "AudioClip":
        return AudioClip(self.samples * gain, self.sample_rate, self.source_id, self.source_offset)
