"""Pipeline configuration file.

Grammar (UTF-8, one setting per line)::

    # comment
    frame.hop_s = 0.01
    detector.band_high_hz = 2000
    detector.burst.band_high_hz = 1500
    learn.norm_mode = zn+l2
    learn.c_grid = 1e-1..1e6 by decade
    split.ratios = 3, 1, 1
    background.retry_cap = 10000
    snr.max_hz = 2000
    snr.mode = mean_db
    seed = 0
    paths.manifest = manifest.txt
    paths.annotations = tables
    paths.work_dir = work
    paths.run_log = runs.log

``frame.*`` and ``detector.*`` accept every field of the frame and detector
settings. ``detector.<species>.*`` overrides the detector settings for one
species. Relative paths resolve against the config file's directory. Every
error names the offending line.
"""

import logging
import math
import re
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from django.conf import settings

from annotation.detection import DetectorConfig
from classifier.features.lld import FrameSpec
from classifier.normalization import NormMode
from pipeline.exceptions import ConfigError

logger = logging.getLogger(__name__)

_DECADE = re.compile(r"^\s*(\S+)\s*\.\.\s*(\S+)\s+by\s+decade\s*$")
_SPECIES = re.compile(r"^[A-Za-z0-9_\-]+$")
PATH_KEYS = ("manifest", "annotations", "work_dir", "run_log")


class SnrMode(str, Enum):
    MEAN_DB = "mean_db"
    DB_OF_MEAN = "db_of_mean"


@dataclass
class PipelineConfig:
    frame: FrameSpec = field(default_factory=FrameSpec)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    species_detectors: Dict[str, DetectorConfig] = field(default_factory=dict)
    norm_mode: NormMode = NormMode.ZN_L2
    c_grid: Optional[List[float]] = None
    split_ratios: Tuple[float, float, float] = (3.0, 1.0, 1.0)
    retry_cap: int = 10_000
    snr_max_hz: float = 2000.0
    snr_mode: SnrMode = SnrMode.MEAN_DB
    seed: int = 0
    paths: Dict[str, Optional[Path]] = field(default_factory=lambda: {key: None for key in PATH_KEYS})
    source: Optional[Path] = None

    def detector_for(self, species: str) -> DetectorConfig:
        return self.species_detectors.get(species, self.detector)

    def path(self, key: str) -> Optional[Path]:
        return self.paths.get(key)

    def work_path(self, *parts: str) -> Path:
        base = self.paths.get("work_dir") or (self.source.parent if self.source else Path.cwd())
        return Path(base).joinpath(*parts)


def expand_grid(text: str) -> List[float]:
    """``1e-6..1e1 by decade`` or a comma-separated list of positive values."""
    match = _DECADE.match(text)
    if match:
        low, high = float(match.group(1)), float(match.group(2))
        if low <= 0 or high <= 0:
            raise ValueError("decade bounds must be positive")
        first, last = round(math.log10(low)), round(math.log10(high))
        if not (math.isclose(10.0 ** first, low) and math.isclose(10.0 ** last, high)):
            raise ValueError("decade bounds must be powers of ten")
        if first > last:
            raise ValueError("decade range is empty")
        return [10.0 ** e for e in range(first, last + 1)]
    values = [float(part) for part in text.split(",") if part.strip()]
    if not values:
        raise ValueError("grid is empty")
    if any(not value > 0 or not math.isfinite(value) for value in values):
        raise ValueError("C values must be positive")
    return values


def _convert(target_type, text: str):
    if target_type is bool:
        return text.lower() in {"1", "true", "yes"}
    if isinstance(target_type, type) and issubclass(target_type, Enum):
        return target_type(text)
    if target_type is int:
        return int(text)
    return float(text)


def _dataclass_values(cls, items: Dict[str, Tuple[str, int]], path: Optional[Path], section: str) -> Dict:
    types = {f.name: f.type for f in fields(cls)}
    values = {}
    for name, (text, line) in items.items():
        if name not in types:
            raise ConfigError(f"Unknown key '{section}.{name}'.", line, path)
        try:
            values[name] = _convert(types[name], text)
        except ValueError:
            raise ConfigError(f"Invalid value '{text}' for '{section}.{name}'.", line, path) from None
    return values


def _build(cls, base, items: Dict[str, Tuple[str, int]], path: Optional[Path], section: str):
    values = _dataclass_values(cls, items, path, section)
    try:
        return replace(base, **values) if base is not None else cls(**values)
    except ConfigError as exc:
        last_line = max(line for _, line in items.values()) if items else None
        raise ConfigError(str(exc), last_line, path) from None


def _read_lines(path: Path) -> Dict[str, Tuple[str, int]]:
    entries: Dict[str, Tuple[str, int]] = {}
    with open(path, encoding="utf-8") as handle:
        for line_num, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or not key:
                raise ConfigError(f"Expected 'key = value', got '{line}'.", line_num, path)
            if key in entries:
                raise ConfigError(f"Duplicate key '{key}' (first set on line {entries[key][1]}).", line_num, path)
            entries[key] = (value, line_num)
    return entries


def load_config(path: Optional[Path] = None) -> PipelineConfig:
    """Parse and validate a config file; ``None`` yields the defaults."""
    config = PipelineConfig(seed=settings.VOCAL_SEED)
    if path is None:
        return config
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file {path} does not exist.")
    base_dir = path.resolve().parent
    config.source = path.resolve()

    frame_items: Dict[str, Tuple[str, int]] = {}
    detector_items: Dict[str, Tuple[str, int]] = {}
    species_items: Dict[str, Dict[str, Tuple[str, int]]] = {}

    for key, (value, line) in _read_lines(path).items():
        parts = key.split(".")
        try:
            if parts[0] == "frame" and len(parts) == 2:
                frame_items[parts[1]] = (value, line)
            elif parts[0] == "detector" and len(parts) == 2:
                detector_items[parts[1]] = (value, line)
            elif parts[0] == "detector" and len(parts) == 3 and _SPECIES.match(parts[1]):
                species_items.setdefault(parts[1], {})[parts[2]] = (value, line)
            elif key == "learn.norm_mode":
                config.norm_mode = NormMode(value)
            elif key == "learn.c_grid":
                config.c_grid = expand_grid(value)
            elif key == "split.ratios":
                ratios = tuple(float(part) for part in value.split(","))
                if len(ratios) != 3 or any(not r > 0 for r in ratios):
                    raise ValueError("three positive ratios are required")
                config.split_ratios = ratios
            elif key == "background.retry_cap":
                config.retry_cap = int(value)
                if config.retry_cap < 1:
                    raise ValueError("retry cap must be at least 1")
            elif key == "snr.max_hz":
                config.snr_max_hz = float(value)
                if not config.snr_max_hz > 0:
                    raise ValueError("max_hz must be positive")
            elif key == "snr.mode":
                config.snr_mode = SnrMode(value)
            elif key == "seed":
                config.seed = int(value)
            elif parts[0] == "paths" and len(parts) == 2 and parts[1] in PATH_KEYS:
                resolved = Path(value).expanduser()
                config.paths[parts[1]] = resolved if resolved.is_absolute() else base_dir / resolved
            else:
                raise ConfigError(f"Unknown key '{key}'.", line, path)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"Invalid value '{value}' for '{key}': {exc}", line, path) from None

    config.frame = _build(FrameSpec, None, frame_items, path, "frame")
    config.detector = _build(DetectorConfig, None, detector_items, path, "detector")
    config.species_detectors = {
        species: _build(DetectorConfig, config.detector, items, path, f"detector.{species}")
        for species, items in species_items.items()
    }

    for key in ("manifest", "annotations"):
        target = config.paths[key]
        if target is not None and not target.exists():
            raise ConfigError(f"paths.{key} points to missing {target}.", _line_of(path, f"paths.{key}"), path)
    logger.debug("Loaded pipeline config from %s", path)
    return config


def _line_of(path: Path, key: str) -> Optional[int]:
    return _read_lines(path).get(key, ("", None))[1]


def _format(value) -> str:
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_config(config: PipelineConfig) -> str:
    """The fully defaulted config in the file grammar; ``load_config`` reads it back unchanged."""
    lines = [f"frame.{f.name} = {_format(getattr(config.frame, f.name))}" for f in fields(FrameSpec)]
    lines += [f"detector.{f.name} = {_format(getattr(config.detector, f.name))}" for f in fields(DetectorConfig)]
    for species in sorted(config.species_detectors):
        override = config.species_detectors[species]
        lines += [f"detector.{species}.{f.name} = {_format(getattr(override, f.name))}" for f in fields(DetectorConfig)]
    lines.append(f"learn.norm_mode = {config.norm_mode.value}")
    if config.c_grid is not None:
        lines.append(f"learn.c_grid = {', '.join(repr(float(c)) for c in config.c_grid)}")
    lines.append(f"split.ratios = {', '.join(repr(float(r)) for r in config.split_ratios)}")
    lines.append(f"background.retry_cap = {config.retry_cap}")
    lines.append(f"snr.max_hz = {config.snr_max_hz!r}")
    lines.append(f"snr.mode = {config.snr_mode.value}")
    lines.append(f"seed = {config.seed}")
    for key in PATH_KEYS:
        if config.paths.get(key) is not None:
            lines.append(f"paths.{key} = {Path(config.paths[key]).as_posix()}")
    return "\n".join(lines) + "\n"
