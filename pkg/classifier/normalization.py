"""Feature normalisation: per-feature z-scores, optionally followed by unit L2 norm."""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np

from classifier.features.functionals import FeatureVector, feature_matrix
from pipeline.exceptions import PreconditionError, ShapeError

logger = logging.getLogger(__name__)


class NormMode(str, Enum):
    ZN = "zn"
    ZN_L2 = "zn+l2"

    @property
    def apply_l2(self) -> bool:
        return self is NormMode.ZN_L2


@dataclass(frozen=True, eq=False)
class NormStats:
    mean: np.ndarray
    std: np.ndarray
    apply_l2: bool

    def __post_init__(self) -> None:
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ShapeError("Normalisation mean and std must be vectors of equal length.")
        if np.any(self.std < 0):
            raise PreconditionError("Standard deviations cannot be negative.")

    @property
    def zero_std(self) -> np.ndarray:
        """Mask of constant features; these map to 0."""
        return self.std == 0

    @property
    def dims(self) -> int:
        return int(self.mean.shape[0])


Features = Union[np.ndarray, Sequence[FeatureVector]]


def as_matrix(data: Features) -> np.ndarray:
    if isinstance(data, np.ndarray):
        return np.atleast_2d(data.astype(np.float64, copy=False))
    return feature_matrix(list(data))


def fit_norm(train: Features, apply_l2: bool) -> NormStats:
    """Mean and population std per feature, from training data only."""
    matrix = as_matrix(train)
    if matrix.shape[0] < 2:
        raise PreconditionError(f"Normalisation needs at least 2 training vectors, got {matrix.shape[0]}.")
    stats = NormStats(matrix.mean(axis=0), matrix.std(axis=0), bool(apply_l2))
    constant = int(np.count_nonzero(stats.zero_std))
    if constant:
        logger.info("%s of %s features are constant on the training set.", constant, stats.dims)
    return stats


def apply_norm(x: Union[np.ndarray, FeatureVector], stats: NormStats) -> np.ndarray:
    """Normalise one vector or a row matrix with ``stats``."""
    values = x.values if isinstance(x, FeatureVector) else np.asarray(x, dtype=np.float64)
    if values.shape[-1] != stats.dims:
        raise ShapeError(f"Expected {stats.dims} features, got {values.shape[-1]}.")
    scale = np.where(stats.zero_std, 1.0, stats.std)
    z = np.where(stats.zero_std, 0.0, (values - stats.mean) / scale)
    if stats.apply_l2:
        norms = np.linalg.norm(z, axis=-1, keepdims=True)
        z = np.where(norms > 0, z / np.where(norms > 0, norms, 1.0), z)
    return z
