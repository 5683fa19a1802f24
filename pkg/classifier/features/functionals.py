"""Chunk-level functionals over LLD contours.

Each of the 114 contours is summarised by ten statistics, giving a 1140-dim
vector ordered ``values[lld * 10 + functional]``. Polynomial fits run over
normalised time ``t in [0, 1]``; the standard deviation uses divisor ``n``.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from annotation.records import ChunkRef
from classifier.features.lld import N_LLD, LldMatrix
from pipeline.exceptions import NumericalError, SchemaError, ShapeError
from pipeline.utils.atomic import atomic_write
from pipeline.utils.table_loader import TableBatchLoader, write_table

logger = logging.getLogger(__name__)

FUNCTIONAL_NAMES = [
    "mean",
    "std",
    "slope",
    "offset",
    "curvature",
    "min",
    "min_relpos",
    "max",
    "max_relpos",
    "zcr",
]
N_FUNCTIONALS = len(FUNCTIONAL_NAMES)
N_FEATURES = N_LLD * N_FUNCTIONALS

FEATURE_NAMES = [f"lld{i}_{name}" for i in range(N_LLD) for name in FUNCTIONAL_NAMES]
LABEL_COLUMN = "label"
CHUNK_COLUMN = "chunk_ref"


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    label: Optional[str] = None
    chunk_ref: Optional[ChunkRef] = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (N_FEATURES,):
            raise ShapeError(f"Feature vector must have {N_FEATURES} values, got shape {values.shape}.")
        if not np.all(np.isfinite(values)):
            raise NumericalError(f"Feature vector for {self.chunk_ref} contains non-finite values.")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def with_label(self, label: Optional[str]) -> "FeatureVector":
        return FeatureVector(self.values, label, self.chunk_ref)


def _normalize_range(contour: np.ndarray) -> np.ndarray:
    """Affinely map each column into [-1, 1]; constant columns become zero."""
    low = contour.min(axis=0)
    span = contour.max(axis=0) - low
    out = np.zeros_like(contour)
    varying = span > 0
    out[:, varying] = 2.0 * (contour[:, varying] - low[varying]) / span[varying] - 1.0
    return out


def zero_crossing_rate(contour: np.ndarray) -> np.ndarray:
    """Sign changes per transition of the range-normalised contour (frames x columns).

    A zero takes the sign of its successor; a trailing zero run is positive.
    """
    contour = np.atleast_2d(np.asarray(contour, dtype=np.float64))
    n = contour.shape[0]
    if n < 2:
        return np.zeros(contour.shape[1])
    normalized = _normalize_range(contour)
    signs = np.sign(normalized)
    # Fill zeros backwards from the next non-zero sample.
    for t in range(n - 2, -1, -1):
        zero = signs[t] == 0
        signs[t, zero] = signs[t + 1, zero]
    signs[signs == 0] = 1.0
    changes = np.count_nonzero(signs[1:] != signs[:-1], axis=0)
    return changes / (n - 1)


def _summarize_values(contour: np.ndarray) -> np.ndarray:
    n, columns = contour.shape
    out = np.zeros((columns, N_FUNCTIONALS))
    mean = contour.mean(axis=0)
    out[:, 0] = mean
    out[:, 1] = contour.std(axis=0)

    if n >= 2:
        t = np.linspace(0.0, 1.0, n)
        slope, offset = np.polyfit(t, contour, 1)
        out[:, 2] = slope
        out[:, 3] = offset
    else:
        out[:, 3] = mean
    if n >= 3:
        out[:, 4] = np.polyfit(t, contour, 2)[0]

    denominator = max(n - 1, 1)
    out[:, 5] = contour.min(axis=0)
    out[:, 6] = np.argmin(contour, axis=0) / denominator if n > 1 else 0.0
    out[:, 7] = contour.max(axis=0)
    out[:, 8] = np.argmax(contour, axis=0) / denominator if n > 1 else 0.0
    out[:, 9] = zero_crossing_rate(contour)
    return out.reshape(-1)


def summarize(lld: LldMatrix, chunk_ref: Optional[ChunkRef] = None, label: Optional[str] = None) -> FeatureVector:
    if lld.frames < 1:
        raise ShapeError("Cannot summarise an empty LLD matrix.")
    return FeatureVector(_summarize_values(lld.values), label=label, chunk_ref=chunk_ref)


def summarize_batch(
    llds: Sequence[LldMatrix],
    chunk_refs: Optional[Sequence[Optional[ChunkRef]]] = None,
    labels: Optional[Sequence[Optional[str]]] = None,
) -> List[FeatureVector]:
    chunk_refs = chunk_refs or [None] * len(llds)
    labels = labels or [None] * len(llds)
    return [summarize(lld, ref, label) for lld, ref, label in zip(llds, chunk_refs, labels)]


def feature_matrix(vectors: Sequence[FeatureVector]) -> np.ndarray:
    if not vectors:
        return np.zeros((0, N_FEATURES))
    return np.vstack([v.values for v in vectors])


def write_feature_csv(vectors: Iterable[FeatureVector], path: Path) -> int:
    """One row per chunk: 1140 values (17 significant digits), then label and chunk_ref."""
    rows = (
        [format(value, ".17g") for value in vector.values]
        + [vector.label or "", "" if vector.chunk_ref is None else str(vector.chunk_ref)]
        for vector in vectors
    )
    with atomic_write(Path(path)) as handle:
        count = write_table(handle, FEATURE_NAMES + [LABEL_COLUMN, CHUNK_COLUMN], rows, delimiter=",")
    logger.info("Saved %s feature vectors to %s", count, path)
    return count


def read_feature_csv(path: Path, batch_size: int = 5000) -> List[FeatureVector]:
    loader = TableBatchLoader(Path(path), batch_size=batch_size, delimiter=",")
    header = loader.require_columns(FEATURE_NAMES + [LABEL_COLUMN, CHUNK_COLUMN])
    if header[:N_FEATURES] != FEATURE_NAMES:
        raise SchemaError(f"Feature columns of {path} are not in canonical order.")

    vectors: List[FeatureVector] = []
    for row_number, row in loader.iter_rows():
        try:
            values = np.array([float(row[name]) for name in FEATURE_NAMES])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: row {row_number}: {exc}") from exc
        label = (row.get(LABEL_COLUMN) or "").strip() or None
        ref_text = (row.get(CHUNK_COLUMN) or "").strip()
        vectors.append(FeatureVector(values, label, ChunkRef.parse(ref_text) if ref_text else None))
    return vectors
