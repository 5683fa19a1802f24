"""Kernel extreme learning machine with a linear kernel.

Training solves ``(I/C + K) beta = T`` by Cholesky factorisation, where ``K``
is the Gram matrix of the normalised training vectors and ``T`` holds +1 for
the true class and -1 elsewhere. Scores for new vectors are
``gram(x, train) @ beta``.

Model file layout (little-endian)::

    4s   magic b"KELM"
    H    format version (1)
    H    flags (bit 0: L2 normalisation)
    d    C
    I    L (labels), I N (training rows), I D (features)
    L x (H byte length + UTF-8 label)
    D x d  mean,  D x d  std
    N*D x d  training matrix (row-major)
    N*L x d  beta (row-major)
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from sklearn.metrics.pairwise import linear_kernel

from classifier.features.functionals import FeatureVector
from classifier.normalization import NormStats, apply_norm, as_matrix
from pipeline.exceptions import LabelError, NumericalError, PreconditionError, SchemaError, ShapeError
from pipeline.utils.atomic import atomic_write

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"KELM"
MODEL_VERSION = 1
FLAG_L2 = 0x1
RESIDUAL_TOLERANCE = 1e-8
JITTER_SCALE = 1e-10
REFINEMENT_STEPS = 2

_HEADER = struct.Struct("<4sHHdIII")
_LABEL_LENGTH = struct.Struct("<H")


@dataclass(frozen=True, eq=False)
class KelmModel:
    train_matrix: np.ndarray
    beta: np.ndarray
    C: float
    norm: NormStats
    labels: Tuple[str, ...]

    def __post_init__(self) -> None:
        if self.beta.shape != (self.train_matrix.shape[0], len(self.labels)):
            raise ShapeError(
                f"beta has shape {self.beta.shape}; expected ({self.train_matrix.shape[0]}, {len(self.labels)})."
            )
        if self.train_matrix.shape[1] != self.norm.dims:
            raise ShapeError("Training matrix width does not match the normalisation statistics.")
        if self.C <= 0:
            raise PreconditionError(f"C must be positive, got {self.C}.")


def gram(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Linear kernel ``K[i, j] = <a_i, b_j>``."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"Kernel operands have {a.shape[1]} and {b.shape[1]} features.")
    return linear_kernel(a, b)


def target_matrix(labels: Sequence[str], label_order: Sequence[str]) -> np.ndarray:
    position = {label: i for i, label in enumerate(label_order)}
    unknown = sorted({label for label in labels if label not in position})
    if unknown:
        raise LabelError(f"Training label(s) outside the label order: {', '.join(unknown)}")
    targets = -np.ones((len(labels), len(label_order)))
    targets[np.arange(len(labels)), [position[label] for label in labels]] = 1.0
    return targets


def _residual(system: np.ndarray, beta: np.ndarray, targets: np.ndarray) -> float:
    return float(np.max(np.abs(system @ beta - targets)))


def solve_kelm(kernel: np.ndarray, targets: np.ndarray, C: float) -> np.ndarray:
    """Solve ``(I/C + K) beta = T``; one diagonal-jitter retry before giving up."""
    if C <= 0:
        raise PreconditionError(f"C must be positive, got {C}.")
    n = kernel.shape[0]
    system = kernel + np.eye(n) / C
    try:
        factor = cho_factor(system, lower=True, check_finite=True)
    except (LinAlgError, ValueError):
        jitter = JITTER_SCALE * np.trace(kernel) / n
        logger.warning("Cholesky factorisation failed at C=%g; retrying with jitter %g.", C, jitter)
        system = system + jitter * np.eye(n)
        try:
            factor = cho_factor(system, lower=True, check_finite=True)
        except (LinAlgError, ValueError) as exc:
            raise NumericalError(
                f"Kernel system is not positive definite at C={C:g}; use a smaller C (larger 1/C)."
            ) from exc

    beta = cho_solve(factor, targets)
    for _ in range(REFINEMENT_STEPS):
        beta = beta + cho_solve(factor, targets - system @ beta)

    tolerance = RESIDUAL_TOLERANCE * max(1.0, float(np.max(np.abs(targets))))
    residual = _residual(system, beta, targets)
    if not residual <= tolerance:
        raise NumericalError(
            f"Solve residual {residual:.3e} exceeds {tolerance:.1e} at C={C:g}; use a smaller C."
        )
    return beta


def train_kelm(
    train: np.ndarray,
    labels: Sequence[str],
    C: float,
    norm: NormStats,
    label_order: Optional[Sequence[str]] = None,
    kernel: Optional[np.ndarray] = None,
) -> KelmModel:
    """Fit on an already normalised ``N x D`` matrix.

    ``kernel`` may carry a precomputed ``gram(train, train)``.
    """
    train = np.atleast_2d(np.asarray(train, dtype=np.float64))
    label_order = tuple(label_order) if label_order is not None else tuple(sorted(set(labels)))
    if len(labels) != train.shape[0]:
        raise ShapeError(f"{train.shape[0]} training rows but {len(labels)} labels.")
    if len(label_order) < 2:
        raise PreconditionError("At least two classes are needed to train.")
    if train.shape[0] < len(label_order):
        raise PreconditionError(f"{train.shape[0]} training rows cannot cover {len(label_order)} classes.")

    kernel = gram(train, train) if kernel is None else kernel
    beta = solve_kelm(kernel, target_matrix(labels, label_order), C)
    return KelmModel(train_matrix=train, beta=beta, C=float(C), norm=norm, labels=label_order)


def predict_batch(model: KelmModel, x: np.ndarray) -> Tuple[np.ndarray, List[str]]:
    """Scores (M x L) and argmax labels for normalised rows; ties go to the first class."""
    scores = gram(x, model.train_matrix) @ model.beta
    return scores, [model.labels[i] for i in np.argmax(scores, axis=1)]


def predict(model: KelmModel, x: np.ndarray) -> Tuple[np.ndarray, str]:
    scores, labels = predict_batch(model, np.atleast_2d(x))
    return scores[0], labels[0]


def classify(model: KelmModel, vectors: Sequence[FeatureVector]) -> List[str]:
    """Normalise raw feature vectors with the model's statistics, then predict."""
    if not vectors:
        return []
    _, labels = predict_batch(model, apply_norm(as_matrix(vectors), model.norm))
    return labels


def save_model(model: KelmModel, path: Path) -> None:
    n_rows, n_dims = model.train_matrix.shape
    flags = FLAG_L2 if model.norm.apply_l2 else 0
    with atomic_write(Path(path), "wb", encoding=None) as handle:
        handle.write(_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, flags, model.C, len(model.labels), n_rows, n_dims))
        for label in model.labels:
            encoded = label.encode("utf-8")
            handle.write(_LABEL_LENGTH.pack(len(encoded)))
            handle.write(encoded)
        for array in (model.norm.mean, model.norm.std, model.train_matrix, model.beta):
            handle.write(np.ascontiguousarray(array, dtype="<f8").tobytes())
    logger.info("Saved model (%s classes, %s rows, C=%g) to %s", len(model.labels), n_rows, model.C, path)


def _take(buffer: memoryview, offset: int, size: int, path: Path) -> Tuple[memoryview, int]:
    if offset + size > len(buffer):
        raise SchemaError(f"Model file {path} is truncated.")
    return buffer[offset:offset + size], offset + size


def load_model(path: Path) -> KelmModel:
    path = Path(path)
    buffer = memoryview(path.read_bytes())
    header, offset = _take(buffer, 0, _HEADER.size, path)
    magic, version, flags, C, n_labels, n_rows, n_dims = _HEADER.unpack(header)
    if magic != MODEL_MAGIC:
        raise SchemaError(f"{path} is not a model file.")
    if version != MODEL_VERSION:
        raise SchemaError(f"{path}: unsupported model format version {version}.")

    labels = []
    for _ in range(n_labels):
        raw, offset = _take(buffer, offset, _LABEL_LENGTH.size, path)
        (length,) = _LABEL_LENGTH.unpack(raw)
        raw, offset = _take(buffer, offset, length, path)
        labels.append(bytes(raw).decode("utf-8"))

    arrays = []
    for count in (n_dims, n_dims, n_rows * n_dims, n_rows * n_labels):
        raw, offset = _take(buffer, offset, 8 * count, path)
        arrays.append(np.frombuffer(raw, dtype="<f8").astype(np.float64))
    if offset != len(buffer):
        raise SchemaError(f"{path} has {len(buffer) - offset} trailing bytes.")

    mean, std, train, beta = arrays
    norm = NormStats(mean, std, bool(flags & FLAG_L2))
    return KelmModel(
        train_matrix=train.reshape(n_rows, n_dims),
        beta=beta.reshape(n_rows, n_labels),
        C=C,
        norm=norm,
        labels=tuple(labels),
    )
