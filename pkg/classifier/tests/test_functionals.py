import numpy as np
import pytest

from annotation.records import ChunkRef, TimeInterval
from classifier.features.functionals import (
    FEATURE_NAMES,
    FUNCTIONAL_NAMES,
    N_FEATURES,
    FeatureVector,
    read_feature_csv,
    summarize,
    summarize_batch,
    write_feature_csv,
    zero_crossing_rate,
)
from classifier.features.lld import N_LLD, LldMatrix
from pipeline.exceptions import NumericalError, SchemaError, ShapeError


def _lld_with(column, contour):
    contour = np.asarray(contour, dtype=float)
    values = np.zeros((len(contour), N_LLD))
    values[:, column] = contour
    return LldMatrix(values)


def _functionals(vector, column):
    block = vector.values[column * 10:(column + 1) * 10]
    return dict(zip(FUNCTIONAL_NAMES, block))


def test_feature_layout():
    assert N_FEATURES == 1140
    assert len(FEATURE_NAMES) == 1140
    assert FEATURE_NAMES[0] == "lld0_mean"
    assert FEATURE_NAMES[17 * 10 + 9] == "lld17_zcr"


def test_linear_contour():
    contour = 2.0 + 3.0 * np.linspace(0.0, 1.0, 11)
    stats = _functionals(summarize(_lld_with(7, contour)), 7)
    assert stats["mean"] == pytest.approx(3.5)
    assert stats["slope"] == pytest.approx(3.0)
    assert stats["offset"] == pytest.approx(2.0)
    assert stats["curvature"] == pytest.approx(0.0, abs=1e-9)
    assert stats["min"] == 2.0 and stats["min_relpos"] == 0.0
    assert stats["max"] == pytest.approx(5.0) and stats["max_relpos"] == 1.0
    assert stats["zcr"] == pytest.approx(1.0 / 10)


def test_quadratic_contour_curvature():
    t = np.linspace(0.0, 1.0, 21)
    stats = _functionals(summarize(_lld_with(0, 4.0 * t ** 2 - t + 1.0)), 0)
    assert stats["curvature"] == pytest.approx(4.0)


def test_std_uses_population_divisor():
    contour = np.array([1.0, 2.0, 3.0, 4.0])
    stats = _functionals(summarize(_lld_with(3, contour)), 3)
    assert stats["std"] == pytest.approx(np.sqrt(1.25))


def test_constant_contour_has_no_spread_or_crossings():
    stats = _functionals(summarize(_lld_with(5, np.full(9, -2.0))), 5)
    assert stats["std"] == 0.0
    assert stats["slope"] == pytest.approx(0.0, abs=1e-12)
    assert stats["zcr"] == 0.0


def test_single_frame_chunk():
    stats = _functionals(summarize(_lld_with(1, [0.7])), 1)
    assert stats["mean"] == pytest.approx(0.7)
    assert stats["slope"] == 0.0
    assert stats["offset"] == pytest.approx(0.7)
    assert stats["min_relpos"] == 0.0 and stats["max_relpos"] == 0.0
    assert stats["zcr"] == 0.0


def test_zero_crossing_rate_of_alternating_contour():
    contour = np.array([[1.0], [-1.0], [1.0], [-1.0], [1.0]])
    assert zero_crossing_rate(contour)[0] == pytest.approx(1.0)


def test_zero_crossing_rate_is_taken_after_range_normalisation():
    # Never crosses zero in raw units; crosses the midpoint twice.
    contour = np.array([[10.0], [12.0], [10.0], [10.5]])
    assert zero_crossing_rate(contour)[0] == pytest.approx(2.0 / 3.0)


def test_relative_position_of_first_extremum():
    stats = _functionals(summarize(_lld_with(2, [0.0, 5.0, 5.0, -1.0, -1.0])), 2)
    assert stats["max_relpos"] == pytest.approx(0.25)
    assert stats["min_relpos"] == pytest.approx(0.75)


def test_feature_vector_rejects_wrong_shape_and_nan():
    with pytest.raises(ShapeError):
        FeatureVector(np.zeros(10))
    values = np.zeros(N_FEATURES)
    values[3] = np.nan
    with pytest.raises(NumericalError):
        FeatureVector(values)


def test_feature_csv_preserves_values_labels_and_refs(tmp_path):
    rng = np.random.default_rng(0)
    ref = ChunkRef("rec_1", TimeInterval(0.1, 0.35))
    vectors = [
        FeatureVector(rng.standard_normal(N_FEATURES), "tone", ref),
        FeatureVector(rng.standard_normal(N_FEATURES)),
    ]
    path = tmp_path / "features.csv"
    assert write_feature_csv(vectors, path) == 2

    loaded = read_feature_csv(path)
    assert [v.label for v in loaded] == ["tone", None]
    assert loaded[0].chunk_ref == ref and loaded[1].chunk_ref is None
    assert np.array_equal(loaded[0].values, vectors[0].values)


def test_feature_csv_rejects_reordered_columns(tmp_path):
    path = tmp_path / "features.csv"
    names = list(FEATURE_NAMES)
    names[0], names[1] = names[1], names[0]
    path.write_text(",".join(names + ["label", "chunk_ref"]) + "\n")
    with pytest.raises(SchemaError):
        read_feature_csv(path)


def test_summarize_batch_keeps_order_and_metadata():
    refs = [ChunkRef("rec", TimeInterval(0.0, 1.0)), ChunkRef("rec", TimeInterval(2.0, 3.0))]
    llds = [_lld_with(0, [1.0, 2.0]), _lld_with(0, [5.0, 5.0])]
    vectors = summarize_batch(llds, refs, ["tone", "chirp"])
    assert [v.chunk_ref for v in vectors] == refs
    assert [v.label for v in vectors] == ["tone", "chirp"]
    assert [_functionals(v, 0)["mean"] for v in vectors] == [1.5, 5.0]
    assert [v.label for v in summarize_batch(llds)] == [None, None]
