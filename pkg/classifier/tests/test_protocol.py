import numpy as np
import pytest

from annotation.records import ChunkRef, TimeInterval
from classifier.features.functionals import N_FEATURES, FeatureVector
from classifier.normalization import NormMode
from classifier.protocol import DEFAULT_GRIDS, TestProbeLedger, check_disjoint, grid_search, refit_and_test
from pipeline.exceptions import NumericalError, PreconditionError, ProtocolError

LABELS = ("chirp", "tone", "burst")


def _vectors(n_per_class, source_id, offset_s=0.0, seed=0, labels=LABELS):
    rng = np.random.default_rng(seed)
    centers = np.random.default_rng(99).standard_normal((len(labels), N_FEATURES))
    vectors, begin = [], offset_s
    for index, label in enumerate(labels):
        for _ in range(n_per_class):
            ref = ChunkRef(source_id, TimeInterval(begin, begin + 0.5))
            values = 2.0 * centers[index] + rng.standard_normal(N_FEATURES)
            vectors.append(FeatureVector(values, label, ref))
            begin += 1.0
    return vectors


def test_grid_search_reports_every_point_and_the_best():
    train = _vectors(6, "s1", seed=1)
    valid = _vectors(3, "s2", seed=2)
    grid = [0.01, 1.0, 100.0]
    best_C, report = grid_search(train, valid, grid, NormMode.ZN_L2)

    assert [point.C for point in report.points] == grid
    assert best_C in grid
    assert report.best.uar == max(point.uar for point in report.points)
    assert report.best.uar == pytest.approx(1.0)


def test_grid_search_ties_go_to_the_smallest_C():
    train = _vectors(6, "s1", seed=1)
    valid = _vectors(3, "s2", seed=2)
    best_C, report = grid_search(train, valid, [1e3, 10.0, 1e5], NormMode.ZN_L2)
    assert all(point.uar == 1.0 for point in report.points)
    assert best_C == 10.0


def test_grid_search_tolerates_a_class_missing_from_validation():
    train = _vectors(6, "s1", seed=1)
    valid = _vectors(3, "s2", seed=2, labels=("chirp", "tone"))
    _, report = grid_search(train, valid, [1.0], NormMode.ZN)
    assert report.missing_classes == ("burst",)


def test_grid_search_rejects_empty_grid_and_unlabelled_vectors():
    train = _vectors(4, "s1")
    valid = _vectors(2, "s2")
    with pytest.raises(PreconditionError):
        grid_search(train, valid, [], NormMode.ZN)
    unlabelled = [vector.with_label(None) for vector in valid]
    with pytest.raises(PreconditionError):
        grid_search(train, unlabelled, [1.0], NormMode.ZN)


def test_overlapping_sets_are_rejected():
    train = _vectors(2, "s1")
    valid = _vectors(2, "s1", offset_s=2.25)
    with pytest.raises(ProtocolError, match="s1"):
        check_disjoint(train=train, valid=valid)
    check_disjoint(train=train, valid=_vectors(2, "s1", offset_s=100.0))


def test_refit_and_test_probes_the_test_set_once(tmp_path):
    train = _vectors(6, "s1", seed=1)
    valid = _vectors(3, "s2", seed=2)
    test = _vectors(3, "s3", seed=3)
    ledger = TestProbeLedger(tmp_path / "probes.tsv")

    report = refit_and_test(train, valid, test, 1.0, NormMode.ZN_L2, task="3class", ledger=ledger)
    assert report.uar == pytest.approx(1.0)
    assert report.confusion.total == len(test)
    assert report.model.train_matrix.shape[0] == len(train) + len(valid)

    with pytest.raises(ProtocolError):
        refit_and_test(train, valid, test, 1.0, NormMode.ZN_L2, task="3class", ledger=ledger)
    reopened = TestProbeLedger(tmp_path / "probes.tsv")
    assert reopened.probed("3class", NormMode.ZN_L2)
    assert not reopened.probed("3class", NormMode.ZN)


def _low_rank_vectors(n, rank, labels, source_id, seed):
    shared = np.random.default_rng(42)
    basis = shared.standard_normal((rank, N_FEATURES))
    centers = 3.0 * shared.standard_normal((len(labels), rank))
    rng = np.random.default_rng(seed)
    vectors = []
    for i in range(n):
        index = i % len(labels)
        values = (centers[index] + rng.standard_normal(rank)) @ basis
        vectors.append(FeatureVector(values, labels[index], ChunkRef(source_id, TimeInterval(i, i + 0.5))))
    return vectors


def test_default_grid_survives_rank_deficient_training_data():
    labels = ("burst", "chirp", "tone", "trill")
    train = _low_rank_vectors(200, 60, labels, "s1", seed=11)
    valid = _low_rank_vectors(40, 60, labels, "s2", seed=12)

    best_C, report = grid_search(train, valid, None, NormMode.ZN_L2)
    evaluated = [point.C for point in report.points]
    assert sorted(evaluated + list(report.skipped)) == DEFAULT_GRIDS[NormMode.ZN_L2]
    assert best_C in evaluated
    assert report.best.uar >= 0.95


def test_grid_search_skips_a_C_that_fails_to_solve(monkeypatch):
    import classifier.protocol as protocol

    real_solve = protocol.solve_kelm

    def failing_at_large_C(kernel, targets, C):
        if C > 100.0:
            raise NumericalError(f"Solve residual too large at C={C:g}")
        return real_solve(kernel, targets, C)

    monkeypatch.setattr(protocol, "solve_kelm", failing_at_large_C)
    train = _vectors(6, "s1", seed=1)
    valid = _vectors(3, "s2", seed=2)
    best_C, report = grid_search(train, valid, [1.0, 1e3, 1e6], NormMode.ZN_L2)
    assert [point.C for point in report.points] == [1.0]
    assert report.skipped == (1e3, 1e6)
    assert best_C == 1.0

    with pytest.raises(NumericalError, match="Every C"):
        grid_search(train, valid, [1e3], NormMode.ZN_L2)


def test_grid_search_names_the_split_with_unseen_classes():
    train = _vectors(4, "s1", seed=1, labels=("chirp", "tone"))
    valid = _vectors(2, "s2", seed=2)
    with pytest.raises(ProtocolError, match="validation split.*burst"):
        grid_search(train, valid, [1.0], NormMode.ZN)


def test_grid_search_separates_four_class_blobs():
    labels = ("burst", "chirp", "tone", "trill")
    train = _vectors(15, "s1", seed=4, labels=labels)
    valid = _vectors(10, "s2", seed=5, labels=labels)
    for norm_mode in NormMode:
        _, report = grid_search(train, valid, None, norm_mode)
        assert report.best.uar >= 0.95
