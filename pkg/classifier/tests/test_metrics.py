import numpy as np
import pytest

from classifier.evaluation.metrics import ConfusionMatrix, accuracy, confusion, uar
from pipeline.exceptions import LabelError, PreconditionError, ShapeError, UndefinedClassError


def test_two_class_example():
    cm = ConfusionMatrix(np.array([[8, 2], [4, 6]]), ("a", "b"))
    assert uar(cm) == pytest.approx(0.7)
    assert accuracy(cm) == pytest.approx(0.7)
    assert cm.recalls() == pytest.approx([0.8, 0.6])


def test_uar_differs_from_accuracy_on_imbalanced_data():
    cm = ConfusionMatrix(np.array([[90, 0], [10, 0]]), ("majority", "minority"))
    assert accuracy(cm) == pytest.approx(0.9)
    assert uar(cm) == pytest.approx(0.5)


@pytest.mark.parametrize("n_classes", [4, 5])
def test_constant_prediction_scores_chance_uar(n_classes):
    labels = [f"c{i}" for i in range(n_classes)]
    truth = [label for label in labels for _ in range(7)]
    cm = confusion(truth, [labels[0]] * len(truth), labels)
    assert uar(cm) == pytest.approx(1.0 / n_classes)


def test_confusion_rows_are_truth_columns_are_predictions():
    cm = confusion(["a", "a", "b"], ["b", "a", "b"], ["a", "b"])
    assert cm.counts.tolist() == [[1, 1], [0, 1]]
    assert cm.as_rows() == [["a", 1, 1], ["b", 0, 1]]


def test_confusion_rejects_unknown_labels_and_length_mismatch():
    with pytest.raises(LabelError):
        confusion(["a"], ["z"], ["a", "b"])
    with pytest.raises(ShapeError):
        confusion(["a", "b"], ["a"], ["a", "b"])


def test_class_without_items_is_undefined_unless_skipped():
    cm = confusion(["a", "a"], ["a", "b"], ["a", "b"])
    with pytest.raises(UndefinedClassError) as excinfo:
        uar(cm)
    assert excinfo.value.label == "b"
    assert uar(cm, skip_empty=True) == pytest.approx(0.5)
    assert np.isnan(cm.recalls()[1])


def test_empty_confusion_matrix():
    cm = confusion([], [], ["a", "b"])
    assert cm.total == 0
    with pytest.raises(PreconditionError):
        accuracy(cm)
    with pytest.raises(PreconditionError):
        uar(cm, skip_empty=True)


def test_uar_ignores_class_order():
    rng = np.random.default_rng(0)
    labels = ("a", "b", "c", "d")
    truth = list(rng.choice(labels, 80))
    pred = list(rng.choice(labels, 80))
    reference = uar(confusion(truth, pred, labels))
    for _ in range(5):
        order = tuple(rng.permutation(labels))
        assert uar(confusion(truth, pred, order)) == pytest.approx(reference, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_accuracy_equals_uar_on_balanced_matrices(seed):
    rng = np.random.default_rng(seed)
    n_classes = int(rng.integers(2, 6))
    counts = np.vstack([rng.multinomial(30, rng.dirichlet(np.ones(n_classes))) for _ in range(n_classes)])
    cm = ConfusionMatrix(counts, tuple(f"c{i}" for i in range(n_classes)))
    assert np.all(cm.support == cm.support[0])
    assert accuracy(cm) == pytest.approx(uar(cm), abs=1e-12)
