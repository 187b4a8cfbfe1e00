import numpy as np
import pytest

from lcqhnn.dataclass import ConfusionMatrix, EpochMetrics, HeadKind, RunRecord
from lcqhnn.metrics import (
    accuracy,
    confusion,
    confusion_from_predictions,
    convergence_epoch,
    convergence_improvement,
    predict,
)
from lcqhnn.models import ModelSpec, init_model


def test_accuracy_all_correct():
    assert accuracy([0, 1, 1], [0, 1, 1]) == 100.0


def test_accuracy_rejects_bad_input():
    with pytest.raises(ValueError):
        accuracy([], [])
    with pytest.raises(ValueError):
        accuracy([0, 1], [0])


def test_fashion_confusion_counts():
    # 7 false positives, 3 false negatives out of 1024
    matrix = ConfusionMatrix(tp=509, tn=505, fp=7, fn=3)
    assert matrix.total == 1024
    assert round(matrix.accuracy, 2) == 99.02


def test_cifar_confusion_counts():
    matrix = ConfusionMatrix(tp=433, tn=443, fp=69, fn=79)
    assert round(matrix.accuracy, 2) == 85.55
    assert matrix.accuracy == pytest.approx(100 * 876 / 1024)


@pytest.mark.parametrize("ea,eb,expected", [(5, 17, 70.59), (6, 24, 75.0), (9, 9, 0.0)])
def test_convergence_improvement(ea, eb, expected):
    assert round(convergence_improvement(ea, eb), 2) == expected


def test_convergence_improvement_sign():
    assert convergence_improvement(10, 5) < 0
    for ea, eb in [(1, 2), (3, 7), (7, 3), (4, 4)]:
        assert (convergence_improvement(ea, eb) > 0) == (ea < eb)
    with pytest.raises(ValueError):
        convergence_improvement(0, 5)
    with pytest.raises(ValueError):
        convergence_improvement(5, -1)


def _record(val_accs):
    record = RunRecord(config={})
    for i, v in enumerate(val_accs, start=1):
        record.add_epoch(EpochMetrics(i, 0.5, 50.0, v), 0.0)
    return record


def test_convergence_epoch():
    assert convergence_epoch(_record([80, 95, 99]), 90) == 2
    assert convergence_epoch(_record([80, 85]), 90) is None
    assert convergence_epoch(_record([99.0]), 99.0) == 1
    with pytest.raises(ValueError):
        convergence_epoch(_record([80]), 0)


def test_confusion_of_perfect_and_constant_predictors():
    labels = np.array([0] * 512 + [1] * 512)
    assert confusion_from_predictions(labels, labels) == ConfusionMatrix(tp=512, tn=512, fp=0, fn=0)
    assert confusion_from_predictions(np.zeros(1024), labels) == ConfusionMatrix(tp=0, tn=512, fp=0, fn=512)


def test_accuracy_equals_confusion_accuracy(rng):
    labels = rng.integers(0, 2, size=300)
    preds = rng.integers(0, 2, size=300)
    matrix = confusion_from_predictions(preds, labels)
    assert matrix.total == 300
    assert matrix.accuracy == accuracy(preds, labels)


def test_predict_breaks_ties_toward_class_zero(rng):
    model = init_model(ModelSpec(HeadKind.CNN8), seed=0)
    params = dict(model.params)
    params["head.fc2.weight"] = np.zeros((2, 2))
    params["head.fc2.bias"] = np.zeros(2)
    model.set_params(params)
    np.testing.assert_array_equal(predict(model, rng.random((5, 1, 28, 28))), np.zeros(5))


def test_confusion_on_split_sums_to_split_size(tiny_split):
    model = init_model(ModelSpec(HeadKind.LCQHNN), seed=0)
    matrix = confusion(model, tiny_split.test)
    assert matrix.total == len(tiny_split.test)
    assert matrix.accuracy == accuracy(predict(model, tiny_split.test.pixels), tiny_split.test.labels)


def test_confusion_matrix_validation_and_dict():
    with pytest.raises(ValueError):
        ConfusionMatrix(tp=-1)
    with pytest.raises(ValueError):
        ConfusionMatrix().accuracy
    matrix = ConfusionMatrix(1, 2, 3, 4)
    assert ConfusionMatrix.from_dict(matrix.to_dict()) == matrix
