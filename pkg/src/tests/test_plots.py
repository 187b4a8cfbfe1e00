import io

import numpy as np
import pytest
from PIL import Image

from lcqhnn.dataclass import ConfusionMatrix, EpochMetrics, HeadKind, RunRecord
from lcqhnn.plots import (
    confusion_grid,
    group_bloch_rows,
    plot_accuracy_comparison,
    plot_bloch,
    plot_confusion,
    plot_training_curves,
)
from lcqhnn.qsim import BlochVector


def _image(png):
    assert png.startswith(b"\x89PNG\r\n\x1a\n")
    return Image.open(io.BytesIO(png))


def _record(val_accs, threshold=99.0):
    record = RunRecord(config={})
    for epoch, val in enumerate(val_accs, start=1):
        record.add_epoch(EpochMetrics(epoch, 1.0 / epoch, val - 1.0, val), 0.0)
    record.confusion = ConfusionMatrix(tp=500, tn=498, fp=14, fn=12)
    record.convergence_threshold = threshold
    return record


def test_training_curves_png():
    image = _image(plot_training_curves(_record([60.0, 90.0, 99.5]), "mnist_lcqhnn_seed42"))
    assert image.size == (1000, 400)


def test_training_curves_without_threshold():
    _image(plot_training_curves(_record([50.0], threshold=None), "single epoch"))


def test_accuracy_comparison_skips_missing_heads():
    records = {HeadKind.LCQHNN: _record([70.0, 95.0]), HeadKind.CNN4: _record([55.0, 80.0])}
    image = _image(plot_accuracy_comparison(records, "fashion, seed 42"))
    assert image.size == (700, 450)


def test_confusion_grid_layout():
    grid = confusion_grid(ConfusionMatrix(tp=4, tn=3, fp=2, fn=1))
    # rows are the true class, columns the predicted class
    np.testing.assert_array_equal(grid, [[3, 2], [1, 4]])


def test_confusion_png():
    image = _image(plot_confusion(ConfusionMatrix(tp=4, tn=3, fp=2, fn=1), "test"))
    assert image.size == (400, 400)


def test_confusion_png_all_zero():
    _image(plot_confusion(ConfusionMatrix(), "empty"))


def _bloch_rows():
    rows = []
    for sample in range(2):
        for stage in ("psi2", "psi4"):
            for qubit in range(4):
                rows.append((sample, qubit, stage, BlochVector(1.0, 0.0, 0.0)))
    return rows


def test_group_bloch_rows():
    grouped = group_bloch_rows(_bloch_rows())
    assert sorted(grouped) == [0, 1, 2, 3]
    assert set(grouped[2]) == {"psi2", "psi4"}
    assert grouped[2]["psi4"].shape == (2, 3)


def test_bloch_png_has_one_panel_per_qubit():
    image = _image(plot_bloch(_bloch_rows(), "sweep"))
    width, height = image.size
    assert width == 1600
    assert height == pytest.approx(440, abs=1)
