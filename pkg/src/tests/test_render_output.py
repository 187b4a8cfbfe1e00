import io
import json

import numpy as np
import pytest
from PIL import Image

from lcqhnn.config import RunConfig
from lcqhnn.dataclass import ConfusionMatrix, EpochMetrics, HeadKind, RunRecord
from lcqhnn.errors import DataError, DataFormatError, ShapeError
from lcqhnn.qsim import BlochVector
from lcqhnn.render_output import (
    _is_alignment_row,
    comparison_path,
    comparison_plot_path,
    extract_markdown_tables,
    format_bloch_csv,
    format_metrics_csv,
    gradcam_paths,
    parse_markdown_table,
    parse_metrics_csv,
    pgm_bytes,
    png_bytes,
    provenance,
    read_comparison,
    read_summary,
    render_comparison_markdown,
    run_artifact,
    sidecar_path,
    summary_dict,
    write_json,
    write_with_provenance,
)


def _record(convergence_epoch, final=97.5, snapshots=None):
    record = RunRecord(config={"dataset": "mnist"})
    record.add_epoch(EpochMetrics(1, 0.693147, 50.0, 51.5), 1.0)
    record.add_epoch(EpochMetrics(2, 0.25, 90.125, 99.0), 1.0)
    record.snapshot_test_accuracy = snapshots or {10: final - 1.0, 50: final}
    record.test_accuracy = final
    record.confusion = ConfusionMatrix(tp=500, tn=498, fp=14, fn=12)
    record.convergence_epoch = convergence_epoch
    record.convergence_threshold = 99.0
    return record


def test_artifact_names(tmp_path):
    assert run_artifact(tmp_path, "mnist_lcqhnn_seed42", "metrics").name == "mnist_lcqhnn_seed42_metrics.csv"
    assert run_artifact(tmp_path, "mnist_lcqhnn_seed42", "summary").name == "mnist_lcqhnn_seed42_summary.json"
    assert run_artifact(tmp_path, "mnist_lcqhnn_seed42", "checkpoint").name == "mnist_lcqhnn_seed42.ckpt"
    assert run_artifact(tmp_path, "r", "checkpoint", epoch=25).name == "r_epoch25.ckpt"
    assert comparison_path(tmp_path, "fashion", 7).name == "fashion_seed7_comparison.md"
    assert comparison_plot_path(tmp_path, "fashion", 7).name == "fashion_seed7_accuracy.png"
    assert run_artifact(tmp_path, "r", "curves").name == "r_curves.png"
    assert run_artifact(tmp_path, "r", "confusion_plot").name == "r_confusion.png"
    pgm, png = gradcam_paths(tmp_path, "mnist", 3, "untrained")
    assert (pgm.parent.name, pgm.name, png.name) == ("gradcam", "mnist_3_untrained.pgm", "mnist_3_untrained.png")


def test_metrics_csv_exact_text():
    text = format_metrics_csv(_record(2))
    assert text == (
        "epoch,train_loss,train_acc,val_acc\n"
        "1,0.693147,50.000000,51.500000\n"
        "2,0.250000,90.125000,99.000000\n"
    )
    rows = parse_metrics_csv(text)
    assert rows[1] == {"epoch": 2, "train_loss": 0.25, "train_acc": 90.125, "val_acc": 99.0}


def test_metrics_csv_header_checked():
    with pytest.raises(DataFormatError):
        parse_metrics_csv("epoch,loss\n1,0.5\n")


def test_provenance_sidecar(tmp_path):
    config = RunConfig(seed=9)
    prov = provenance(config, "train", note="x")
    assert prov["seed"] == 9 and prov["command"] == "train" and prov["note"] == "x"
    assert prov["config"]["seed"] == 9
    out = write_with_provenance(tmp_path / "a.csv", "epoch\n", prov)
    assert out.read_text() == "epoch\n"
    side = sidecar_path(out)
    assert side.name == "a.csv.provenance.json"
    assert json.loads(side.read_text()) == prov


def test_summary_round_trip(tmp_path):
    record = _record(2)
    prov = provenance(RunConfig(), "train")
    path = write_json(tmp_path / "s.json", summary_dict(record, prov), prov)
    loaded = read_summary(path)
    assert loaded.test_accuracy == record.test_accuracy
    assert loaded.confusion == record.confusion
    assert loaded.snapshot_test_accuracy == record.snapshot_test_accuracy
    assert [r.to_dict() for r in loaded.epochs] == [r.to_dict() for r in record.epochs]


def test_read_summary_errors(tmp_path):
    with pytest.raises(DataError):
        read_summary(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(DataFormatError):
        read_summary(bad)


def test_comparison_round_trip(tmp_path):
    records = {
        HeadKind.LCQHNN: _record(5, 99.6),
        HeadKind.CNN4: _record(17, 94.0),
        HeadKind.CNN8: _record(None, 97.0),
        HeadKind.CNN16: _record(6, 98.0),
    }
    prov = provenance(RunConfig(dataset="fashion"), "compare")
    weights = {HeadKind.LCQHNN: 12, HeadKind.CNN4: 6, HeadKind.CNN8: 12, HeadKind.CNN16: 24}
    text = render_comparison_markdown(records, (10, 25, 50), prov, weights)
    path = tmp_path / "cmp.md"
    path.write_text(text)

    loaded_prov, accuracy_rows, q_rows = read_comparison(path)
    assert loaded_prov == prov
    assert [row["model"] for row in accuracy_rows] == ["lcqhnn", "cnn4", "cnn8", "cnn16"]
    assert accuracy_rows[0]["final"] == "99.60"
    assert accuracy_rows[0]["epoch 25"] == "n/a"
    assert accuracy_rows[2]["convergence epoch"] == "n/a"
    assert accuracy_rows[3]["head weights"] == "24"

    assert len(q_rows) == 6
    pairs = {(row["A"], row["B"]): row["Q_AB"] for row in q_rows}
    assert pairs[("lcqhnn", "cnn4")] == "70.59"
    assert pairs[("lcqhnn", "cnn16")] == "16.67"
    assert pairs[("lcqhnn", "cnn8")] == "n/a"


def test_read_comparison_needs_two_tables(tmp_path):
    path = tmp_path / "one.md"
    path.write_text("| a | b |\n|---|---|\n| 1 | 2 |\n")
    with pytest.raises(DataFormatError):
        read_comparison(path)
    with pytest.raises(DataError):
        read_comparison(tmp_path / "none.md")


def test_alignment_rows():
    assert _is_alignment_row("|---|---|")
    assert _is_alignment_row("| :--- | ---: |")
    assert not _is_alignment_row("| a | b |")
    assert not _is_alignment_row("| |")
    assert not _is_alignment_row("")


def test_table_extraction_skips_prose():
    text = "intro | not a table\n\n| x | y |\n|:-:|---|\n| 1 | 2 |\n| 3 | 4 |\ntrailing\n\n| z |\n|---|\n| 5 |\n"
    tables = extract_markdown_tables(text)
    assert len(tables) == 2
    assert parse_markdown_table(tables[0]) == [{"x": "1", "y": "2"}, {"x": "3", "y": "4"}]
    assert parse_markdown_table(tables[1]) == [{"z": "5"}]


def test_bloch_csv():
    text = format_bloch_csv([(0, "encoded", BlochVector(1.0, 0.0, 0.0))])
    assert text.splitlines() == ["qubit,stage,x,y,z", "0,encoded,1.000000000000,0.000000000000,0.000000000000"]


def test_pgm_and_png_bytes():
    gray = np.arange(6, dtype=np.uint8).reshape(2, 3)
    pgm = pgm_bytes(gray)
    assert pgm.startswith(b"P5")
    np.testing.assert_array_equal(np.asarray(Image.open(io.BytesIO(pgm))), gray)

    rgb = np.zeros((2, 3, 3), dtype=np.uint8)
    rgb[0, 0] = (255, 128, 0)
    png = png_bytes(rgb)
    assert png.startswith(b"\x89PNG\r\n\x1a\n")
    np.testing.assert_array_equal(np.asarray(Image.open(io.BytesIO(png))), rgb)

    with pytest.raises(ShapeError):
        pgm_bytes(rgb)
    with pytest.raises(ShapeError):
        png_bytes(gray)
