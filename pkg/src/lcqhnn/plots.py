"""PNG figures for training runs, baseline comparisons and Bloch diagnostics.

Figures are built on ``matplotlib.figure.Figure`` directly rather than pyplot,
so the comparison workers can render from their own threads. Every function
returns encoded PNG bytes; the caller writes them with a provenance sidecar.
"""

from __future__ import annotations

import io
import logging
from typing import Dict, Mapping, Sequence, Tuple

import numpy as np
from matplotlib.figure import Figure

from lcqhnn.dataclass import ConfusionMatrix, HeadKind, RunRecord
from lcqhnn.qsim import BlochVector

logger = logging.getLogger(__name__)

DPI = 100
CONFUSION_CMAP = "Blues"
STAGE_COLORS = {"psi2": "tab:blue", "psi4": "tab:red"}
SPHERE_SEGMENTS = 25

BlochRow = Tuple[int, int, str, BlochVector]


def figure_png(fig: Figure) -> bytes:
    """Encode a figure as PNG bytes."""
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=DPI)
    return buf.getvalue()


def plot_training_curves(record: RunRecord, title: str) -> bytes:
    """Accuracy (train and validation) and training loss per epoch, side by side."""
    epochs = [row.epoch for row in record.epochs]
    fig = Figure(figsize=(10, 4))
    ax_acc, ax_loss = fig.subplots(1, 2)

    ax_acc.plot(epochs, [row.train_acc for row in record.epochs], marker=".", label="train")
    ax_acc.plot(epochs, record.val_accuracies, marker=".", label="validation")
    if record.convergence_threshold is not None:
        ax_acc.axhline(record.convergence_threshold, color="gray", linestyle="--", linewidth=1,
                       label=f"threshold {record.convergence_threshold:g}%")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy (%)")
    ax_acc.legend(loc="lower right")

    ax_loss.plot(epochs, [row.train_loss for row in record.epochs], marker=".", color="tab:green")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("training loss")

    fig.suptitle(title)
    fig.tight_layout()
    return figure_png(fig)


def plot_accuracy_comparison(records: Mapping[HeadKind, RunRecord], title: str) -> bytes:
    """Validation accuracy per epoch for every model of a comparison."""
    fig = Figure(figsize=(7, 4.5))
    ax = fig.subplots()
    for kind in HeadKind:
        record = records.get(kind)
        if record is None:
            continue
        ax.plot([row.epoch for row in record.epochs], record.val_accuracies, label=kind.value)
    ax.set_xlabel("epoch")
    ax.set_ylabel("validation accuracy (%)")
    ax.set_title(title)
    ax.legend(loc="lower right")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return figure_png(fig)


def confusion_grid(matrix: ConfusionMatrix) -> np.ndarray:
    """Counts laid out with true class by row and predicted class by column."""
    return np.array([[matrix.tn, matrix.fp], [matrix.fn, matrix.tp]], dtype=np.int64)


def plot_confusion(matrix: ConfusionMatrix, title: str) -> bytes:
    """2x2 confusion heatmap annotated with the counts."""
    grid = confusion_grid(matrix)
    fig = Figure(figsize=(4, 4))
    ax = fig.subplots()
    image = ax.imshow(grid, cmap=CONFUSION_CMAP, vmin=0)
    threshold = grid.max() / 2.0
    for (row, col), count in np.ndenumerate(grid):
        ax.text(col, row, str(count), ha="center", va="center",
                color="white" if count > threshold else "black")
    ax.set_xticks([0, 1])
    ax.set_yticks([0, 1])
    ax.set_xlabel("predicted class")
    ax.set_ylabel("true class")
    ax.set_title(title)
    fig.colorbar(image, ax=ax, fraction=0.046)
    fig.tight_layout()
    return figure_png(fig)


def _draw_sphere(ax) -> None:
    u = np.linspace(0.0, 2.0 * np.pi, SPHERE_SEGMENTS)
    v = np.linspace(0.0, np.pi, SPHERE_SEGMENTS)
    x = np.outer(np.cos(u), np.sin(v))
    y = np.outer(np.sin(u), np.sin(v))
    z = np.outer(np.ones_like(u), np.cos(v))
    ax.plot_wireframe(x, y, z, rstride=4, cstride=4, color="gray", alpha=0.2, linewidth=0.5)
    ax.plot(np.cos(u), np.sin(u), zs=0, zdir="z", color="gray", linewidth=0.8)
    ax.set_xlim(-1, 1)
    ax.set_ylim(-1, 1)
    ax.set_zlim(-1, 1)
    ax.set_box_aspect((1, 1, 1))
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_zlabel("z")


def group_bloch_rows(rows: Sequence[BlochRow]) -> Dict[int, Dict[str, np.ndarray]]:
    """Coordinates grouped by qubit then stage, as (points, 3) arrays."""
    grouped: Dict[int, Dict[str, list]] = {}
    for _, qubit, stage, vector in rows:
        grouped.setdefault(qubit, {}).setdefault(stage, []).append(vector.as_tuple())
    return {q: {s: np.array(pts, dtype=np.float64) for s, pts in stages.items()} for q, stages in grouped.items()}


def plot_bloch(rows: Sequence[BlochRow], title: str) -> bytes:
    """One Bloch sphere per qubit with every point coloured by circuit stage."""
    grouped = group_bloch_rows(rows)
    qubits = sorted(grouped)
    fig = Figure(figsize=(4 * max(len(qubits), 1), 4.4))
    for i, qubit in enumerate(qubits, start=1):
        ax = fig.add_subplot(1, len(qubits), i, projection="3d")
        _draw_sphere(ax)
        for stage, points in grouped[qubit].items():
            ax.scatter(points[:, 0], points[:, 1], points[:, 2], s=18, depthshade=False,
                       color=STAGE_COLORS.get(stage, "black"), label=stage)
        ax.set_title(f"qubit {qubit}")
        if i == 1:
            ax.legend(loc="upper left")
    fig.suptitle(title)
    logger.debug("Bloch figure with %d qubits and %d points", len(qubits), len(rows))
    return figure_png(fig)
