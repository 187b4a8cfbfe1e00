"""
Writers and readers for every artifact the command line produces.

- metrics CSV (``epoch,train_loss,train_acc,val_acc``, 6 decimals)
- run summaries and eval reports (JSON)
- provenance sidecars (``<file>.provenance.json``)
- the baseline comparison table (markdown pipe tables with a provenance line)
- Bloch coordinate CSVs
- heatmap PGM (P5) and overlay PNG images
- the names of the PNG figures built in lcqhnn.plots

All files are written atomically.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from itertools import combinations
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image

from lcqhnn import __version__
from lcqhnn.config import RunConfig
from lcqhnn.dataclass import HeadKind, RunRecord
from lcqhnn.errors import DataError, DataFormatError, ShapeError
from lcqhnn.metrics import convergence_improvement
from lcqhnn.qsim import BlochVector
from lcqhnn.utils import atomic_write_bytes, atomic_write_text

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

METRICS_HEADER = ("epoch", "train_loss", "train_acc", "val_acc")
BLOCH_HEADER = ("qubit", "stage", "x", "y", "z")
BLOCH_SWEEP_HEADER = ("sample", "qubit", "stage", "x", "y", "z")
PROVENANCE_SUFFIX = ".provenance.json"
PROVENANCE_PREFIX = "provenance: "

_PIPE_LINE_START = re.compile(r"^\s*\|")
_ALIGN_CELL = re.compile(r"^:?-+:?$")


# ---------- artifact names ----------

_RUN_SUFFIXES = {
    "checkpoint": ".ckpt",
    "metrics": "_metrics.csv",
    "summary": "_summary.json",
    "eval": "_eval.json",
    "curves": "_curves.png",
    "confusion_plot": "_confusion.png",
}


def run_artifact(out_dir: PathLike, run_name: str, kind: str, epoch: Optional[int] = None) -> Path:
    """Path of one run artifact; ``epoch`` selects a stage checkpoint."""
    if epoch is not None:
        return Path(out_dir) / f"{run_name}_epoch{epoch}.ckpt"
    return Path(out_dir) / f"{run_name}{_RUN_SUFFIXES[kind]}"


def comparison_path(out_dir: PathLike, dataset: str, seed: int) -> Path:
    return Path(out_dir) / f"{dataset}_seed{seed}_comparison.md"


def comparison_plot_path(out_dir: PathLike, dataset: str, seed: int) -> Path:
    return Path(out_dir) / f"{dataset}_seed{seed}_accuracy.png"


def gradcam_paths(out_dir: PathLike, dataset: str, index: int, tag: str) -> Tuple[Path, Path]:
    """(PGM, PNG) paths of one Grad-CAM panel; ``tag`` names the training stage."""
    stem = Path(out_dir) / "gradcam" / f"{dataset}_{index}_{tag}"
    return stem.with_suffix(".pgm"), stem.with_suffix(".png")


# ---------- provenance ----------

def provenance(config: RunConfig, command: str, **extra: Any) -> Dict[str, Any]:
    """Full config, seed, command name and package version of one artifact."""
    prov = {"command": command, "seed": config.seed, "version": __version__, "config": config.to_dict()}
    prov.update(extra)
    return prov


def sidecar_path(path: PathLike) -> Path:
    p = Path(path)
    return p.with_name(p.name + PROVENANCE_SUFFIX)


def write_provenance(path: PathLike, prov: Mapping[str, Any]) -> Path:
    return atomic_write_text(sidecar_path(path), _dump_json(prov))


def write_with_provenance(path: PathLike, data: Union[str, bytes], prov: Mapping[str, Any]) -> Path:
    """Atomically write an artifact and its provenance sidecar."""
    out = atomic_write_text(path, data) if isinstance(data, str) else atomic_write_bytes(path, data)
    write_provenance(out, prov)
    logger.info("wrote %s", out)
    return out


def _dump_json(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


# ---------- metrics CSV ----------

def _csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def format_metrics_csv(record: RunRecord) -> str:
    """One row per epoch, fixed 6-decimal formatting."""
    return _csv_text(
        METRICS_HEADER,
        (
            (row.epoch, f"{row.train_loss:.6f}", f"{row.train_acc:.6f}", f"{row.val_acc:.6f}")
            for row in record.epochs
        ),
    )


def parse_metrics_csv(text: str) -> List[Dict[str, float]]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != METRICS_HEADER:
        raise DataFormatError(f"unexpected metrics header {reader.fieldnames}")
    return [{k: (int(v) if k == "epoch" else float(v)) for k, v in row.items()} for row in reader]


# ---------- JSON summaries ----------

def summary_dict(record: RunRecord, prov: Mapping[str, Any]) -> Dict[str, Any]:
    data = record.to_dict()
    data["provenance"] = dict(prov)
    return data


def write_json(path: PathLike, data: Mapping[str, Any], prov: Mapping[str, Any]) -> Path:
    return write_with_provenance(path, _dump_json(data), prov)


def read_summary(path: PathLike) -> RunRecord:
    """Load the run record of a summary JSON written by ``train``."""
    p = Path(path)
    if not p.is_file():
        raise DataError(f"run summary not found: {p}")
    try:
        return RunRecord.from_dict(json.loads(p.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise DataFormatError(f"malformed run summary {p}: {e}") from e


# ---------- comparison table ----------

def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.2f}"


def render_comparison_markdown(
    records: Mapping[HeadKind, RunRecord],
    snapshot_epochs: Sequence[int],
    prov: Mapping[str, Any],
    head_weights: Optional[Mapping[HeadKind, int]] = None,
) -> str:
    """Render the accuracy table and the pairwise convergence-improvement table.

    Rows follow the HeadKind order. Q_AB is reported for every pair (A before B
    in that order); it is "n/a" when either model never reached the threshold.
    """
    kinds = [k for k in HeadKind if k in records]
    dataset = prov.get("config", {}).get("dataset", "")
    lines = [
        f"# Model comparison: {dataset}, seed {prov.get('seed')}",
        "",
        PROVENANCE_PREFIX + json.dumps(prov, sort_keys=True),
        "",
        "## Test accuracy (%)",
        "",
    ]
    header = ["model", "head weights"] + [f"epoch {e}" for e in snapshot_epochs] + [
        "final", "convergence epoch", "threshold",
    ]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "|".join(["---"] * len(header)) + "|")
    for kind in kinds:
        rec = records[kind]
        cells = [kind.value, str(head_weights[kind]) if head_weights else "n/a"]
        cells += [_fmt(rec.snapshot_test_accuracy.get(e)) for e in snapshot_epochs]
        cells += [
            _fmt(rec.test_accuracy),
            "n/a" if rec.convergence_epoch is None else str(rec.convergence_epoch),
            _fmt(rec.convergence_threshold),
        ]
        lines.append("| " + " | ".join(cells) + " |")

    lines += ["", "## Convergence improvement Q_AB (%)", "", "| A | B | Q_AB |", "|---|---|---|"]
    for a, b in combinations(kinds, 2):
        ea, eb = records[a].convergence_epoch, records[b].convergence_epoch
        q = convergence_improvement(ea, eb) if ea is not None and eb is not None else None
        lines.append(f"| {a.value} | {b.value} | {_fmt(q)} |")
    return "\n".join(lines) + "\n"


def _is_alignment_row(line: str) -> bool:
    """True for a markdown alignment row such as ``|:---|---:|``."""
    s = line.strip()
    if not s:
        return False
    parts = s.strip("|").split("|")
    if not parts or all(p.strip() == "" for p in parts):
        return False
    return all(_ALIGN_CELL.fullmatch(cell.strip().replace(" ", "")) for cell in parts)


def extract_markdown_tables(text: str) -> List[str]:
    """Return every pipe table (header, alignment row, body) found in the text, in order."""
    tables: List[str] = []
    lines = text.splitlines()
    i = 0
    while i < len(lines) - 1:
        if _PIPE_LINE_START.match(lines[i]) and _is_alignment_row(lines[i + 1]):
            j = i + 2
            while j < len(lines) and _PIPE_LINE_START.match(lines[j]):
                j += 1
            tables.append("\n".join(lines[i:j]))
            i = j
        else:
            i += 1
    return tables


def parse_markdown_table(table: str) -> List[Dict[str, str]]:
    """Rows of a pipe table as header -> cell dictionaries."""
    lines = table.splitlines()
    header = [c.strip() for c in lines[0].strip().strip("|").split("|")]
    rows = []
    for line in lines[2:]:
        cells = [c.strip() for c in line.strip().strip("|").split("|")]
        rows.append(dict(zip(header, cells)))
    return rows


def read_comparison(path: PathLike) -> Tuple[Dict[str, Any], List[Dict[str, str]], List[Dict[str, str]]]:
    """Parse a comparison file into (provenance, accuracy rows, Q_AB rows)."""
    p = Path(path)
    if not p.is_file():
        raise DataError(f"comparison table not found: {p}")
    text = p.read_text(encoding="utf-8")
    prov: Dict[str, Any] = {}
    for line in text.splitlines():
        if line.startswith(PROVENANCE_PREFIX):
            prov = json.loads(line[len(PROVENANCE_PREFIX):])
            break
    tables = extract_markdown_tables(text)
    if len(tables) != 2:
        raise DataFormatError(f"{p}: expected 2 tables, found {len(tables)}")
    return prov, parse_markdown_table(tables[0]), parse_markdown_table(tables[1])


# ---------- Bloch CSVs ----------

def _coords(v: BlochVector) -> List[str]:
    return [f"{c:.12f}" for c in v.as_tuple()]


def format_bloch_csv(rows: Iterable[Tuple[int, str, BlochVector]]) -> str:
    """Rows of (qubit, stage, vector) as ``qubit,stage,x,y,z``."""
    return _csv_text(BLOCH_HEADER, ([q, stage] + _coords(v) for q, stage, v in rows))


def format_bloch_sweep_csv(rows: Iterable[Tuple[int, int, str, BlochVector]]) -> str:
    """Rows of (sample, qubit, stage, vector) as ``sample,qubit,stage,x,y,z``."""
    return _csv_text(BLOCH_SWEEP_HEADER, ([s, q, stage] + _coords(v) for s, q, stage, v in rows))


# ---------- images ----------

def _image_bytes(array: np.ndarray, fmt: str) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(array, dtype=np.uint8)).save(buf, format=fmt)
    return buf.getvalue()


def pgm_bytes(gray: np.ndarray) -> bytes:
    """8-bit binary PGM (P5) of a 2-D uint8 array.

    Raises:
        ShapeError: If the array is not 2-D
    """
    if gray.ndim != 2:
        raise ShapeError(f"PGM export needs a 2-D array, got shape {gray.shape}")
    return _image_bytes(gray, "PPM")


def png_bytes(rgb: np.ndarray) -> bytes:
    """PNG of an (H, W, 3) uint8 array.

    Raises:
        ShapeError: If the array is not (H, W, 3)
    """
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ShapeError(f"PNG export needs an (H, W, 3) array, got shape {rgb.shape}")
    return _image_bytes(rgb, "PNG")
