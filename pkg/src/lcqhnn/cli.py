"""Command line: train, eval, compare, gradcam and bloch.

    run_lcqhnn.py {train|eval|compare|gradcam|bloch} [--dataset ...] [--model ...] [--epochs N]
        [--batch-size N] [--lr F] [--seed N] [--dropout F] [--data-dir P] [--out-dir P] [--config P] [--no-plots]

Flags override values from the optional JSON config file. Exit codes:
0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

import argparse
import asyncio
import json
import logging
import math
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from lcqhnn.config import RunConfig, load_config_file, merge_overrides
from lcqhnn.dataclass import HeadKind, ImageFamily, RunRecord
from lcqhnn.datasets import DatasetSplit, load_binary_split
from lcqhnn.errors import DataError, LcqhnnError, UsageError
from lcqhnn.gradcam import gradcam, heatmap_to_gray, render_overlay
from lcqhnn.metrics import confusion
from lcqhnn.models import Model, ModelSpec, count_parameters, load_model, model_forward, save_model
from lcqhnn.plots import plot_accuracy_comparison, plot_bloch, plot_confusion, plot_training_curves
from lcqhnn.qsim import BlochVector, bloch_array
from lcqhnn.render_output import (
    comparison_path,
    comparison_plot_path,
    format_bloch_csv,
    format_bloch_sweep_csv,
    format_metrics_csv,
    gradcam_paths,
    pgm_bytes,
    png_bytes,
    provenance,
    render_comparison_markdown,
    run_artifact,
    summary_dict,
    write_json,
    write_provenance,
    write_with_provenance,
)
from lcqhnn.trainer import train_model
from lcqhnn.utils import STREAM_SWEEP, configure_logging, make_rng
from lcqhnn.vqc import N_QUBITS, PSI2_STAGE, PSI4_STAGE, vqc_states

logger = logging.getLogger(__name__)

BLOCH_STAGES = (("psi2", PSI2_STAGE), ("psi4", PSI4_STAGE))

# flag dest -> RunConfig field
_OVERRIDES = {
    "dataset": "dataset",
    "model": "model",
    "epochs": "epochs",
    "batch_size": "batch_size",
    "lr": "lr",
    "seed": "seed",
    "dropout": "dropout_rate",
    "data_dir": "data_dir",
    "out_dir": "out_dir",
    "gradient_method": "gradient_method",
    "workers": "workers",
}


class _ArgumentParser(argparse.ArgumentParser):
    """Report usage errors as UsageError instead of exiting with status 2."""

    def error(self, message: str) -> None:
        raise UsageError(f"{self.prog}: {message}")


def _common_flags() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--dataset", help="mnist, fashion or cifar10")
    common.add_argument("--model", help="lcqhnn, cnn4, cnn8 or cnn16")
    common.add_argument("--epochs", type=int)
    common.add_argument("--batch-size", type=int)
    common.add_argument("--lr", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--dropout", type=float)
    common.add_argument("--data-dir")
    common.add_argument("--out-dir")
    common.add_argument("--gradient-method", help="adjoint or parameter_shift")
    common.add_argument("--workers", type=int, help="concurrent trainings in compare")
    common.add_argument("--no-progress", action="store_true", help="hide progress bars")
    common.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("-q", "--quiet", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = _ArgumentParser(prog="lcqhnn", description="Hybrid classical-quantum image classifier experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("train", parents=[common], help="train one model")

    p_eval = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on the test split")
    p_eval.add_argument("--checkpoint", help="defaults to the final checkpoint of the configured run")

    sub.add_parser("compare", parents=[common], help="train lcqhnn and the three CNN baselines")

    p_cam = sub.add_parser("gradcam", parents=[common], help="Grad-CAM heatmaps for test samples")
    p_cam.add_argument("--checkpoints", nargs="*", help="defaults to the run's stage checkpoints")
    p_cam.add_argument("--indices", nargs="*", type=int, default=[], help="test split sample indices")
    p_cam.add_argument("--target-class", type=int, choices=(0, 1), help="defaults to the predicted class")

    p_bloch = sub.add_parser("bloch", parents=[common], help="per-qubit Bloch coordinates after encoding and RY")
    p_bloch.add_argument("--features", nargs=N_QUBITS, type=float, metavar="X", default=[0.0] * N_QUBITS)
    p_bloch.add_argument("--theta", nargs=N_QUBITS, type=float, metavar="T", default=[0.0] * N_QUBITS)
    p_bloch.add_argument("--random", type=int, default=0, metavar="N", help="also sweep N seeded random features")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    base = load_config_file(args.config) if args.config else {}
    overrides: Dict[str, Any] = {field: getattr(args, dest) for dest, field in _OVERRIDES.items()}
    if args.no_progress:
        overrides["progress"] = False
    if args.no_plots:
        overrides["plots"] = False
    return merge_overrides(base, overrides)


def _load_split(config: RunConfig) -> DatasetSplit:
    return load_binary_split(
        config.dataset, config.data_dir, config.seed, (config.train_size, config.val_size, config.test_size)
    )


def _spec(config: RunConfig) -> ModelSpec:
    return ModelSpec.for_dataset(config.model, config.dataset, config.dropout_rate)


def train_and_write(spec: ModelSpec, split: DatasetSplit, config: RunConfig, command: str) -> RunRecord:
    """Train one model and write its checkpoints, metrics CSV, summary and figures."""
    prov = provenance(config, command)
    out_dir, name = config.out_dir, config.run_name

    def write_stage(model: Model, epoch: int) -> None:
        path = save_model(run_artifact(out_dir, name, "checkpoint", epoch=epoch), model, config.dataset, epoch)
        write_provenance(path, prov)

    model, record = train_model(spec, split, config, checkpoint_hook=write_stage)
    final = save_model(run_artifact(out_dir, name, "checkpoint"), model, config.dataset, config.epochs)
    write_provenance(final, prov)
    write_with_provenance(run_artifact(out_dir, name, "metrics"), format_metrics_csv(record), prov)
    write_json(run_artifact(out_dir, name, "summary"), summary_dict(record, prov), prov)
    if config.plots:
        curves = plot_training_curves(record, name)
        write_with_provenance(run_artifact(out_dir, name, "curves"), curves, prov)
        if record.confusion is not None:
            matrix = plot_confusion(record.confusion, f"{name} test")
            write_with_provenance(run_artifact(out_dir, name, "confusion_plot"), matrix, prov)
    return record


def cmd_train(config: RunConfig, args: Optional[argparse.Namespace] = None) -> int:
    record = train_and_write(_spec(config), _load_split(config), config, "train")
    print(
        f"{config.run_name}: test accuracy {record.test_accuracy:.2f}%, "
        f"convergence epoch {record.convergence_epoch} (threshold {record.convergence_threshold:g}%)"
    )
    return 0


def cmd_eval(config: RunConfig, args: Optional[argparse.Namespace] = None) -> int:
    path = getattr(args, "checkpoint", None) or run_artifact(config.out_dir, config.run_name, "checkpoint")
    model, meta = load_model(path)
    if meta["dataset"] != config.dataset.value:
        raise UsageError(f"checkpoint {path} was trained on {meta['dataset']}, not {config.dataset.value}")
    split = _load_split(config)
    matrix = confusion(model, split.test)
    report = {
        "checkpoint": str(path),
        "head_kind": meta["head_kind"],
        "dataset": meta["dataset"],
        "epoch": meta.get("epoch"),
        "test_accuracy": matrix.accuracy,
        "confusion": matrix.to_dict(),
    }
    write_json(run_artifact(config.out_dir, config.run_name, "eval"), report, provenance(config, "eval"))
    print(json.dumps(report, sort_keys=True))
    return 0


async def _compare_async(config: RunConfig, split: DatasetSplit) -> Dict[HeadKind, RunRecord]:
    semaphore = asyncio.Semaphore(config.workers)

    async def run(kind: HeadKind) -> Tuple[HeadKind, RunRecord]:
        async with semaphore:
            run_config = config.replace(model=kind)
            record = await asyncio.to_thread(train_and_write, _spec(run_config), split, run_config, "compare")
            return kind, record

    results = await asyncio.gather(*(run(kind) for kind in HeadKind))
    return dict(results)


def cmd_compare(config: RunConfig, args: Optional[argparse.Namespace] = None) -> int:
    split = _load_split(config)
    records = asyncio.run(_compare_async(config, split))
    prov = provenance(config, "compare")
    prov["config"].pop("model", None)
    weights = {kind: count_parameters(_spec(config.replace(model=kind)), "weights_only_head") for kind in HeadKind}
    text = render_comparison_markdown(records, config.snapshot_epochs, prov, weights)
    path = write_with_provenance(comparison_path(config.out_dir, config.dataset.value, config.seed), text, prov)
    if config.plots:
        title = f"{config.dataset.value}, seed {config.seed}"
        png = plot_accuracy_comparison(records, title)
        write_with_provenance(comparison_plot_path(config.out_dir, config.dataset.value, config.seed), png, prov)
    print(f"comparison written to {path}")
    return 0


def _stage_tag(epoch: Any) -> str:
    return "untrained" if epoch == 0 else f"epoch{epoch}"


def cmd_gradcam(config: RunConfig, args: Optional[argparse.Namespace] = None) -> int:
    if config.dataset.family is not ImageFamily.GRAYSCALE_28:
        raise UsageError("Grad-CAM supports grayscale datasets only (mnist, fashion); cifar10 is not visualized")
    indices: List[int] = list(getattr(args, "indices", None) or [])
    if not indices:
        logger.info("no sample indices given; nothing to write")
        return 0
    checkpoints = getattr(args, "checkpoints", None) or [
        run_artifact(config.out_dir, config.run_name, "checkpoint", epoch=e) for e in config.checkpoint_epochs
    ]
    target_class = getattr(args, "target_class", None)
    split = _load_split(config)
    for index in indices:
        if not 0 <= index < len(split.test):
            raise UsageError(f"sample index {index} outside the test split (size {len(split.test)})")

    written = 0
    for ckpt in checkpoints:
        model, meta = load_model(ckpt)
        if model.spec.family is not ImageFamily.GRAYSCALE_28:
            raise UsageError(f"checkpoint {ckpt} is not a grayscale model")
        tag = _stage_tag(meta.get("epoch"))
        for index in indices:
            sample = split.test[index]
            target = target_class
            if target is None:
                logits, _ = model_forward(model, sample.pixels)
                target = int(np.argmax(logits))
            heat = gradcam(model, sample.pixels, target, config.gradcam_window)
            prov = provenance(config, "gradcam", checkpoint=str(ckpt), sample_index=index, target_class=target)
            pgm_path, png_path = gradcam_paths(config.out_dir, config.dataset.value, index, tag)
            write_with_provenance(pgm_path, pgm_bytes(heatmap_to_gray(heat)), prov)
            write_with_provenance(png_path, png_bytes(render_overlay(heat, sample.pixels)), prov)
            written += 2
    print(f"wrote {written} Grad-CAM files")
    return 0


def bloch_rows(features: np.ndarray, theta: Sequence[float]) -> List[Tuple[int, int, str, BlochVector]]:
    """(sample, qubit, stage, vector) for every feature row at the post-encoding and post-RY stages."""
    batch = np.atleast_2d(np.asarray(features, dtype=np.float64))
    states = vqc_states(batch, theta)
    rows = []
    for sample in range(batch.shape[0]):
        for stage_name, stage in BLOCH_STAGES:
            amps = states[stage - 1][sample]
            for qubit in range(N_QUBITS):
                rows.append((sample, qubit, stage_name, BlochVector(*bloch_array(amps, N_QUBITS, qubit).tolist())))
    return rows


def cmd_bloch(config: RunConfig, args: Optional[argparse.Namespace] = None) -> int:
    features = list(getattr(args, "features", None) or [0.0] * N_QUBITS)
    theta = list(getattr(args, "theta", None) or [0.0] * N_QUBITS)
    prov = provenance(config, "bloch", features=features, theta=theta)
    sample_rows = bloch_rows(np.asarray(features), theta)
    rows = [(q, stage, v) for _, q, stage, v in sample_rows]
    path = write_with_provenance(f"{config.out_dir}/bloch.csv", format_bloch_csv(rows), prov)
    if config.plots:
        write_with_provenance(f"{config.out_dir}/bloch.png", plot_bloch(sample_rows, "Bloch coordinates"), prov)

    n_random = getattr(args, "random", 0) or 0
    if n_random < 0:
        raise UsageError(f"--random must be >= 0, got {n_random}")
    if n_random:
        sweep = make_rng(config.seed, STREAM_SWEEP).uniform(0.0, math.pi, size=(n_random, N_QUBITS))
        sweep_rows = bloch_rows(sweep, theta)
        sweep_prov = dict(prov, random=n_random)
        write_with_provenance(f"{config.out_dir}/bloch_sweep.csv", format_bloch_sweep_csv(sweep_rows), sweep_prov)
        if config.plots:
            png = plot_bloch(sweep_rows, f"{n_random} random feature vectors")
            write_with_provenance(f"{config.out_dir}/bloch_sweep.png", png, sweep_prov)
    print(f"Bloch coordinates written to {path}")
    return 0


COMMANDS: Dict[str, Callable[[RunConfig, Optional[argparse.Namespace]], int]] = {
    "train": cmd_train,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "gradcam": cmd_gradcam,
    "bloch": cmd_bloch,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one command and map failures to exit codes."""
    try:
        args = build_parser().parse_args(argv)
        configure_logging(-1 if args.quiet else args.verbose)
        config = config_from_args(args)
        return COMMANDS[args.command](config, args)
    except LcqhnnError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
