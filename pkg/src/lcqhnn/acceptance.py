"""Reproduction bands checked over the artifacts of an output directory.

Each check reads the ``*_summary.json`` files written by ``train``/``compare``
(and the comparison table, when present) and reports PASS, FAIL, or SKIP
(summary missing). Several seeds may be listed: a check passes when any of
them passes, so the first seed is the primary one and the rest are fallbacks.
"""

from dataclasses import dataclass
import enum
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from lcqhnn.config import RunConfig
from lcqhnn.dataclass import DatasetName, HeadKind, RunRecord
from lcqhnn.datasets import load_binary_split
from lcqhnn.errors import DataError, UsageError
from lcqhnn.gradcam import class_mass_dominance
from lcqhnn.metrics import convergence_improvement
from lcqhnn.models import load_model
from lcqhnn.render_output import comparison_path, read_comparison, read_summary, run_artifact

logger = logging.getLogger(__name__)

MNIST_EPOCH10_MIN = 99.5
MNIST_FINAL_MIN = 99.5
FASHION_EPOCH10_MIN = 94.0
FASHION_FINAL_MIN = 97.0
FASHION_CNN4_GAP = 5.0
CIFAR_FINAL_MIN = 80.0
FASHION_Q_MIN = 50.0
GRADCAM_DOMINANCE_MIN = 0.8
GRADCAM_SAMPLES = 50

DEFAULT_SEEDS = (42,)


class Status(enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    SKIP = "SKIP"


@dataclass
class AcceptanceCheck:
    name: str
    status: Status
    detail: str

    def to_dict(self) -> Dict[str, str]:
        return {"name": self.name, "status": self.status.value, "detail": self.detail}


Runs = Dict[Tuple[DatasetName, HeadKind], RunRecord]
QTable = Dict[Tuple[str, str], Optional[float]]


def load_runs(out_dir: Union[str, Path], seed: int) -> Runs:
    """Every readable run summary of the seed, keyed by (dataset, head)."""
    runs: Runs = {}
    for dataset in DatasetName:
        for head in HeadKind:
            path = run_artifact(out_dir, RunConfig(dataset=dataset, model=head, seed=seed).run_name, "summary")
            if not path.is_file():
                continue
            try:
                runs[(dataset, head)] = read_summary(path)
            except DataError as e:
                logger.warning("skipping unreadable summary %s: %s", path, e)
    return runs


def load_q_table(out_dir: Union[str, Path], dataset: DatasetName, seed: int) -> QTable:
    """Q_AB values of a comparison table keyed by (A, B); empty when no table was written."""
    path = comparison_path(out_dir, dataset.value, seed)
    if not path.is_file():
        return {}
    try:
        _, _, q_rows = read_comparison(path)
    except DataError as e:
        logger.warning("skipping unreadable comparison %s: %s", path, e)
        return {}
    return {
        (row["A"], row["B"]): None if row["Q_AB"] == "n/a" else float(row["Q_AB"])
        for row in q_rows
    }


def _snapshot(record: RunRecord, epoch: int) -> Optional[float]:
    return record.snapshot_test_accuracy.get(epoch)


def _check(name: str, needed: List[Optional[RunRecord]], body: Callable[..., Tuple[bool, str]]) -> AcceptanceCheck:
    if any(r is None for r in needed):
        return AcceptanceCheck(name, Status.SKIP, "run summary missing")
    try:
        ok, detail = body(*needed)
    except (TypeError, ValueError) as e:
        # missing snapshots or convergence epochs
        return AcceptanceCheck(name, Status.FAIL, f"incomplete record: {e}")
    return AcceptanceCheck(name, Status.PASS if ok else Status.FAIL, detail)


def _mnist(lcq: RunRecord) -> Tuple[bool, str]:
    at10 = _snapshot(lcq, 10)
    ok = at10 >= MNIST_EPOCH10_MIN and lcq.test_accuracy >= MNIST_FINAL_MIN
    return ok, f"epoch 10 {at10:.2f}%, final {lcq.test_accuracy:.2f}%"


def _fashion(lcq: RunRecord, cnn4: RunRecord) -> Tuple[bool, str]:
    at10, cnn4_at10 = _snapshot(lcq, 10), _snapshot(cnn4, 10)
    ok = (
        at10 >= FASHION_EPOCH10_MIN
        and lcq.test_accuracy >= FASHION_FINAL_MIN
        and at10 - cnn4_at10 >= FASHION_CNN4_GAP
    )
    return ok, f"lcqhnn epoch 10 {at10:.2f}%, final {lcq.test_accuracy:.2f}%; cnn4 epoch 10 {cnn4_at10:.2f}%"


def _cifar(lcq: RunRecord, cnn16: RunRecord) -> Tuple[bool, str]:
    ok = lcq.test_accuracy >= CIFAR_FINAL_MIN and lcq.test_accuracy >= cnn16.test_accuracy
    return ok, f"lcqhnn {lcq.test_accuracy:.2f}%, cnn16 {cnn16.test_accuracy:.2f}%"


def _convergence(q_table: QTable) -> Callable[[RunRecord, RunRecord], Tuple[bool, str]]:
    def body(lcq: RunRecord, cnn4: RunRecord) -> Tuple[bool, str]:
        ea, eb = lcq.convergence_epoch, cnn4.convergence_epoch
        if ea is None:
            return False, "lcqhnn never reached the threshold"
        if eb is None:
            return True, f"lcqhnn converged at epoch {ea}; cnn4 never did"
        q = convergence_improvement(ea, eb)
        pair = (HeadKind.LCQHNN.value, HeadKind.CNN4.value)
        if pair in q_table and (q_table[pair] is None or abs(q_table[pair] - q) > 0.005):
            return False, f"comparison table reports Q_AB {q_table[pair]} but the summaries give {q:.2f}"
        return ea < eb and q > FASHION_Q_MIN, f"epochs {ea} vs {eb}, Q_AB {q:.2f}%"

    return body


def evaluate_runs(runs: Runs, fashion_q: Optional[QTable] = None) -> List[AcceptanceCheck]:
    """Band checks over the summaries of one seed; ``fashion_q`` cross-checks the written Q_AB."""
    def get(dataset: DatasetName, head: HeadKind) -> Optional[RunRecord]:
        return runs.get((dataset, head))

    lcq_fashion = get(DatasetName.FASHION, HeadKind.LCQHNN)
    cnn4_fashion = get(DatasetName.FASHION, HeadKind.CNN4)
    return [
        _check("mnist lcqhnn accuracy", [get(DatasetName.MNIST, HeadKind.LCQHNN)], _mnist),
        _check("fashion lcqhnn accuracy and cnn4 gap", [lcq_fashion, cnn4_fashion], _fashion),
        _check(
            "cifar10 lcqhnn accuracy and ordering",
            [get(DatasetName.CIFAR10, HeadKind.LCQHNN), get(DatasetName.CIFAR10, HeadKind.CNN16)],
            _cifar,
        ),
        _check("fashion convergence lcqhnn vs cnn4", [lcq_fashion, cnn4_fashion], _convergence(fashion_q or {})),
    ]


def gradcam_check(out_dir: Union[str, Path], seed: int, data_dir: Union[str, Path]) -> AcceptanceCheck:
    """Predicted-class map dominance of the final MNIST lcqhnn checkpoint on its test split."""
    name = "mnist lcqhnn grad-cam class dominance"
    config = RunConfig(dataset=DatasetName.MNIST, model=HeadKind.LCQHNN, seed=seed)
    path = run_artifact(out_dir, config.run_name, "checkpoint")
    if not path.is_file():
        return AcceptanceCheck(name, Status.SKIP, "checkpoint missing")
    model, _ = load_model(path)
    split = load_binary_split(config.dataset, data_dir, seed)
    dominant, examined = class_mass_dominance(model, split.test.pixels, GRADCAM_SAMPLES)
    if examined < GRADCAM_SAMPLES:
        return AcceptanceCheck(name, Status.FAIL, f"only {examined} confidently classified test images")
    ok = dominant >= GRADCAM_DOMINANCE_MIN * examined
    return AcceptanceCheck(name, Status.PASS if ok else Status.FAIL, f"{dominant} of {examined} images")


def merge_seed_checks(per_seed: Sequence[Tuple[int, List[AcceptanceCheck]]]) -> List[AcceptanceCheck]:
    """Combine per-seed results: the first passing seed wins, else the primary seed's result stands."""
    merged: List[AcceptanceCheck] = []
    for i in range(len(per_seed[0][1])):
        candidates = [(seed, checks[i]) for seed, checks in per_seed]
        passing = [(s, c) for s, c in candidates if c.status is Status.PASS]
        seed, check = passing[0] if passing else candidates[0]
        merged.append(AcceptanceCheck(check.name, check.status, f"seed {seed}: {check.detail}"))
    return merged


def evaluate_out_dir(
    out_dir: Union[str, Path],
    seeds: Sequence[int] = DEFAULT_SEEDS,
    data_dir: Optional[Union[str, Path]] = None,
) -> List[AcceptanceCheck]:
    """Run every check over the artifacts of the listed seeds in ``out_dir``.

    Args:
        out_dir: Directory holding summaries, comparison tables and checkpoints
        seeds: Primary seed first, then fallbacks
        data_dir: If given, also run the Grad-CAM check (needs the MNIST files)

    Raises:
        DataError: If out_dir does not exist
        UsageError: If no seed is listed
    """
    if not Path(out_dir).is_dir():
        raise DataError(f"output directory not found: {out_dir}")
    if not seeds:
        raise UsageError("at least one seed is needed")
    per_seed = []
    for seed in seeds:
        checks = evaluate_runs(load_runs(out_dir, seed), load_q_table(out_dir, DatasetName.FASHION, seed))
        if data_dir is not None:
            checks.append(gradcam_check(out_dir, seed, data_dir))
        per_seed.append((seed, checks))
    return merge_seed_checks(per_seed)


def format_report(checks: List[AcceptanceCheck]) -> str:
    lines = ["| check | status | detail |", "|---|---|---|"]
    lines += [f"| {c.name} | {c.status.value} | {c.detail} |" for c in checks]
    return "\n".join(lines) + "\n"
