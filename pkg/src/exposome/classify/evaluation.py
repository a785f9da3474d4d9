"""K-fold cross-validation, reports and the modality ablation."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from ..errors import RowMismatch, TooFewRows
from .models import ModelKind, train_model
from .features import LabeledDataset

N_CLASSES = 5
CSV_FIELDS = ("model", "provenance", "modality", "k", "n_rows", "mean_accuracy", "std_accuracy")


def fold_indices(n: int, k: int = 10, seed: int = 0) -> list[np.ndarray]:
    """Shuffle ``range(n)`` with ``seed`` and cut it into ``k`` near-equal folds."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if n < k:
        raise TooFewRows(f"{n} rows cannot fill {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


def confusion_matrix(y_true, y_pred, n_classes: int = N_CLASSES) -> np.ndarray:
    """Counts with rows = true valence, columns = predicted valence (1-based labels)."""
    m = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(m, (np.asarray(y_true) - 1, np.asarray(y_pred) - 1), 1)
    return m


@dataclass(frozen=True, eq=False)
class EvalReport:
    model: str
    provenance: str
    modality: str
    fold_accuracies: np.ndarray
    confusion: np.ndarray
    n_rows: int
    seed: int

    @property
    def k(self) -> int:
        return len(self.fold_accuracies)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def std_accuracy(self) -> float:
        # population sd across folds
        return float(np.std(self.fold_accuracies))

    def __eq__(self, other):
        if not isinstance(other, EvalReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "provenance": self.provenance,
            "modality": self.modality,
            "k": self.k,
            "n_rows": self.n_rows,
            "seed": self.seed,
            "fold_accuracies": [float(a) for a in self.fold_accuracies],
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "confusion": self.confusion.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def csv_row(self) -> dict:
        d = self.to_dict()
        return {f: d[f] for f in CSV_FIELDS}


def reports_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.csv_row().items()})
    return buf.getvalue()


def kfold_cv(kind: ModelKind | str, d: LabeledDataset, k: int = 10, seed: int = 0) -> EvalReport:
    """Per-sample k-fold CV; fold ``i`` trains with a seed derived from ``(seed, i)``."""
    if isinstance(kind, str):
        kind = ModelKind(kind)
    folds = fold_indices(len(d), k, seed)
    accs = np.zeros(k)
    conf = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    everything = np.arange(len(d))
    for i, test in enumerate(folds):
        train = np.setdiff1d(everything, test, assume_unique=True)
        fold_seed = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        sub = LabeledDataset(d.X[train], d.y[train], d.feature_names, d.provenance, d.modality)
        model = train_model(kind, sub, fold_seed)
        pred = model.predict(d.X[test])
        accs[i] = np.mean(pred == d.y[test])
        conf += confusion_matrix(d.y[test], pred)
    return EvalReport(kind.name, d.provenance, d.modality, accs, conf, len(d), seed)


def modality_ablation(d_all: LabeledDataset, d_pollution: LabeledDataset,
                      d_physio: LabeledDataset, kind: ModelKind | str, seed: int = 0,
                      k: int = 10) -> dict[str, EvalReport]:
    """Cross-validate the same rows under three feature sets with shared folds."""
    for name, d in (("pollution", d_pollution), ("physiological", d_physio)):
        if len(d) != len(d_all) or not np.array_equal(d.y, d_all.y):
            raise RowMismatch(f"{name} dataset does not share rows and labels with the full set")
    return {
        "all": kfold_cv(kind, d_all, k, seed),
        "pollution": kfold_cv(kind, d_pollution, k, seed),
        "physiological": kfold_cv(kind, d_physio, k, seed),
    }
