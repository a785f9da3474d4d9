"""Labelled datasets built from fused tables: raw rows, DBN features, window statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NoLabeledRows

PROVENANCES = ("raw_fused", "dbn_features", "statistical_features")
MODALITY_KINDS = {
    "pollution": ("environment",),
    "physiological": ("physiology",),
    "all": ("environment", "physiology"),
}
STAT_NAMES = ("mean", "median", "max", "min", "range", "sd", "q1", "q3")


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple
    provenance: str = "raw_fused"
    modality: str = "all"

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] != y.size:
            raise ValueError(f"X has shape {X.shape} but y has {y.size} labels")
        if X.shape[1] != len(self.feature_names):
            raise ValueError("feature_names does not match the column count")
        if np.any(np.isnan(X)):
            raise ValueError("dataset contains missing values")
        if y.size and (y.min() < 1 or y.max() > 5):
            raise ValueError("labels must lie in 1..5")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.modality not in MODALITY_KINDS:
            raise ValueError(f"unknown modality {self.modality!r}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self) -> int:
        return self.y.size

    def permute_features(self, order) -> "LabeledDataset":
        order = list(order)
        return LabeledDataset(self.X[:, order], self.y, [self.feature_names[i] for i in order],
                              self.provenance, self.modality)


def modality_channels(table, modality: str = "all") -> list[str]:
    kinds = MODALITY_KINDS[modality]
    if kinds is None:
        return table.channel_names
    return [c for c in table.channel_names if table.kind_of(c) in kinds]


def complete_labelled_rows(table, channels) -> np.ndarray:
    m = table.matrix(channels)
    return table.labelled_mask & ~np.any(np.isnan(m), axis=1)


def frame_dataset(table, channels=None, modality: str = "all", rows=None) -> LabeledDataset:
    """One example per labelled 1 Hz row with every selected channel present.

    ``rows`` (a boolean mask) fixes the row set instead, so datasets built
    from different channel subsets line up row for row.
    """
    channels = list(channels) if channels is not None else modality_channels(table, modality)
    keep = complete_labelled_rows(table, channels)
    if rows is not None:
        rows = np.asarray(rows, dtype=bool)
        if np.any(rows & ~keep):
            raise ValueError("requested rows are unlabelled or incomplete")
        keep = rows
    if not keep.any():
        raise NoLabeledRows("no complete labelled rows")
    return LabeledDataset(table.matrix(channels)[keep], table.labels[keep], channels,
                          "raw_fused", modality)


def dbn_dataset(table, model, channels=None, modality: str = "all", rows=None) -> LabeledDataset:
    """Top-layer DBN features of each complete labelled row."""
    from ..dbn import extract_features

    raw = frame_dataset(table, channels, modality, rows)
    feats = extract_features(model, raw.X)
    names = [f"dbn_{i}" for i in range(feats.shape[1])]
    return LabeledDataset(feats, raw.y, names, "dbn_features", modality)


def window_stats(values: np.ndarray) -> np.ndarray:
    """mean, median, max, min, max-min, sd (n-1), Q1, Q3 (linear quantiles)."""
    v = np.asarray(values, dtype=float)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return np.array([v.mean(), med, v.max(), v.min(), v.max() - v.min(), sd, q1, q3])


def _majority(labels: np.ndarray) -> int:
    counts = np.bincount(labels, minlength=6)
    return int(np.argmax(counts[1:]) + 1)  # argmax picks the lowest valence on ties


def statistical_features(table, window: int = 10, stride: int = 10, channels=None,
                         modality: str = "all") -> LabeledDataset:
    """Summary statistics per channel over sliding windows of the 1 Hz table.

    Windows cover ``[s, s + window)`` seconds for s = first time, first time +
    stride, ... while the window fits inside the table. A window's label is
    its majority valence (ties go to the lower valence); windows with no
    labelled row, or with a channel absent throughout, are dropped.
    """
    if window < 2 or stride < 1:
        raise ValueError("window must be >= 2 s and stride >= 1 s")
    channels = list(channels) if channels is not None else modality_channels(table, modality)
    if not table.labelled_mask.any():
        raise NoLabeledRows("table has no labelled rows")
    times = table.times
    cols = table.matrix(channels)
    rows, labels = [], []
    start = int(times[0]) if len(times) else 0
    last = int(times[-1]) if len(times) else -1
    for s in range(start, last - window + 2, stride):
        lo = np.searchsorted(times, s, side="left")
        hi = np.searchsorted(times, s + window, side="left")
        lab = table.labels[lo:hi]
        lab = lab[lab > 0]
        if lab.size == 0:
            continue
        block = cols[lo:hi]
        feats = []
        for j in range(block.shape[1]):
            v = block[:, j]
            v = v[~np.isnan(v)]
            if v.size == 0:
                break
            feats.append(window_stats(v))
        else:
            rows.append(np.concatenate(feats) if feats else np.zeros(0))
            labels.append(_majority(lab))
    if not rows:
        raise NoLabeledRows("no window holds a labelled row")
    names = [f"{c}_{s}" for c in channels for s in STAT_NAMES]
    return LabeledDataset(np.array(rows), np.array(labels), names, "statistical_features", modality)
