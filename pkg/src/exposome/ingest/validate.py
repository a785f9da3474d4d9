"""Report-only checks on a session bundle before fusion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schema import SessionBundle

CONSTANT_TOL = 1e-9
CONSTANT_MIN_SAMPLES = 10


@dataclass(frozen=True)
class ChannelReport:
    name: str
    n_samples: int
    n_missing: int
    start_ms: int | None
    end_ms: int | None
    constant: bool

    @property
    def coverage_s(self) -> float:
        if self.start_ms is None:
            return 0.0
        return (self.end_ms - self.start_ms) / 1000.0


@dataclass(frozen=True)
class ValidationReport:
    participant_id: str
    channels: tuple
    overlap_ms: tuple | None  # (start, end) or None when empty
    n_labels: int

    @property
    def constant_channels(self) -> list[str]:
        return [c.name for c in self.channels if c.constant]

    @property
    def overlap_s(self) -> float:
        if self.overlap_ms is None:
            return 0.0
        return (self.overlap_ms[1] - self.overlap_ms[0]) / 1000.0

    def channel(self, name: str) -> ChannelReport:
        for c in self.channels:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "overlap_ms": list(self.overlap_ms) if self.overlap_ms else None,
            "n_labels": self.n_labels,
            "channels": [
                {"name": c.name, "n_samples": c.n_samples, "n_missing": c.n_missing,
                 "start_ms": c.start_ms, "end_ms": c.end_ms,
                 "coverage_s": c.coverage_s, "constant": c.constant}
                for c in self.channels
            ],
        }


def is_constant(values: np.ndarray, tol: float = CONSTANT_TOL,
                min_samples: int = CONSTANT_MIN_SAMPLES) -> bool:
    v = values[~np.isnan(values)]
    return v.size >= min_samples and float(v.max() - v.min()) < tol


def validate_bundle(bundle: SessionBundle) -> ValidationReport:
    """Per-channel counts, time coverage and stuck-sensor flags.

    A channel is flagged constant when it has at least 10 present samples
    whose range is below 1e-9. The overlap window is [latest start,
    earliest end] across all streams and is None if any stream is empty or
    the window is inverted.
    """
    reports = []
    for s in bundle.streams:
        t, v = s.present()
        reports.append(ChannelReport(
            name=s.channel.name,
            n_samples=len(s),
            n_missing=len(s) - int(t.size),
            start_ms=int(t[0]) if t.size else None,
            end_ms=int(t[-1]) if t.size else None,
            constant=is_constant(v),
        ))
    overlap = None
    if reports and all(r.start_ms is not None for r in reports):
        lo = max(r.start_ms for r in reports)
        hi = min(r.end_ms for r in reports)
        if lo <= hi:
            overlap = (lo, hi)
    return ValidationReport(bundle.participant_id, tuple(reports), overlap, len(bundle.labels))
