"""Session data types: channels, raw streams, geo traces and labels."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from ..errors import InvalidConfig, NonMonotonicTime

CHANNEL_KINDS = ("environment", "physiology", "motion", "context", "label")


@dataclass(frozen=True)
class ChannelSpec:
    name: str
    unit: str
    native_period: float  # seconds between samples
    kind: str

    def __post_init__(self):
        if not self.name:
            raise InvalidConfig("channel name must be non-empty")
        if not (np.isfinite(self.native_period) and self.native_period > 0):
            raise InvalidConfig(f"{self.name}: native_period must be > 0, got {self.native_period}")
        if self.kind not in CHANNEL_KINDS:
            raise InvalidConfig(f"{self.name}: unknown kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"name": self.name, "unit": self.unit,
                "native_period": self.native_period, "kind": self.kind}

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelSpec":
        return cls(str(d["name"]), str(d.get("unit", "")), float(d["native_period"]), str(d["kind"]))


class RawSample(NamedTuple):
    t: int  # ms since session start
    value: float  # NaN marks a missing cell


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _check_increasing(t: np.ndarray, what: str) -> None:
    if t.size > 1 and np.any(np.diff(t) <= 0):
        i = int(np.argmax(np.diff(t) <= 0))
        raise NonMonotonicTime(f"{what}: t={int(t[i + 1])} ms does not follow t={int(t[i])} ms")


@dataclass(frozen=True, eq=False)
class RawStream:
    """One channel's samples at its native rate.

    Samples are held column-wise (``t_ms`` int64, ``values`` float64) rather
    than as a list of objects; a 25 minute walk at 64 Hz is ~10^5 samples.
    """

    channel: ChannelSpec
    t_ms: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_ms, dtype=np.int64).copy()
        v = np.asarray(self.values, dtype=np.float64).copy()
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("t_ms and values must be 1-D arrays of equal length")
        if t.size and t[0] < 0:
            raise ValueError(f"{self.channel.name}: negative timestamp {int(t[0])}")
        if np.any(np.isinf(v)):
            raise ValueError(f"{self.channel.name}: infinite sample value")
        _check_increasing(t, self.channel.name)
        object.__setattr__(self, "t_ms", _frozen(t))
        object.__setattr__(self, "values", _frozen(v))

    def __len__(self) -> int:
        return int(self.t_ms.size)

    def __iter__(self) -> Iterator[RawSample]:
        for t, v in zip(self.t_ms.tolist(), self.values.tolist()):
            yield RawSample(t, v)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RawStream):
            return NotImplemented
        return (self.channel == other.channel
                and np.array_equal(self.t_ms, other.t_ms)
                and np.array_equal(self.values, other.values, equal_nan=True))

    @property
    def samples(self) -> list[RawSample]:
        return list(self)

    def present(self) -> tuple[np.ndarray, np.ndarray]:
        """Timestamps and values with missing cells dropped."""
        keep = ~np.isnan(self.values)
        return self.t_ms[keep], self.values[keep]


@dataclass(frozen=True, eq=False)
class GeoTrace:
    t_ms: np.ndarray
    lat: np.ndarray
    lon: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_ms, dtype=np.int64).copy()
        lat = np.asarray(self.lat, dtype=np.float64).copy()
        lon = np.asarray(self.lon, dtype=np.float64).copy()
        if not (t.shape == lat.shape == lon.shape) or t.ndim != 1:
            raise ValueError("geo arrays must be 1-D and of equal length")
        if np.any(~np.isfinite(lat)) or np.any(np.abs(lat) > 90):
            raise ValueError("latitude outside [-90, 90]")
        if np.any(~np.isfinite(lon)) or np.any(np.abs(lon) > 180):
            raise ValueError("longitude outside [-180, 180]")
        _check_increasing(t, "geo")
        object.__setattr__(self, "t_ms", _frozen(t))
        object.__setattr__(self, "lat", _frozen(lat))
        object.__setattr__(self, "lon", _frozen(lon))

    def __len__(self) -> int:
        return int(self.t_ms.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GeoTrace):
            return NotImplemented
        return (np.array_equal(self.t_ms, other.t_ms) and np.array_equal(self.lat, other.lat)
                and np.array_equal(self.lon, other.lon))

    @classmethod
    def empty(cls) -> "GeoTrace":
        return cls(np.zeros(0, np.int64), np.zeros(0), np.zeros(0))


@dataclass(frozen=True)
class LabelEvent:
    t: int  # ms
    valence: int  # 1 = negative/low .. 5 = positive/high

    def __post_init__(self):
        if self.valence not in (1, 2, 3, 4, 5):
            raise ValueError(f"valence must be in 1..5, got {self.valence}")
        if self.t < 0:
            raise ValueError(f"negative label timestamp {self.t}")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Planted structure of a synthetic session, sampled on the 1 Hz grid."""

    times: np.ndarray  # integer seconds
    latents: dict  # name -> values on ``times``
    env_loadings: dict
    physio_coupling: dict
    stress_gain: dict
    channel_models: dict  # name -> (base, scale, noise_sd)
    label_thresholds: tuple


@dataclass(frozen=True, eq=False)
class SessionBundle:
    participant_id: str
    streams: tuple
    geo: GeoTrace
    labels: tuple = ()
    ground_truth: GroundTruth | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "streams", tuple(self.streams))
        object.__setattr__(self, "labels", tuple(sorted(self.labels, key=lambda e: e.t)))
        names = [s.channel.name for s in self.streams]
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise InvalidConfig(f"duplicate channel names: {sorted(dup)}")
        ts = [e.t for e in self.labels]
        if len(set(ts)) != len(ts):
            raise NonMonotonicTime("label events share a timestamp")

    def __eq__(self, other) -> bool:
        if not isinstance(other, SessionBundle):
            return NotImplemented
        return (self.participant_id == other.participant_id and self.streams == other.streams
                and self.geo == other.geo and self.labels == other.labels)

    @property
    def labelled(self) -> bool:
        return bool(self.labels)

    def stream(self, name: str) -> RawStream:
        for s in self.streams:
            if s.channel.name == name:
                return s
        raise KeyError(name)

    @property
    def channel_names(self) -> list[str]:
        return [s.channel.name for s in self.streams]
