"""Resampling of multi-rate streams onto a 1 Hz grid and fusion into one table."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (AllChannelsConstant, ConstantColumn, DegenerateInterval, EmptyStream,
                     MalformedRow, NoOverlap)
from .ingest.schema import ChannelSpec, RawStream, SessionBundle
from .ingest.validate import validate_bundle

GRID_MS = 1000
NO_LABEL = 0


@dataclass(frozen=True)
class InterpolationPoint:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if self.x1 == self.x2:
            raise DegenerateInterval(f"x1 == x2 == {self.x1}")


def interpolate_linear(p: InterpolationPoint, x):
    """Value at ``x`` on the straight line through (x1, y1) and (x2, y2)."""
    return p.y1 + (x - p.x1) * (p.y2 - p.y1) / (p.x2 - p.x1)


def interpolate_at(xs: np.ndarray, ys: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Vectorised two-point linear interpolation between bracketing samples.

    ``xs`` must be strictly increasing. Points outside [xs[0], xs[-1]] are NaN;
    no extrapolation.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, np.nan)
    if xs.size == 0:
        return out
    inside = (x >= xs[0]) & (x <= xs[-1])
    if xs.size == 1:
        out[inside] = ys[0]
        return out
    xi = x[inside]
    j = np.clip(np.searchsorted(xs, xi, side="right") - 1, 0, xs.size - 2)
    x1, x2, y1, y2 = xs[j], xs[j + 1], ys[j], ys[j + 1]
    out[inside] = y1 + (xi - x1) * (y2 - y1) / (x2 - x1)
    return out


def resample(stream: RawStream, rate_hz: float = 1.0) -> RawStream:
    """Bring a stream onto the grid t = k / rate_hz seconds.

    Streams faster than the grid are down-sampled by the arithmetic mean of
    the samples in each window [k, k+1) grid steps. Slower (or equal-rate)
    streams are up-sampled by linear interpolation between the bracketing
    samples; grid points outside the stream's time span are dropped. Missing
    samples are discarded first. Windows that hold no sample come out as NaN.
    """
    step_ms = 1000.0 / rate_hz
    t, v = stream.present()
    if t.size == 0:
        raise EmptyStream(f"{stream.channel.name}: no samples to resample")
    out_spec = ChannelSpec(stream.channel.name, stream.channel.unit, 1.0 / rate_hz, stream.channel.kind)
    if stream.channel.native_period * 1000.0 < step_ms:
        k = np.floor(t / step_ms).astype(np.int64)
        k0 = int(k[0])
        idx = k - k0
        sums = np.bincount(idx, weights=v)
        counts = np.bincount(idx)
        with np.errstate(invalid="ignore", divide="ignore"):
            means = sums / counts
        grid = np.arange(k0, k0 + sums.size)
        return RawStream(out_spec, np.round(grid * step_ms).astype(np.int64), means)
    lo = int(math.ceil(t[0] / step_ms))
    hi = int(math.floor(t[-1] / step_ms))
    grid = np.arange(lo, hi + 1)
    grid_ms = np.round(grid * step_ms).astype(np.int64)
    return RawStream(out_spec, grid_ms, interpolate_at(t, v, grid_ms))


def normalize(column) -> np.ndarray:
    """Min-max scale to [0, 1], ignoring NaN. Raises ConstantColumn if max == min."""
    col = np.asarray(column, dtype=float)
    if np.all(np.isnan(col)):
        raise ConstantColumn("column has no values")
    lo, hi = np.nanmin(col), np.nanmax(col)
    if hi == lo:
        raise ConstantColumn(f"column is constant at {lo}")
    out = (col - lo) / (hi - lo)
    # guard against rounding just outside the unit interval
    return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class FusedFrameTable:
    """1 Hz aligned, min-max normalised, geo-tagged table.

    ``labels`` holds valence 1..5 per row, with 0 for unlabelled rows.
    ``scaling`` keeps each channel's (min, max) before normalisation so
    values can be mapped back to sensor units.
    """

    times: np.ndarray
    columns: dict
    lat: np.ndarray
    lon: np.ndarray
    labels: np.ndarray
    channel_meta: tuple = ()
    scaling: dict = field(default_factory=dict)
    excluded: tuple = ()

    def __post_init__(self):
        n = len(self.times)
        for name, col in self.columns.items():
            if len(col) != n:
                raise ValueError(f"column {name!r} has {len(col)} rows, expected {n}")
        for name in ("lat", "lon", "labels"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has wrong length")

    @classmethod
    def from_columns(cls, columns: dict, times=None, lat=None, lon=None, labels=None,
                     kinds: dict | None = None) -> "FusedFrameTable":
        """Wrap already-aligned columns, e.g. for analysis of external data."""
        cols = {k: np.asarray(v, dtype=float) for k, v in columns.items()}
        n = len(next(iter(cols.values()))) if cols else (0 if times is None else len(times))
        times = np.arange(n, dtype=np.int64) if times is None else np.asarray(times, dtype=np.int64)
        lat = np.full(n, np.nan) if lat is None else np.asarray(lat, dtype=float)
        lon = np.full(n, np.nan) if lon is None else np.asarray(lon, dtype=float)
        labels = np.zeros(n, np.int64) if labels is None else np.asarray(labels, dtype=np.int64)
        kinds = kinds or {}
        meta = tuple(ChannelSpec(k, "", 1.0, kinds.get(k, "environment")) for k in cols)
        return cls(times, cols, lat, lon, labels, meta)

    @property
    def n_rows(self) -> int:
        return len(self.times)

    @property
    def channel_names(self) -> list[str]:
        return list(self.columns)

    def kind_of(self, name: str) -> str:
        for c in self.channel_meta:
            if c.name == name:
                return c.kind
        raise KeyError(name)

    def channels_of_kind(self, *kinds: str) -> list[str]:
        return [c.name for c in self.channel_meta if c.kind in kinds and c.name in self.columns]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise KeyError(f"unknown channel {name!r}") from None

    def matrix(self, names) -> np.ndarray:
        return np.column_stack([self.column(n) for n in names]) if names else np.zeros((self.n_rows, 0))

    @property
    def labelled_mask(self) -> np.ndarray:
        return self.labels != NO_LABEL

    @property
    def geo_mask(self) -> np.ndarray:
        return np.isfinite(self.lat) & np.isfinite(self.lon)

    def select(self, mask) -> "FusedFrameTable":
        mask = np.asarray(mask)
        return FusedFrameTable(self.times[mask], {k: v[mask] for k, v in self.columns.items()},
                               self.lat[mask], self.lon[mask], self.labels[mask],
                               self.channel_meta, dict(self.scaling), self.excluded)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = self.channel_names
        w.writerow(["t_s", "lat", "lon", "label", *names])
        cols = [self.columns[n] for n in names]

        def cell(v):
            return "" if math.isnan(v) else repr(float(v))

        for i in range(self.n_rows):
            lab = int(self.labels[i])
            w.writerow([int(self.times[i]), cell(self.lat[i]), cell(self.lon[i]),
                        "" if lab == NO_LABEL else lab, *(cell(c[i]) for c in cols)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, doc, channel_meta=()) -> "FusedFrameTable":
        text = doc.decode("utf-8") if isinstance(doc, (bytes, bytearray)) else doc
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0][:4] != ["t_s", "lat", "lon", "label"]:
            raise MalformedRow("fused table header must start with t_s,lat,lon,label")
        names = rows[0][4:]
        body = [r for r in rows[1:] if r]

        def num(c):
            return math.nan if c == "" else float(c)

        try:
            times = np.array([int(r[0]) for r in body], dtype=np.int64)
            lat = np.array([num(r[1]) for r in body])
            lon = np.array([num(r[2]) for r in body])
            labels = np.array([NO_LABEL if r[3] == "" else int(r[3]) for r in body], dtype=np.int64)
            cols = {n: np.array([num(r[4 + j]) for r in body]) for j, n in enumerate(names)}
        except (ValueError, IndexError) as e:
            raise MalformedRow(f"bad fused table row: {e}") from e
        meta = tuple(channel_meta) or tuple(ChannelSpec(n, "", 1.0, "environment") for n in names)
        return cls(times, cols, lat, lon, labels, meta)


def _locf_labels(label_t: np.ndarray, label_v: np.ndarray, grid_ms: np.ndarray) -> np.ndarray:
    out = np.full(grid_ms.size, NO_LABEL, dtype=np.int64)
    if label_t.size == 0:
        return out
    j = np.searchsorted(label_t, grid_ms, side="right") - 1
    ok = j >= 0
    out[ok] = label_v[j[ok]]
    return out


def fuse(bundle: SessionBundle) -> FusedFrameTable:
    """Align every usable channel to 1 Hz over the common time window.

    Constant channels are excluded (listed in ``table.excluded``); the
    remaining channels are resampled, cut to the overlap of their spans,
    min-max normalised and joined in channel-name order. GPS positions are
    interpolated componentwise; valence is carried forward from the most
    recent report.
    """
    report = validate_bundle(bundle)
    constant = set(report.constant_channels)
    usable = sorted((s for s in bundle.streams if s.channel.name not in constant),
                    key=lambda s: s.channel.name)
    if not usable:
        raise AllChannelsConstant("every channel is constant")
    spans = []
    for s in usable:
        t, _ = s.present()
        if t.size == 0:
            raise NoOverlap(f"channel {s.channel.name!r} has no samples")
        spans.append((int(t[0]), int(t[-1])))
    lo = max(a for a, _ in spans)
    hi = min(b for _, b in spans)
    k_lo = -(-lo // GRID_MS)
    k_hi = hi // GRID_MS
    if hi - lo < 2000 or k_hi < k_lo:
        raise NoOverlap(f"overlap window [{lo}, {hi}] ms is shorter than 2 s")
    grid_ms = np.arange(k_lo, k_hi + 1, dtype=np.int64) * GRID_MS

    excluded = set(constant)
    columns, scaling, meta = {}, {}, []
    for s in usable:
        r = resample(s)
        col = np.full(grid_ms.size, np.nan)
        pos = np.searchsorted(r.t_ms, grid_ms)
        pos = np.minimum(pos, r.t_ms.size - 1)
        hit = r.t_ms[pos] == grid_ms
        col[hit] = r.values[pos[hit]]
        try:
            columns[s.channel.name] = normalize(col)
        except ConstantColumn:
            excluded.add(s.channel.name)
            continue
        scaling[s.channel.name] = (float(np.nanmin(col)), float(np.nanmax(col)))
        meta.append(s.channel)
    if not columns:
        raise AllChannelsConstant("no channel varies inside the overlap window")

    g = bundle.geo
    lat = interpolate_at(g.t_ms, g.lat, grid_ms)
    lon = interpolate_at(g.t_ms, g.lon, grid_ms)
    lt = np.array([e.t for e in bundle.labels], dtype=np.int64)
    lv = np.array([e.valence for e in bundle.labels], dtype=np.int64)
    labels = _locf_labels(lt, lv, grid_ms)

    keep = ~np.all(np.isnan(np.column_stack(list(columns.values()))), axis=1)
    table = FusedFrameTable(
        times=grid_ms[keep] // GRID_MS,
        columns={k: v[keep] for k, v in columns.items()},
        lat=lat[keep], lon=lon[keep], labels=labels[keep],
        channel_meta=tuple(meta), scaling=scaling, excluded=tuple(sorted(excluded)),
    )
    return table
