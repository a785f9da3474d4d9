"""CSV and manifest readers/writers for session data.

Per-channel files use the header ``t_ms,value``; geo files ``t_ms,lat,lon``;
label files ``t_ms,valence``. An empty value cell is a missing sample.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..errors import IoError, MalformedRow
from .schema import ChannelSpec, GeoTrace, LabelEvent, RawStream, SessionBundle

STREAM_HEADER = "t_ms,value"
GEO_HEADER = "t_ms,lat,lon"
LABEL_HEADER = "t_ms,valence"
MANIFEST_VERSION = 1


def _text(doc) -> str:
    if isinstance(doc, (bytes, bytearray)):
        return bytes(doc).decode("utf-8")
    return doc


def _rows(doc, header: str) -> list[tuple[int, list[str]]]:
    lines = _text(doc).split("\n")
    if not lines or lines[0].strip() != header:
        got = lines[0].strip() if lines else ""
        raise MalformedRow(f"expected header {header!r}, got {got!r}")
    out = []
    ncols = header.count(",") + 1
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.rstrip("\r").split(",")
        if len(cells) != ncols:
            raise MalformedRow(f"line {lineno}: expected {ncols} cells, got {len(cells)}")
        out.append((lineno, cells))
    return out


def _parse_ms(cell: str, lineno: int) -> int:
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        f = float(cell)
    except ValueError:
        raise MalformedRow(f"line {lineno}: non-numeric timestamp {cell!r}") from None
    if not (math.isfinite(f) and f.is_integer()):
        raise MalformedRow(f"line {lineno}: timestamp {cell!r} is not a whole millisecond")
    return int(f)


def _parse_float(cell: str, lineno: int, allow_missing: bool) -> float:
    cell = cell.strip()
    if cell == "":
        if allow_missing:
            return math.nan
        raise MalformedRow(f"line {lineno}: empty cell")
    try:
        v = float(cell)
    except ValueError:
        raise MalformedRow(f"line {lineno}: non-numeric value {cell!r}") from None
    if not math.isfinite(v):
        raise MalformedRow(f"line {lineno}: non-finite value {cell!r}")
    return v


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def parse_stream(doc, spec: ChannelSpec) -> RawStream:
    """Parse a ``t_ms,value`` CSV document into a stream for ``spec``.

    Raises MalformedRow for non-numeric cells and NonMonotonicTime when
    timestamps are not strictly increasing. A header-only document yields
    an empty stream.
    """
    rows = _rows(doc, STREAM_HEADER)
    t = [_parse_ms(c[0], n) for n, c in rows]
    v = [_parse_float(c[1], n, allow_missing=True) for n, c in rows]
    return RawStream(spec, np.array(t, dtype=np.int64), np.array(v, dtype=np.float64))


def serialize_stream(stream: RawStream) -> str:
    lines = [STREAM_HEADER]
    lines += [f"{t},{_fmt(v)}" for t, v in zip(stream.t_ms.tolist(), stream.values.tolist())]
    return "\n".join(lines) + "\n"


def parse_geo(doc) -> GeoTrace:
    rows = _rows(doc, GEO_HEADER)
    t = [_parse_ms(c[0], n) for n, c in rows]
    lat = [_parse_float(c[1], n, allow_missing=False) for n, c in rows]
    lon = [_parse_float(c[2], n, allow_missing=False) for n, c in rows]
    return GeoTrace(np.array(t, dtype=np.int64), np.array(lat), np.array(lon))


def serialize_geo(geo: GeoTrace) -> str:
    lines = [GEO_HEADER]
    lines += [f"{t},{_fmt(a)},{_fmt(b)}"
              for t, a, b in zip(geo.t_ms.tolist(), geo.lat.tolist(), geo.lon.tolist())]
    return "\n".join(lines) + "\n"


def parse_labels(doc) -> list[LabelEvent]:
    rows = _rows(doc, LABEL_HEADER)
    events = []
    for n, c in rows:
        v = _parse_float(c[1], n, allow_missing=False)
        if not v.is_integer():
            raise MalformedRow(f"line {n}: valence {c[1]!r} is not an integer")
        try:
            events.append(LabelEvent(_parse_ms(c[0], n), int(v)))
        except ValueError as e:
            raise MalformedRow(f"line {n}: {e}") from None
    return events


def serialize_labels(labels) -> str:
    lines = [LABEL_HEADER] + [f"{e.t},{e.valence}" for e in labels]
    return "\n".join(lines) + "\n"


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e


def write_session(bundle: SessionBundle, directory) -> Path:
    """Write a bundle as per-file CSVs plus a JSON manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    channels = []
    for s in bundle.streams:
        rel = f"{s.channel.name}.csv"
        _write(directory / rel, serialize_stream(s))
        channels.append({**s.channel.to_dict(), "path": rel})
    _write(directory / "geo.csv", serialize_geo(bundle.geo))
    manifest = {
        "version": MANIFEST_VERSION,
        "participant_id": bundle.participant_id,
        "channels": channels,
        "geo": "geo.csv",
        "labels": None,
    }
    if bundle.labels:
        _write(directory / "labels.csv", serialize_labels(bundle.labels))
        manifest["labels"] = "labels.csv"
    path = directory / "manifest.json"
    _write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_session(manifest_path) -> SessionBundle:
    """Load a bundle from a JSON manifest; file paths resolve relative to it."""
    manifest_path = Path(manifest_path)
    try:
        m = json.loads(_read(manifest_path))
    except json.JSONDecodeError as e:
        raise MalformedRow(f"{manifest_path}: invalid JSON ({e})") from e
    base = manifest_path.parent
    streams = []
    for ch in m["channels"]:
        spec = ChannelSpec.from_dict(ch)
        streams.append(parse_stream(_read(base / ch["path"]), spec))
    geo = parse_geo(_read(base / m["geo"])) if m.get("geo") else GeoTrace.empty()
    labels = parse_labels(_read(base / m["labels"])) if m.get("labels") else []
    return SessionBundle(str(m["participant_id"]), streams, geo, labels)
