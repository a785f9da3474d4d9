"""Voronoi tessellation and grid heat maps of geo-tagged readings.

Geometry runs in planar metres from a local equirectangular projection; the
projection is kept on the result so polygons can be written back out as
(lon, lat) GeoJSON.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import NoGeoRows, NoSites, SiteOutsideBox, UnsortedBins
from .geodesy import LocalProjection

# light (low class) to dark (high class)
CLASS_PALETTE = ("#ffffcc", "#a1dab4", "#41b6c4", "#2c7fb8", "#253494")


@dataclass(frozen=True)
class Site:
    x: float
    y: float
    value: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"site coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class BBox:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError(f"degenerate bounding box {self}")

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    def corners(self) -> np.ndarray:
        return np.array([[self.xmin, self.ymin], [self.xmax, self.ymin],
                         [self.xmax, self.ymax], [self.xmin, self.ymax]])

    def contains(self, x, y) -> np.ndarray:
        return (x >= self.xmin) & (x <= self.xmax) & (y >= self.ymin) & (y <= self.ymax)

    @classmethod
    def around(cls, x, y, padding: float) -> "BBox":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return cls(float(x.min()) - padding, float(y.min()) - padding,
                   float(x.max()) + padding, float(y.max()) + padding)


@dataclass(frozen=True, eq=False)
class VoronoiCell:
    site: Site
    polygon: np.ndarray  # (k, 2) counter-clockwise, not repeating the first vertex
    class_value: float = math.nan

    @property
    def area(self) -> float:
        return polygon_area(self.polygon)

    def closed_ring(self) -> np.ndarray:
        return np.vstack([self.polygon, self.polygon[:1]])


@dataclass(frozen=True, eq=False)
class Tessellation:
    cells: tuple
    bbox: BBox
    projection: LocalProjection | None = None

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def area(self) -> float:
        return sum(c.area for c in self.cells)

    def locate(self, x, y) -> np.ndarray:
        """Index of the cell containing each query point (-1 if none)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.full(x.shape, -1, dtype=np.int64)
        for i, cell in enumerate(self.cells):
            inside = points_in_convex(cell.polygon, x, y)
            out[(out < 0) & inside] = i
        return out


def polygon_area(poly: np.ndarray) -> float:
    """Signed shoelace area (positive for counter-clockwise)."""
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def points_in_convex(poly: np.ndarray, x, y, eps: float = 1e-9) -> np.ndarray:
    inside = np.ones(np.shape(x), dtype=bool)
    k = len(poly)
    for i in range(k):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % k]
        cross = (bx - ax) * (y - ay) - (by - ay) * (x - ax)
        inside &= cross >= -eps * max(1.0, math.hypot(bx - ax, by - ay))
    return inside


def _clip(poly: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Keep the part of a convex polygon where ``v . normal <= offset``."""
    s = (poly @ normal - offset).tolist()
    pts = poly.tolist()
    out = []
    k = len(pts)
    for i in range(k):
        j = (i + 1) % k
        sa, sb = s[i], s[j]
        if sa <= 0:
            out.append(pts[i])
        if (sa < 0 < sb) or (sb < 0 < sa):
            f = sa / (sa - sb)
            (ax, ay), (bx, by) = pts[i], pts[j]
            out.append([ax + (bx - ax) * f, ay + (by - ay) * f])
    dedup = [v for m, v in enumerate(out)
             if abs(v[0] - out[m - 1][0]) > 1e-12 or abs(v[1] - out[m - 1][1]) > 1e-12]
    if len(dedup) >= 3:
        out = dedup
    if len(out) < 3:
        return np.zeros((0, 2))
    return np.array(out)


def _clip_all(poly: np.ndarray, q: np.ndarray, half: np.ndarray) -> np.ndarray:
    # q rows are neighbour offsets from the site, nearest first
    while len(poly) and len(q):
        worst = (poly @ q.T - half).max(axis=0)
        bad = np.flatnonzero(worst > 1e-9 * np.maximum(half, 1.0))
        if bad.size == 0:
            break
        j = bad[np.argmax(worst[bad] / np.sqrt(half[bad]))]  # deepest cut first
        poly = _clip(poly, q[j], half[j])
    return poly


def _cell(i: int, pts: np.ndarray, tree: cKDTree, corners: np.ndarray) -> np.ndarray:
    """Cell of site ``i`` by clipping the box with bisector half-planes.

    Neighbours are tried nearest-first in growing rings from the KD-tree. A
    site farther than twice the cell's circumradius (seen from site i)
    cannot cut the cell, which bounds how far the rings must reach; past
    1024 neighbours every site is checked at once.
    """
    n = len(pts)
    p = pts[i]
    poly = corners - p
    k = 16
    while True:
        if k >= 1024 or k >= n:
            q = pts - p
            half = 0.5 * np.einsum("ij,ij->i", q, q)
            return _clip_all(poly, q[half > 0], half[half > 0]) + p
        dist, idx = tree.query(p, k=k)
        q = pts[idx[idx != i]] - p
        poly = _clip_all(poly, q, 0.5 * np.einsum("ij,ij->i", q, q))
        radius = float(np.max(np.hypot(poly[:, 0], poly[:, 1]))) if len(poly) else 0.0
        if dist[-1] > 2.0 * radius:
            return poly + p
        k *= 4


def voronoi(sites, bbox: BBox, projection: LocalProjection | None = None) -> Tessellation:
    """Euclidean Voronoi cells of ``sites`` clipped to ``bbox``.

    Sites with identical coordinates are merged into one carrying their mean
    value. Every point of the box belongs to the cell of its nearest site.
    """
    sites = list(sites)
    if not sites:
        raise NoSites("no sites to tessellate")
    merged: dict = {}
    for s in sites:
        if not (bbox.xmin <= s.x <= bbox.xmax and bbox.ymin <= s.y <= bbox.ymax):
            raise SiteOutsideBox(f"site ({s.x}, {s.y}) outside {bbox}")
        merged.setdefault((s.x, s.y), []).append(s.value)
    uniq = [Site(x, y, float(np.mean(v))) for (x, y), v in merged.items()]
    pts = np.array([[s.x, s.y] for s in uniq])
    tree = cKDTree(pts)
    corners = bbox.corners()
    cells = []
    for i, s in enumerate(uniq):
        poly = _cell(i, pts, tree, corners)
        cells.append(VoronoiCell(s, poly))
    return Tessellation(tuple(cells), bbox, projection)


def sites_from_geo(lat, lon, values, projection: LocalProjection | None = None,
                   decimals: int = 7):
    """Project geo-tagged values to sites, merging fixes equal to 1e-7 degrees."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    values = np.asarray(values, dtype=float)
    ok = np.isfinite(lat) & np.isfinite(lon) & np.isfinite(values)
    if not ok.any():
        raise NoGeoRows("no rows with position and value")
    lat, lon, values = np.round(lat[ok], decimals), np.round(lon[ok], decimals), values[ok]
    projection = projection or LocalProjection.about(lat, lon)
    key = np.column_stack([lat, lon])
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.ravel()
    means = np.bincount(inv, weights=values) / np.bincount(inv)
    x, y = projection.forward(uniq[:, 0], uniq[:, 1])
    return [Site(float(a), float(b), float(v)) for a, b, v in zip(x, y, means)], projection


def classify_cells(tess: Tessellation, bins) -> Tessellation:
    """Assign each cell the index of the bin its site value falls in.

    Values below ``bins[0]`` get class 0; values at or above ``bins[-1]``
    get class ``len(bins)``.
    """
    bins = np.asarray(bins, dtype=float)
    if bins.size and np.any(np.diff(bins) < 0):
        raise UnsortedBins(f"bins must be ascending, got {bins.tolist()}")
    cells = tuple(replace(c, class_value=float(np.searchsorted(bins, c.site.value, side="right")))
                  for c in tess.cells)
    return Tessellation(cells, tess.bbox, tess.projection)


@dataclass(frozen=True, eq=False)
class HeatGrid:
    cell_size: float
    origin: tuple  # planar (x, y) of the lower-left grid corner
    values: np.ndarray  # (rows, cols) mean, NaN where empty
    counts: np.ndarray
    channel: str = ""
    projection: LocalProjection | None = field(default=None)

    def to_csv(self) -> str:
        """Populated cells as ``row,col,value,count``; row 0 is the southernmost."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "col", "value", "count"])
        for r, c in zip(*np.nonzero(self.counts)):
            w.writerow([int(r), int(c), repr(float(self.values[r, c])), int(self.counts[r, c])])
        return buf.getvalue()


def grid_heatmap(table, channel: str, cell_size: float,
                 projection: LocalProjection | None = None) -> HeatGrid:
    """Mean of ``channel`` per square cell over rows with position and value."""
    if not cell_size > 0:
        raise ValueError("cell_size must be > 0")
    v = table.column(channel)
    ok = table.geo_mask & ~np.isnan(v)
    if not ok.any():
        raise NoGeoRows(f"no geo-tagged rows with {channel!r}")
    lat, lon, v = table.lat[ok], table.lon[ok], v[ok]
    projection = projection or LocalProjection.about(lat, lon)
    x, y = projection.forward(lat, lon)
    x0, y0 = float(x.min()), float(y.min())
    col = np.floor((x - x0) / cell_size).astype(np.int64)
    row = np.floor((y - y0) / cell_size).astype(np.int64)
    shape = (int(row.max()) + 1, int(col.max()) + 1)
    flat = row * shape[1] + col
    counts = np.bincount(flat, minlength=shape[0] * shape[1]).reshape(shape)
    sums = np.bincount(flat, weights=v, minlength=shape[0] * shape[1]).reshape(shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return HeatGrid(cell_size, (x0, y0), values, counts, channel, projection)


def export_geojson(tess: Tessellation) -> dict:
    """FeatureCollection with one Polygon per cell, coordinates as (lon, lat).

    Without a projection the planar coordinates are written unchanged.
    """
    features = []
    for i, cell in enumerate(tess.cells):
        ring = cell.closed_ring()
        if tess.projection is not None:
            lat, lon = tess.projection.inverse(ring[:, 0], ring[:, 1])
            coords = [[float(a), float(b)] for a, b in zip(lon, lat)]
        else:
            coords = ring.tolist()
        cv = cell.class_value
        features.append({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [coords]},
            "properties": {
                "cell": i,
                "value": cell.site.value,
                "class_value": None if math.isnan(cv) else cv,
            },
        })
    return {"type": "FeatureCollection", "features": features}


def geojson_dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True) + "\n"


def render_svg(tess: Tessellation, width: int = 800) -> str:
    """SVG drawing of the cells, filled by class with a 5-colour palette."""
    b = tess.bbox
    scale = width / (b.xmax - b.xmin)
    height = int(round((b.ymax - b.ymin) * scale))
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">']
    for cell in tess.cells:
        px = (cell.polygon[:, 0] - b.xmin) * scale
        py = height - (cell.polygon[:, 1] - b.ymin) * scale
        pts = " ".join(f"{a:.2f},{c:.2f}" for a, c in zip(px, py))
        cv = cell.class_value
        fill = "#cccccc" if math.isnan(cv) else CLASS_PALETTE[int(min(max(cv, 0), 4))]
        out.append(f'<polygon points="{pts}" fill="{fill}" stroke="#333333" stroke-width="0.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
