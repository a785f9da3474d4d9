import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exposome.align import FusedFrameTable
from exposome.errors import NoGeoRows, NoSites, SiteOutsideBox, UnsortedBins
from exposome.geodesy import LocalProjection
from exposome.spatial import (
    BBox,
    Site,
    classify_cells,
    export_geojson,
    geojson_dumps,
    grid_heatmap,
    polygon_area,
    render_svg,
    sites_from_geo,
    voronoi,
)

BOX = BBox(0.0, 0.0, 100.0, 60.0)


def random_sites(rng, n, box=BOX):
    xs = rng.uniform(box.xmin, box.xmax, n)
    ys = rng.uniform(box.ymin, box.ymax, n)
    return [Site(float(x), float(y), float(v)) for x, y, v in zip(xs, ys, rng.random(n))]


def brute_nearest(sites, qx, qy):
    pts = np.array([(s.x, s.y) for s in sites])
    d = np.hypot(qx[:, None] - pts[None, :, 0], qy[:, None] - pts[None, :, 1])
    order = np.sort(d, axis=1)
    tie = (order[:, 1] - order[:, 0] < 1e-9) if len(sites) > 1 else np.zeros(len(qx), bool)
    return np.argmin(d, axis=1), tie


def test_single_site_is_the_box():
    t = voronoi([Site(10, 10, 1.0)], BOX)
    assert len(t) == 1
    assert t.cells[0].area == pytest.approx(BOX.area, rel=1e-12)


def test_two_symmetric_sites():
    t = voronoi([Site(25, 30, 0.0), Site(75, 30, 1.0)], BOX)
    a, b = (c.area for c in t.cells)
    assert a == pytest.approx(b, abs=1e-9)
    assert np.allclose(sorted(set(np.round(t.cells[0].polygon[:, 0], 9))), [0, 50])


def test_errors():
    with pytest.raises(NoSites):
        voronoi([], BOX)
    with pytest.raises(SiteOutsideBox):
        voronoi([Site(200, 10, 0.0)], BOX)


def test_duplicates_merged():
    t = voronoi([Site(10, 10, 1.0), Site(10, 10, 3.0), Site(50, 50, 0.0)], BOX)
    assert len(t) == 2
    vals = sorted(c.site.value for c in t.cells)
    assert vals == [0.0, 2.0]


@pytest.mark.parametrize("n", [3, 17, 50, 200])
def test_membership_matches_brute_force(n, rng):
    sites = random_sites(rng, n)
    t = voronoi(sites, BOX)
    qx = rng.uniform(BOX.xmin, BOX.xmax, 10_000)
    qy = rng.uniform(BOX.ymin, BOX.ymax, 10_000)
    got = t.locate(qx, qy)
    owners = [t.cells[i].site for i in got]
    want, tie = brute_nearest(sites, qx, qy)
    agree = np.array([o == sites[w] for o, w in zip(owners, want)])
    assert agree[~tie].mean() >= 0.999


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 500), st.integers(0, 2**31))
def test_area_conservation(n, seed):
    t = voronoi(random_sites(np.random.default_rng(seed), n), BOX)
    assert t.area == pytest.approx(BOX.area, rel=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 60), st.integers(0, 2**31))
def test_nearest_site_predicate(n, seed):
    rng = np.random.default_rng(seed)
    sites = random_sites(rng, n)
    t = voronoi(sites, BOX)
    pts = np.array([(s.x, s.y) for s in sites])
    for cell in t.cells:
        # random convex combinations of the vertices are interior points
        w = rng.dirichlet(np.ones(len(cell.polygon)), size=20)
        q = w @ cell.polygon
        d_own = np.hypot(q[:, 0] - cell.site.x, q[:, 1] - cell.site.y)
        d_all = np.hypot(q[:, None, 0] - pts[None, :, 0], q[:, None, 1] - pts[None, :, 1])
        assert np.all(d_own <= d_all.min(axis=1) + 1e-9)


def test_cell_invariants(rng):
    t = voronoi(random_sites(rng, 80), BOX)
    for c in t.cells:
        assert polygon_area(c.polygon) > 0  # counter-clockwise
        assert np.all(BOX.contains(c.polygon[:, 0] + 0, c.polygon[:, 1] + 0)
                      | np.isclose(c.polygon, [[BOX.xmin, BOX.ymin]]).any(axis=1))
        i = t.locate(np.array([c.site.x]), np.array([c.site.y]))[0]
        assert t.cells[i].site == c.site


def _classified(values, bins):
    sites = [Site(10.0 + 10 * i, 30.0, v) for i, v in enumerate(values)]
    t = classify_cells(voronoi(sites, BOX), bins)
    return [c.class_value for c in sorted(t.cells, key=lambda c: c.site.x)]


def test_classify_examples():
    assert _classified([0.1, 0.5, 0.9], [0.33, 0.66]) == [0, 1, 2]
    assert len(set(_classified([0.4, 0.4, 0.4], [0.33, 0.66]))) == 1
    assert _classified([1, 2, 3, 4, 5], [1.5, 2.5, 3.5, 4.5]) == [0, 1, 2, 3, 4]
    assert _classified([0.66, 0.2], [0.33, 0.66]) == [2, 0]


def test_classify_unsorted():
    with pytest.raises(UnsortedBins):
        _classified([0.1], [0.5, 0.2])


@given(st.floats(-10, 10), st.floats(0, 5), st.lists(st.floats(-10, 10), min_size=1, max_size=6))
def test_classify_monotone(v, dv, bins):
    bins = sorted(bins)
    lo, hi = _classified([v, v + dv], bins)
    assert hi >= lo


def _geo_table(lat, lon, values):
    return FusedFrameTable.from_columns({"pm25": np.asarray(values, dtype=float)},
                                        lat=lat, lon=lon)


def test_heatmap_single_cell():
    t = _geo_table([52.9, 52.90001, 52.90002], [-1.18, -1.18001, -1.18], [0.4, 0.4, 0.4])
    g = grid_heatmap(t, "pm25", 100.0)
    assert g.counts.sum() == 3 and (g.counts > 0).sum() == 1
    assert g.values[g.counts > 0][0] == pytest.approx(0.4)


def test_heatmap_two_clusters():
    proj = LocalProjection(52.9, -1.18)
    x = np.array([1, 2, 3, 261, 262])
    y = np.array([1, 2, 1, 1, 2], dtype=float)
    lat, lon = proj.inverse(x.astype(float), y)
    t = _geo_table(lat, lon, [0, 0, 0, 1, 1])
    g = grid_heatmap(t, "pm25", 50.0, proj)
    pop = g.counts > 0
    assert sorted(g.counts[pop].tolist()) == [2, 3]
    assert sorted(g.values[pop].tolist()) == [0.0, 1.0]
    lines = g.to_csv().splitlines()
    assert lines[0] == "row,col,value,count" and len(lines) == 3


def test_heatmap_count_conservation(default_table):
    g = grid_heatmap(default_table, "eda", 25.0)
    ok = default_table.geo_mask & ~np.isnan(default_table.column("eda"))
    assert g.counts.sum() == ok.sum()
    assert np.all(np.isfinite(g.values[g.counts > 0]))


def test_heatmap_needs_geo():
    t = FusedFrameTable.from_columns({"pm25": [0.1, 0.2]})
    with pytest.raises(NoGeoRows):
        grid_heatmap(t, "pm25", 10.0)
    with pytest.raises(ValueError):
        grid_heatmap(_geo_table([52.9], [-1.18], [0.1]), "pm25", 0.0)


def test_geojson_single_cell():
    proj = LocalProjection(52.9, -1.18)
    doc = export_geojson(voronoi([Site(10, 10, 0.5)], BOX, proj))
    assert doc["type"] == "FeatureCollection" and len(doc["features"]) == 1
    f = doc["features"][0]
    assert f["geometry"]["type"] == "Polygon"
    ring = f["geometry"]["coordinates"][0]
    assert len(ring) == 5 and ring[0] == ring[-1]
    assert f["properties"]["value"] == 0.5


def test_geojson_round_trip_area(rng):
    proj = LocalProjection(52.9, -1.18)
    t = classify_cells(voronoi(random_sites(rng, 40), BOX, proj), [0.25, 0.5, 0.75])
    doc = json.loads(geojson_dumps(export_geojson(t)))
    assert len(doc["features"]) == len(t)
    for f, c in zip(doc["features"], t.cells):
        ring = np.array(f["geometry"]["coordinates"][0])
        x, y = proj.forward(ring[:, 1], ring[:, 0])
        assert polygon_area(np.column_stack([x, y])[:-1]) == pytest.approx(c.area, rel=1e-6)
        assert f["properties"]["class_value"] == c.class_value


def test_sites_from_geo_merges_repeats():
    lat = [52.9, 52.9, 52.91, np.nan]
    lon = [-1.18, -1.18, -1.18, -1.18]
    sites, proj = sites_from_geo(lat, lon, [1.0, 3.0, 5.0, 7.0])
    assert sorted(s.value for s in sites) == [2.0, 5.0]
    with pytest.raises(NoGeoRows):
        sites_from_geo([np.nan], [np.nan], [1.0])


def test_svg_polygon_count():
    t = classify_cells(voronoi([Site(10, 10, 0), Site(50, 30, 1), Site(90, 50, 2)], BOX), [0.5, 1.5])
    svg = render_svg(t)
    assert svg.count("<polygon") == 3
    assert render_svg(t) == svg


def test_geodesy_round_trip(rng):
    proj = LocalProjection(52.9, -1.18)
    lat = 52.9 + rng.uniform(-0.01, 0.01, 100)
    lon = -1.18 + rng.uniform(-0.01, 0.01, 100)
    x, y = proj.forward(lat, lon)
    la, lo = proj.inverse(x, y)
    np.testing.assert_allclose(la, lat, atol=1e-12)
    np.testing.assert_allclose(lo, lon, atol=1e-12)
    # one degree of latitude is about 111.2 km
    x, y = proj.forward(np.array([53.9]), np.array([-1.18]))
    assert y[0] == pytest.approx(111_195, rel=1e-3)
