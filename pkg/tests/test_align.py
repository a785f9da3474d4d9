import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from exposome.align import (
    FusedFrameTable,
    InterpolationPoint,
    fuse,
    interpolate_at,
    interpolate_linear,
    normalize,
    resample,
)
from exposome.errors import (
    AllChannelsConstant,
    ConstantColumn,
    DegenerateInterval,
    EmptyStream,
    NoOverlap,
)
from exposome.ingest import (
    ChannelSpec,
    GeoTrace,
    LabelEvent,
    RawStream,
    SessionBundle,
    SynthConfig,
    generate_synthetic_session,
)


@pytest.mark.parametrize("p, x, want", [
    ((0, 0, 2, 2), 1, 1.0),
    ((0, 5, 10, 5), 7, 5.0),
    ((1, 2, 3, 10), 2.5, 8.0),
])
def test_interpolate_examples(p, x, want):
    assert interpolate_linear(InterpolationPoint(*p), x) == want


def test_degenerate_interval():
    with pytest.raises(DegenerateInterval):
        InterpolationPoint(1.0, 0.0, 1.0, 5.0)


finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(finite, finite, finite, finite, st.floats(0, 1))
def test_interpolation_exact_on_affine(a, b, x1, dx, frac):
    assume(abs(dx) > 1e-3)
    x2 = x1 + dx
    x = x1 + frac * dx
    y = interpolate_linear(InterpolationPoint(x1, a * x1 + b, x2, a * x2 + b), x)
    want = a * x + b
    scale = max(abs(a * x1), abs(a * x2), abs(b), 1.0)
    assert abs(y - want) <= 1e-12 * scale * 4


def test_interpolate_at_no_extrapolation():
    out = interpolate_at([0, 10], [0, 10], [-1, 0, 5, 10, 11])
    np.testing.assert_array_equal(np.isnan(out), [True, False, False, False, True])
    np.testing.assert_allclose(out[1:4], [0, 5, 10])


def test_interpolate_at_matches_numpy(rng):
    xs = np.cumsum(rng.uniform(0.1, 2, 200))
    ys = rng.normal(size=200)
    q = rng.uniform(xs[0], xs[-1], 1000)
    np.testing.assert_allclose(interpolate_at(xs, ys, q), np.interp(q, xs, ys), rtol=0, atol=1e-12)


def _stream(name, period, t_ms, v, kind="environment"):
    return RawStream(ChannelSpec(name, "", period, kind), t_ms, v)


def test_downsample_constant_64hz():
    t = np.round(np.arange(64 * 10) * 1000 / 64).astype(np.int64)
    r = resample(_stream("eda", 1 / 64, t, np.full(t.size, 0.7)))
    np.testing.assert_allclose(r.values, 0.7, rtol=0, atol=1e-15)
    np.testing.assert_array_equal(r.t_ms, np.arange(10) * 1000)
    assert r.channel.native_period == 1.0


def test_upsample_20s_ramp():
    r = resample(_stream("pm25", 20.0, [0, 20000], [0.0, 20.0]))
    np.testing.assert_array_equal(r.t_ms, np.arange(21) * 1000)
    np.testing.assert_allclose(r.values, np.arange(21.0), rtol=0, atol=1e-12)


def test_window_mean():
    t = [0, 250, 500, 750]
    r = resample(_stream("x", 0.25, t, [1.0, 2.0, 3.0, 4.0]))
    assert r.values.tolist() == [2.5]


def test_resample_empty():
    with pytest.raises(EmptyStream):
        resample(_stream("x", 1.0, [], []))


def test_upsample_drops_missing():
    r = resample(_stream("x", 2.0, [0, 2000, 4000], [0.0, np.nan, 4.0]))
    np.testing.assert_allclose(r.values, [0, 1, 2, 3, 4])


def test_downsample_empty_window_is_nan():
    r = resample(_stream("x", 0.5, [0, 500, 2000, 2500], [1.0, 3.0, 5.0, 7.0]))
    assert r.values[0] == 2.0 and np.isnan(r.values[1]) and r.values[2] == 6.0


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.integers(1, 40), st.integers(0, 2**31))
def test_downsampling_preserves_mean(n_windows, per_window, seed):
    rng = np.random.default_rng(seed)
    step = 1000 // per_window
    assume(step >= 1 and step * per_window <= 1000)
    t = (np.arange(n_windows)[:, None] * 1000 + np.arange(per_window)[None, :] * step).ravel()
    v = rng.normal(size=t.size)
    r = resample(_stream("x", step / 1000, t, v))
    assert abs(r.values.mean() - v.mean()) <= 1e-12 * max(1.0, np.abs(v).max())


def test_normalize_examples():
    np.testing.assert_array_equal(normalize([2, 4, 6]), [0, 0.5, 1])
    with pytest.raises(ConstantColumn):
        normalize([5, 5, 5])


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=100))
def test_normalize_properties(vals):
    v = np.array(vals)
    assume(v.max() > v.min())
    out = normalize(v)
    assert out.min() >= 0 and out.max() <= 1
    assert out[np.argmin(v)] == 0 and out[np.argmax(v)] == 1
    np.testing.assert_allclose(normalize(out), out, rtol=0, atol=1e-12)


def test_normalize_ignores_nan():
    out = normalize([1.0, np.nan, 3.0])
    assert out[0] == 0 and np.isnan(out[1]) and out[2] == 1


def test_fuse_default_session(default_bundle, default_table):
    t = default_table
    assert t.n_rows == 1500 + 1
    assert sorted(t.channel_names) == sorted(default_bundle.channel_names)
    assert np.all(np.diff(t.times) == 1)
    m = t.matrix(t.channel_names)
    assert np.nanmin(m) >= 0 and np.nanmax(m) <= 1
    assert set(np.unique(t.labels)) <= {1, 2, 3, 4, 5}
    assert t.geo_mask.all()


def test_fuse_excludes_planted_constant():
    b = generate_synthetic_session(SynthConfig(duration_s=300.0, constant_channels={"co2": 412.0}), seed=2)
    t = fuse(b)
    assert "co2" not in t.channel_names
    assert t.excluded == ("co2",)
    assert len(t.channel_names) == len(b.streams) - 1
    assert t.n_rows == 301


def test_fuse_locf_labels():
    t = np.arange(0, 1201) * 1000
    s = _stream("hr", 1.0, t, np.sin(t / 7e4))
    geo = GeoTrace(t, np.full(t.size, 52.9), np.linspace(-1.19, -1.18, t.size))
    b = SessionBundle("p", [s], geo, [LabelEvent(0, 3), LabelEvent(600_000, 5)])
    table = fuse(b)
    assert np.all(table.labels[table.times < 600] == 3)
    assert np.all(table.labels[table.times >= 600] == 5)


def test_fuse_rows_before_first_label_unlabelled():
    t = np.arange(0, 101) * 1000
    s = _stream("hr", 1.0, t, np.cos(t / 1e4))
    b = SessionBundle("p", [s], GeoTrace.empty(), [LabelEvent(30_000, 2)])
    table = fuse(b)
    assert np.all(table.labels[:30] == 0) and np.all(table.labels[30:] == 2)
    assert not table.geo_mask.any()


def test_fuse_overlap_window():
    a = _stream("a", 1.0, np.arange(0, 51) * 1000, np.arange(51.0))
    b = _stream("b", 1.0, np.arange(10, 81) * 1000, np.arange(71.0) ** 2)
    table = fuse(SessionBundle("p", [b, a], GeoTrace.empty()))
    assert table.times[0] == 10 and table.times[-1] == 50
    assert table.channel_names == ["a", "b"]


def test_fuse_errors():
    a = _stream("a", 1.0, [0, 1000], [0.0, 1.0])
    b = _stream("b", 1.0, [5000, 6000, 7000], [0.0, 1.0, 2.0])
    with pytest.raises(NoOverlap):
        fuse(SessionBundle("p", [a, b], GeoTrace.empty()))
    c = _stream("c", 1.0, np.arange(20) * 1000, np.ones(20))
    with pytest.raises(AllChannelsConstant):
        fuse(SessionBundle("p", [c], GeoTrace.empty()))


def test_fuse_no_all_missing_rows():
    # two 0.5 s channels with a shared gap at 3 s
    t = np.array([0, 500, 1000, 1500, 2000, 2500, 4000, 4500, 5000, 5500])
    a = _stream("a", 0.5, t, np.arange(10.0))
    b = _stream("b", 0.5, t, np.arange(10.0) ** 2)
    table = fuse(SessionBundle("p", [a, b], GeoTrace.empty()))
    assert 3 not in table.times.tolist()
    m = table.matrix(table.channel_names)
    assert not np.any(np.all(np.isnan(m), axis=1))


def test_scaling_recorded(default_bundle, default_table):
    lo, hi = default_table.scaling["hr"]
    raw = resample(default_bundle.stream("hr")).values
    assert lo >= raw.min() - 1e-9 and hi <= raw.max() + 1e-9


def test_csv_round_trip(default_table):
    text = default_table.to_csv()
    assert text.splitlines()[0].startswith("t_s,lat,lon,label,")
    back = FusedFrameTable.from_csv(text, default_table.channel_meta)
    np.testing.assert_array_equal(back.times, default_table.times)
    np.testing.assert_array_equal(back.labels, default_table.labels)
    for c in default_table.channel_names:
        np.testing.assert_array_equal(back.column(c), default_table.column(c))
    assert back.to_csv() == text


def test_paper_scale_fuse_is_fast():
    import time

    # 20 input channels, ~13.7k rows; every native period divides the duration
    cfg = SynthConfig(duration_s=13_660.0,
                      constant_channels={f"extra{i}": float(i) for i in range(6)})
    b = generate_synthetic_session(cfg, seed=5)
    t0 = time.perf_counter()
    table = fuse(b)
    elapsed = time.perf_counter() - t0
    assert len(b.streams) == 20
    assert table.n_rows == 13_661
    assert elapsed < 1.0
