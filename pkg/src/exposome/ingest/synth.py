"""Synthetic walking sessions with a planted linear structural model.

Downstream statistics and models are checked against sessions generated
here, where the true structure is known. A latent pollution
level (route hot-spots plus slow temporal drift) drives the environment
channels, the environment drives the physiological channels, and a latent
wellbeing score built from both is binned into 1..5 valence reports.
Every coefficient is returned with the bundle as ground truth.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..errors import InvalidConfig
from ..geodesy import LocalProjection
from .schema import ChannelSpec, GeoTrace, GroundTruth, LabelEvent, RawStream, SessionBundle

E4_PERIOD = 1.0 / 64.0

DEFAULT_CHANNELS = (
    ChannelSpec("pm1", "ug/m3", 20.0, "environment"),
    ChannelSpec("pm25", "ug/m3", 20.0, "environment"),
    ChannelSpec("pm10", "ug/m3", 20.0, "environment"),
    ChannelSpec("oxidised", "kOhm", 20.0, "environment"),
    ChannelSpec("reduced", "kOhm", 20.0, "environment"),
    ChannelSpec("nh3", "kOhm", 20.0, "environment"),
    ChannelSpec("noise", "dB", 1.0, "environment"),
    ChannelSpec("eda", "uS", E4_PERIOD, "physiology"),
    ChannelSpec("hr", "bpm", 1.0, "physiology"),
    ChannelSpec("hrv", "ms", E4_PERIOD, "physiology"),
    ChannelSpec("bvp", "a.u.", E4_PERIOD, "physiology"),
    ChannelSpec("temp", "degC", E4_PERIOD, "physiology"),
    ChannelSpec("acc_mag", "g", 0.1, "motion"),
    ChannelSpec("people_count", "count", 10.0, "context"),
)

# name -> (base, scale, noise_sd); noise_sd is per-sample white noise in latent units
DEFAULT_CHANNEL_MODELS = {
    "pm1": (6.0, 3.0, 0.1),
    "pm25": (9.0, 4.0, 0.1),
    "pm10": (14.0, 6.0, 0.1),
    "oxidised": (40.0, 8.0, 0.1),
    "reduced": (300.0, 50.0, 0.1),
    "nh3": (700.0, 100.0, 0.1),
    "noise": (55.0, 6.0, 0.3),
    "eda": (2.0, 0.8, 0.5),
    "hr": (90.0, 8.0, 0.3),
    "hrv": (60.0, 10.0, 0.5),
    "bvp": (0.0, 20.0, 1.0),
    "temp": (32.0, 0.5, 0.3),
    "acc_mag": (1.0, 0.15, 1.0),
    "people_count": (4.0, 4.0, 0.5),
}

DEFAULT_ENV_LOADINGS = {
    "pm1": 1.0, "pm25": 1.0, "pm10": 0.9, "oxidised": -0.6,
    "reduced": -0.5, "nh3": 0.7, "noise": 0.8,
}

DEFAULT_PHYSIO_COUPLING = {
    "eda": {"pm25": 0.6, "pm10": 0.3, "nh3": 0.2},
    "hr": {"pm25": 0.5, "noise": 0.3},
    "hrv": {"pm10": -0.5, "nh3": -0.3},
    "bvp": {"pm1": 0.3},
    "temp": {"noise": 0.1},
}

DEFAULT_STRESS_GAIN = {"eda": 0.5, "hr": 0.5, "hrv": -0.4, "bvp": 0.2, "temp": 0.2}

DEFAULT_LABEL_PHYSIO_WEIGHTS = {"eda": 1.0, "hr": 0.5, "hrv": -0.5}

# closed loop around a campus, roughly 1.9 km
DEFAULT_WAYPOINTS = (
    (52.9110, -1.1880),
    (52.9110, -1.1813),
    (52.9155, -1.1813),
    (52.9155, -1.1880),
    (52.9110, -1.1880),
)


@dataclass(frozen=True)
class SynthConfig:
    participant_id: str = "synthetic-01"
    duration_s: float = 1500.0
    waypoints: tuple = DEFAULT_WAYPOINTS
    channels: tuple = DEFAULT_CHANNELS
    channel_models: dict = field(default_factory=lambda: dict(DEFAULT_CHANNEL_MODELS))
    env_loadings: dict = field(default_factory=lambda: dict(DEFAULT_ENV_LOADINGS))
    env_own_sd: float = 0.5
    physio_coupling: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_PHYSIO_COUPLING.items()})
    stress_gain: dict = field(default_factory=lambda: dict(DEFAULT_STRESS_GAIN))
    # hot-spots along the route: (fraction of route, height, width as fraction)
    hotspots: tuple = ((0.2, 1.0, 0.06), (0.65, 0.7, 0.08))
    pollution_drift_sd: float = 0.4
    timescale_s: float = 90.0
    label_period_s: float = 20.0
    label_pollution_weight: float = 0.5
    label_physio_weights: dict = field(default_factory=lambda: dict(DEFAULT_LABEL_PHYSIO_WEIGHTS))
    label_noise_sd: float = 0.1
    labelled: bool = True
    gps_period_s: float = 1.0
    gps_noise_m: float = 1.0
    constant_channels: dict = field(default_factory=dict)  # planted stuck sensors: name -> value

    def __post_init__(self):
        if not (self.duration_s > 0):
            raise InvalidConfig("duration_s must be > 0")
        for name in ("label_period_s", "gps_period_s", "timescale_s"):
            if not (getattr(self, name) > 0):
                raise InvalidConfig(f"{name} must be > 0")
        if len(self.waypoints) < 2:
            raise InvalidConfig("route needs at least 2 waypoints")
        for spec in self.channels:
            if spec.name not in self.channel_models and spec.name not in self.constant_channels:
                raise InvalidConfig(f"no channel model for {spec.name!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = [c.to_dict() for c in self.channels]
        d["waypoints"] = [list(p) for p in self.waypoints]
        d["hotspots"] = [list(h) for h in self.hotspots]
        d["channel_models"] = {k: list(v) for k, v in self.channel_models.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        """Build a config from JSON-style overrides of the defaults."""
        kw = dict(d)
        if "channels" in kw:
            kw["channels"] = tuple(ChannelSpec.from_dict(c) for c in kw["channels"])
        if "waypoints" in kw:
            kw["waypoints"] = tuple(tuple(p) for p in kw["waypoints"])
        if "hotspots" in kw:
            kw["hotspots"] = tuple(tuple(h) for h in kw["hotspots"])
        if "channel_models" in kw:
            kw["channel_models"] = {**DEFAULT_CHANNEL_MODELS,
                                    **{k: tuple(v) for k, v in kw["channel_models"].items()}}
        unknown = set(kw) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidConfig(f"unknown synth config fields: {sorted(unknown)}")
        return cls(**kw)

    def with_changes(self, **kw) -> "SynthConfig":
        return replace(self, **kw)


class _SmoothProcess:
    """Zero-mean, unit-variance smooth random function via random Fourier features."""

    def __init__(self, rng: np.random.Generator, timescale_s: float, n_terms: int = 20):
        self.omega = rng.standard_normal(n_terms) / timescale_s
        self.phase = rng.uniform(0.0, 2.0 * np.pi, n_terms)
        self.amp = math.sqrt(2.0 / n_terms)

    def __call__(self, t_s: np.ndarray) -> np.ndarray:
        out = np.zeros_like(t_s, dtype=float)
        for w, ph in zip(self.omega, self.phase):
            out += np.cos(w * t_s + ph)
        return self.amp * out


class _Route:
    def __init__(self, waypoints, duration_s: float):
        pts = np.asarray(waypoints, dtype=float)
        self.proj = LocalProjection(float(pts[0, 0]), float(pts[0, 1]))
        x, y = self.proj.forward(pts[:, 0], pts[:, 1])
        self.xy = np.column_stack([x, y])
        seg = np.hypot(np.diff(x), np.diff(y))
        if np.any(seg <= 0):
            raise InvalidConfig("consecutive waypoints must differ")
        self.cum = np.concatenate([[0.0], np.cumsum(seg)])
        self.duration_s = duration_s

    def fraction(self, t_s):
        return np.clip(np.asarray(t_s, dtype=float) / self.duration_s, 0.0, 1.0)

    def position(self, t_s):
        s = self.fraction(t_s) * self.cum[-1]
        x = np.interp(s, self.cum, self.xy[:, 0])
        y = np.interp(s, self.cum, self.xy[:, 1])
        return x, y


def _sample_times(duration_s: float, period_s: float) -> np.ndarray:
    k = int(math.floor(duration_s / period_s + 1e-9))
    return np.round(np.arange(k + 1) * period_s * 1000.0).astype(np.int64)


class _Model:
    """Evaluates the planted latent processes at arbitrary times."""

    def __init__(self, cfg: SynthConfig, rng: np.random.Generator, route: _Route):
        self.cfg = cfg
        self.route = route
        self.drift = _SmoothProcess(rng, cfg.timescale_s)
        self.stress = _SmoothProcess(rng, cfg.timescale_s)
        self.crowd = _SmoothProcess(rng, cfg.timescale_s)
        env = [c.name for c in cfg.channels if c.kind == "environment"]
        self.own = {name: _SmoothProcess(rng, cfg.timescale_s) for name in env}
        self._cache: dict = {}

    def profile(self, t_s):
        f = self.route.fraction(t_s)
        out = np.zeros_like(f)
        for centre, height, width in self.cfg.hotspots:
            d = np.abs(f - centre)
            d = np.minimum(d, 1.0 - d)  # loop routes wrap around
            out += height * np.exp(-0.5 * (d / width) ** 2)
        return out

    def latents(self, t_ms: np.ndarray) -> dict:
        key = (t_ms.size, int(t_ms[0]) if t_ms.size else 0, int(t_ms[-1]) if t_ms.size else 0)
        if key in self._cache:
            return self._cache[key]
        cfg = self.cfg
        t = t_ms / 1000.0
        out = {"route_profile": self.profile(t)}
        out["pollution"] = out["route_profile"] + cfg.pollution_drift_sd * self.drift(t)
        out["stress"] = self.stress(t)
        for name, proc in self.own.items():
            load = cfg.env_loadings.get(name, 0.0)
            z = load * out["pollution"]
            if cfg.env_own_sd:
                z = z + cfg.env_own_sd * proc(t)
            out[f"z_{name}"] = z
        for spec in cfg.channels:
            if spec.kind != "physiology":
                continue
            d = cfg.stress_gain.get(spec.name, 0.0) * out["stress"]
            for env, c in cfg.physio_coupling.get(spec.name, {}).items():
                if f"z_{env}" not in out:
                    raise InvalidConfig(f"{spec.name} coupled to unknown environment channel {env!r}")
                d = d + c * out[f"z_{env}"]
            out[f"drive_{spec.name}"] = d
        w = -cfg.label_pollution_weight * out["pollution"]
        for name, lw in cfg.label_physio_weights.items():
            if f"drive_{name}" not in out:
                raise InvalidConfig(f"label weight on unknown physiology channel {name!r}")
            w = w - lw * out[f"drive_{name}"]
        out["wellbeing"] = w
        self._cache[key] = out
        return out

    def channel_signal(self, spec: ChannelSpec, t_ms: np.ndarray) -> np.ndarray:
        """Noise-free signal of a channel in latent units."""
        lat = self.latents(t_ms)
        if spec.kind == "environment":
            return lat[f"z_{spec.name}"]
        if spec.kind == "physiology":
            return lat[f"drive_{spec.name}"]
        if spec.kind == "context":
            return lat["route_profile"] + 0.3 * self.crowd(t_ms / 1000.0)
        return np.zeros(t_ms.size)


def generate_synthetic_session(cfg: SynthConfig | None = None, seed: int = 0) -> SessionBundle:
    """Generate a deterministic multi-rate session for ``(cfg, seed)``.

    Streams are sampled at each channel's native period over
    ``[0, duration_s]``; the GPS trace walks the waypoints at constant
    speed; valence is reported every ``label_period_s`` by binning the
    latent wellbeing score at its quintiles. The planted structure is
    attached as ``bundle.ground_truth``.
    """
    cfg = cfg or SynthConfig()
    rng = np.random.default_rng(seed)
    route = _Route(cfg.waypoints, cfg.duration_s)
    model = _Model(cfg, rng, route)

    streams = []
    for spec in cfg.channels:
        t_ms = _sample_times(cfg.duration_s, spec.native_period)
        if spec.name in cfg.constant_channels:
            values = np.full(t_ms.size, float(cfg.constant_channels[spec.name]))
        else:
            base, scale, noise_sd = cfg.channel_models[spec.name]
            signal = model.channel_signal(spec, t_ms)
            values = base + scale * (signal + noise_sd * rng.standard_normal(t_ms.size))
            if spec.kind == "context":
                values = np.maximum(np.round(values), 0.0)
        streams.append(RawStream(spec, t_ms, values))
    for name, value in sorted(cfg.constant_channels.items()):
        if name not in {c.name for c in cfg.channels}:
            spec = ChannelSpec(name, "", 20.0, "environment")
            t_ms = _sample_times(cfg.duration_s, spec.native_period)
            streams.append(RawStream(spec, t_ms, np.full(t_ms.size, float(value))))

    geo_t = _sample_times(cfg.duration_s, cfg.gps_period_s)
    x, y = route.position(geo_t / 1000.0)
    if cfg.gps_noise_m:
        x = x + cfg.gps_noise_m * rng.standard_normal(x.size)
        y = y + cfg.gps_noise_m * rng.standard_normal(y.size)
    lat, lon = route.proj.inverse(x, y)
    geo = GeoTrace(geo_t, lat, lon)

    label_t = _sample_times(cfg.duration_s, cfg.label_period_s)
    score = model.latents(label_t)["wellbeing"] + cfg.label_noise_sd * rng.standard_normal(label_t.size)
    thresholds = tuple(float(q) for q in np.quantile(score, [0.2, 0.4, 0.6, 0.8]))
    valence = 1 + np.searchsorted(thresholds, score, side="right")
    labels = [LabelEvent(int(t), int(v)) for t, v in zip(label_t, valence)] if cfg.labelled else []

    grid_ms = _sample_times(cfg.duration_s, 1.0)
    latents = {k: v.copy() for k, v in model.latents(grid_ms).items()}
    truth = GroundTruth(
        times=grid_ms // 1000,
        latents=latents,
        env_loadings=dict(cfg.env_loadings),
        physio_coupling={k: dict(v) for k, v in cfg.physio_coupling.items()},
        stress_gain=dict(cfg.stress_gain),
        channel_models=dict(cfg.channel_models),
        label_thresholds=thresholds,
    )
    return SessionBundle(cfg.participant_id, streams, geo, labels, ground_truth=truth)
