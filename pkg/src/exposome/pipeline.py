"""End-to-end pipeline: ingest, fuse, explore, map, learn features, classify, report."""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import classify, dbn, spatial, stats
from .align import fuse
from .errors import ConfigError, ExposomeError, IoError, StageError
from .geodesy import LocalProjection
from .ingest import SynthConfig, generate_synthetic_session, read_session, validate_bundle, write_session

STAGES = ("synth", "validate", "fuse", "stats", "spatial", "train", "evaluate", "report")
MODALITIES = ("all", "pollution", "physiological")
OUT_ENV = "EXPOSOME_OUT_DIR"
DEFAULT_OUT = "exposome-out"
REPORT_FILE = "run_report.json"
SUMMARY_FILE = "summary.txt"


@dataclass
class PipelineConfig:
    seed: int = 0
    manifest: str | None = None
    synth: dict = field(default_factory=dict)  # overrides of the SynthConfig defaults
    correlation_channels: list | None = None
    pca_channels: list | None = None
    # each entry: {"response": name, "predictors": [names] or null for every environment channel}
    regressions: list = field(default_factory=lambda: [{"response": "eda", "predictors": None},
                                                       {"response": "hr", "predictors": None}])
    heatmap_channels: list = field(default_factory=lambda: ["pm25", "eda"])
    heatmap_cell_m: float = 25.0
    voronoi_channel: str = "pm25"
    voronoi_padding_m: float = 50.0
    # DBN training; the learning rate is raised above the per-RBM default so
    # that 20 epochs over ~1500 rows move the weights off their initial scale
    dbn: dict = field(default_factory=lambda: {"learning_rate": 1.0, "epochs": 20, "batch_size": 128})
    dbn_sizes: list | None = None
    classifiers: list = field(default_factory=lambda: list(classify.MODEL_KINDS))
    ablation_model: str = "random_forest"
    window_s: int = 10
    stride_s: int = 10
    cv_folds: int = 10
    out_dir: str | None = None

    def __post_init__(self):
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        for kind in list(self.classifiers) + [self.ablation_model]:
            if kind not in classify.MODEL_KINDS:
                raise ConfigError(f"unknown classifier {kind!r}")
        if self.heatmap_cell_m <= 0 or self.voronoi_padding_m < 0:
            raise ConfigError("heatmap_cell_m must be > 0 and voronoi_padding_m >= 0")
        if self.window_s < 2 or self.stride_s < 1 or self.cv_folds < 2:
            raise ConfigError("window_s >= 2, stride_s >= 1 and cv_folds >= 2 are required")
        for r in self.regressions:
            if not isinstance(r, dict) or "response" not in r or set(r) - {"response", "predictors"}:
                raise ConfigError(f"bad regression entry {r!r}")
        try:
            self.synth_config()
            self.train_config(0)
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise IoError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from e
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc)

    def echo(self) -> dict:
        """Config as recorded in artifacts; the output location is left out."""
        d = asdict(self)
        d.pop("out_dir")
        return d

    def synth_config(self) -> SynthConfig:
        return SynthConfig.from_dict(self.synth)

    def train_config(self, seed: int) -> dbn.TrainConfig:
        return dbn.TrainConfig(**{**self.dbn, "seed": seed})

    def output_dir(self) -> Path:
        return Path(self.out_dir or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def stage_seed(base: int, stage: str) -> int:
    """Seed for one stage, stable across runs and independent of the other stages."""
    digest = hashlib.sha256(f"{stage}:{base}".encode()).digest()
    return int.from_bytes(digest[:8], "big") & (2 ** 63 - 1)


@dataclass
class StageStatus:
    name: str
    status: str = "skipped"  # ok | failed | skipped
    seconds: float = 0.0
    outputs: list = field(default_factory=list)
    error: str | None = None


@dataclass
class RunReport:
    config: dict
    stages: list
    hashes: dict = field(default_factory=dict)
    error: StageError | None = None

    @property
    def failed(self) -> bool:
        return any(s.status == "failed" for s in self.stages)

    @property
    def outputs(self) -> list:
        return [p for s in self.stages for p in s.outputs]

    def stage(self, name: str) -> StageStatus:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_dict(self) -> dict:
        # timings vary run to run, so they stay out of the JSON artifact
        return {
            "config": self.config,
            "stages": [{"name": s.name, "status": s.status, "outputs": s.outputs, "error": s.error}
                       for s in self.stages],
            "hashes": self.hashes,
        }


def _channels_exist(table, names, what: str):
    missing = [c for c in names if c not in table.channel_names]
    if missing:
        raise ConfigError(f"{what} references channel(s) not in the fused table: {', '.join(missing)}")


class _Run:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = cfg.output_dir()
        self.results: dict = {}
        self.current: StageStatus | None = None

    def write(self, rel: str, text: str):
        path = self.out / rel
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as e:
            raise IoError(f"cannot write {path}: {e}") from e
        self.current.outputs.append(rel)

    def seed(self, stage: str) -> int:
        return stage_seed(self.cfg.seed, stage)

    # stages

    def synth(self):
        if self.cfg.manifest:
            self.results["bundle"] = read_session(self.cfg.manifest)
            return
        bundle = generate_synthetic_session(self.cfg.synth_config(), self.seed("synth"))
        manifest = write_session(bundle, self.out / "session")
        doc = json.loads(manifest.read_text(encoding="utf-8"))
        names = [c["path"] for c in doc["channels"]] + [doc["geo"], doc["labels"], manifest.name]
        self.current.outputs.extend(f"session/{n}" for n in names if n)
        self.results["bundle"] = bundle

    def validate(self):
        report = validate_bundle(self.results["bundle"])
        self.write("validation.json", json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        self.results["validation"] = report

    def fuse(self):
        table = fuse(self.results["bundle"])
        self.write("fused.csv", table.to_csv())
        self.results["table"] = table

    def stats(self):
        cfg, table = self.cfg, self.results["table"]
        env = table.channels_of_kind("environment")
        _channels_exist(table, cfg.correlation_channels or [], "correlation_channels")
        _channels_exist(table, cfg.pca_channels or [], "pca_channels")
        for r in cfg.regressions:
            _channels_exist(table, [r["response"]] + list(r["predictors"] or []), "regressions")
        corr = stats.pearson_matrix(table, cfg.correlation_channels)
        self.write("correlation.csv", corr.to_csv())
        p = stats.pca(table, cfg.pca_channels)
        self.write("pca.json", json.dumps(p.to_dict(), indent=2, sort_keys=True) + "\n")
        regs = {}
        for r in cfg.regressions:
            preds = [c for c in (r["predictors"] or env) if c != r["response"]]
            res = stats.ols_regress(table, r["response"], preds)
            self.write(f"regression_{r['response']}.csv", res.to_csv())
            self.write(f"residuals_{r['response']}.csv", res.residuals_csv())
            self.write(f"qq_{r['response']}.csv", stats.qq_csv(stats.qq_data(res.residuals)))
            regs[r["response"]] = res
        self.results.update(correlation=corr, pca=p, regressions=regs)

    def spatial(self):
        cfg, table = self.cfg, self.results["table"]
        _channels_exist(table, list(cfg.heatmap_channels) + [cfg.voronoi_channel], "spatial channels")
        geo = table.geo_mask
        proj = LocalProjection.about(table.lat[geo], table.lon[geo]) if geo.any() else None
        for ch in cfg.heatmap_channels:
            grid = spatial.grid_heatmap(table, ch, cfg.heatmap_cell_m, proj)
            self.write(f"heatmap_{ch}.csv", grid.to_csv())
        sites, proj = spatial.sites_from_geo(table.lat, table.lon, table.column(cfg.voronoi_channel), proj)
        xy = np.array([(s.x, s.y) for s in sites])
        bbox = spatial.BBox.around(xy[:, 0], xy[:, 1], cfg.voronoi_padding_m)
        values = np.array([s.value for s in sites])
        bins = np.quantile(values, [0.2, 0.4, 0.6, 0.8])
        tess = spatial.classify_cells(spatial.voronoi(sites, bbox, proj), bins)
        self.write("voronoi.geojson", spatial.geojson_dumps(spatial.export_geojson(tess)))
        self.write("voronoi.svg", spatial.render_svg(tess))
        self.results["tessellation"] = tess

    def train(self):
        cfg, table = self.cfg, self.results["table"]
        rows = classify.complete_labelled_rows(table, classify.modality_channels(table, "all"))
        models, datasets = {}, {}
        for mod in MODALITIES:
            raw = classify.frame_dataset(table, modality=mod, rows=rows)
            sizes = cfg.dbn_sizes if (cfg.dbn_sizes and mod == "all") else None
            model = dbn.train_dbn(raw.X, cfg.train_config(self.seed(f"train:{mod}")), sizes)
            self.write(f"dbn_{mod}.json", model.to_json())
            models[mod] = model
            datasets[mod] = classify.dbn_dataset(table, model, modality=mod, rows=rows)
        self.results.update(models=models, dbn_datasets=datasets)

    def evaluate(self):
        cfg, table = self.cfg, self.results["table"]
        seed = self.seed("evaluate")
        dsets = self.results["dbn_datasets"]
        stat = classify.statistical_features(table, cfg.window_s, cfg.stride_s)
        reports = []
        for kind in cfg.classifiers:
            reports.append(classify.kfold_cv(kind, dsets["all"], cfg.cv_folds, seed))
            reports.append(classify.kfold_cv(kind, stat, cfg.cv_folds, seed))
        # the ablation shares folds with the all-modality run above
        ablation = {}
        for mod in MODALITIES:
            done = [r for r in reports if r.model == cfg.ablation_model
                    and r.provenance == "dbn_features" and r.modality == mod]
            ablation[mod] = done[0] if done else classify.kfold_cv(cfg.ablation_model, dsets[mod],
                                                                   cfg.cv_folds, seed)
        for mod in MODALITIES[1:]:
            reports.append(ablation[mod])
        for r in reports:
            self.write(f"eval_{r.model}_{r.provenance}_{r.modality}.json", r.to_json())
        self.write("evaluation.csv", classify.reports_csv(reports))
        self.results.update(reports=reports, ablation=ablation)

    def report(self):
        pass  # handled by run_pipeline once every status is known


def _summary(report: RunReport, results: dict) -> str:
    lines = ["exposome pipeline run", ""]
    for s in report.stages:
        line = f"{s.name:<9} {s.status:<7} {s.seconds:8.2f} s  {len(s.outputs)} files"
        if s.error:
            line += f"  error: {s.error}"
        lines.append(line)
    if "table" in results:
        t = results["table"]
        lines += ["", f"fused rows: {t.n_rows}, channels: {', '.join(t.channel_names)}"]
        if t.excluded:
            lines.append(f"excluded channels: {', '.join(t.excluded)}")
    if "pca" in results:
        p = results["pca"]
        lines.append("PCA explained ratio: " + ", ".join(f"{r:.3f}" for r in p.explained_ratio[:3]))
    for name, r in results.get("regressions", {}).items():
        lines.append(f"OLS {name}: R^2 = {r.r_squared:.3f}, n = {r.residuals.size}")
    if "tessellation" in results:
        lines.append(f"Voronoi cells: {len(results['tessellation'].cells)}")
    if "reports" in results:
        lines += ["", "cross-validated accuracy (mean, sd):"]
        for r in results["reports"]:
            lines.append(f"  {r.model:<20} {r.provenance:<21} {r.modality:<13} "
                         f"{r.mean_accuracy:.3f}  {r.std_accuracy:.3f}")
    return "\n".join(lines) + "\n"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_pipeline(cfg: PipelineConfig, until: str = "report", strict: bool = False):
    """Run stages in order up to ``until``; returns ``(RunReport, results)``.

    A failing stage stops the run and is recorded as a StageError in the
    report, which is still written. With ``strict`` the error is re-raised
    after the report is written.
    """
    if until not in STAGES:
        raise ConfigError(f"unknown stage {until!r}; expected one of {STAGES}")
    run = _Run(cfg)
    last = STAGES.index(until)
    report = RunReport(cfg.echo(), [StageStatus(s) for s in STAGES[:last + 1]])
    for status in report.stages:
        if report.error is not None:
            break
        run.current = status
        t0 = time.perf_counter()
        try:
            getattr(run, status.name)()
            status.status = "ok"
        except ExposomeError as e:
            status.status = "failed"
            status.error = f"{type(e).__name__}: {e}"
            report.error = StageError(status.name, e)
        status.seconds = time.perf_counter() - t0
    report.hashes = {rel: _sha256(run.out / rel) for rel in sorted(report.outputs)}
    if until == "report" or report.error is not None:
        run.current = report.stages[-1] if until == "report" else StageStatus("report")
        try:
            run.write(SUMMARY_FILE, _summary(report, run.results))
            run.write(REPORT_FILE, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        except IoError as e:
            if report.error is None:
                report.stage("report").status = "failed"
                report.stage("report").error = f"IoError: {e}"
                report.error = StageError("report", e)
    if strict and report.error is not None:
        raise report.error
    return report, run.results
