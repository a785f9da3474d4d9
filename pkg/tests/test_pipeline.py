import json
import xml.etree.ElementTree as ET
from dataclasses import replace

import numpy as np
import pytest

from exposome import cli
from exposome.errors import ConfigError, StageError
from exposome.ingest import GeoTrace, SynthConfig, generate_synthetic_session, write_session
from exposome.pipeline import (
    DEFAULT_OUT,
    OUT_ENV,
    REPORT_FILE,
    STAGES,
    PipelineConfig,
    run_pipeline,
    stage_seed,
)

SMALL = {
    "synth": {"duration_s": 400.0},
    "dbn": {"learning_rate": 1.0, "epochs": 2, "batch_size": 128},
    "classifiers": ["gaussian_nb", "decision_tree"],
    "ablation_model": "gaussian_nb",
    "cv_folds": 3,
}


def small(tmp_path, **kw):
    return PipelineConfig.from_dict({**SMALL, "out_dir": str(tmp_path), **kw})


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    report, results = run_pipeline(PipelineConfig.from_dict({**SMALL, "seed": 7, "out_dir": str(out)}))
    return out, report, results


def test_smoke_run(small_run):
    out, report, results = small_run
    assert not report.failed
    assert [s.name for s in report.stages] == list(STAGES)
    assert all(s.status == "ok" for s in report.stages)
    files = {p.relative_to(out).as_posix() for p in out.rglob("*") if p.is_file()}
    assert len(files) >= 10
    for name in ("validation.json", "fused.csv", "correlation.csv", "pca.json", "regression_eda.csv",
                 "qq_eda.csv", "heatmap_pm25.csv", "voronoi.geojson", "voronoi.svg", "dbn_all.json",
                 "evaluation.csv", "summary.txt", REPORT_FILE):
        assert name in files
    assert set(report.outputs) <= files
    doc = json.loads((out / REPORT_FILE).read_text())
    assert doc["config"]["seed"] == 7 and "out_dir" not in doc["config"]
    assert "seconds" not in json.dumps(doc)
    assert set(doc["hashes"]) == set(report.outputs) - {REPORT_FILE, "summary.txt"}
    csv_lines = (out / "evaluation.csv").read_text().splitlines()
    assert len(csv_lines) == 1 + 2 * 2 + 2  # header, two models on two feature sets, ablation


def test_stage_seeds():
    assert stage_seed(7, "synth") == stage_seed(7, "synth")
    assert stage_seed(7, "synth") != stage_seed(7, "train")
    assert stage_seed(7, "synth") != stage_seed(8, "synth")
    assert 0 <= stage_seed(2**40, "evaluate") < 2**63


def test_missing_channel_after_exclusion(tmp_path):
    cfg = small(tmp_path, synth={"duration_s": 300.0, "constant_channels": {"co2": 412.0}},
                correlation_channels=["co2", "pm25"])
    report, results = run_pipeline(cfg)
    assert report.failed
    assert report.stage("stats").status == "failed"
    assert isinstance(report.error, StageError) and report.error.stage == "stats"
    assert isinstance(report.error.cause, ConfigError) and "co2" in str(report.error.cause)
    assert results["table"].excluded == ("co2",)
    # later stages did not run and produced nothing
    assert report.stage("spatial").status == "pending" or report.stage("spatial").outputs == []
    files = {p.name for p in tmp_path.rglob("*")}
    assert not files & {"voronoi.svg", "voronoi.geojson", "evaluation.csv", "dbn_all.json"}
    assert REPORT_FILE in files
    doc = json.loads((tmp_path / REPORT_FILE).read_text())
    assert set(doc["hashes"]) == set(report.outputs) - {REPORT_FILE, "summary.txt"}
    with pytest.raises(StageError):
        run_pipeline(cfg, strict=True)


def test_partial_run_stops_at_stage(tmp_path):
    report, _ = run_pipeline(small(tmp_path), until="fuse")
    assert [s.name for s in report.stages] == ["synth", "validate", "fuse"]
    assert (tmp_path / "fused.csv").exists() and not (tmp_path / "correlation.csv").exists()


def test_three_site_svg(tmp_path):
    bundle = generate_synthetic_session(SynthConfig(duration_s=300.0), seed=1)
    t = np.arange(0, 301_000, 1000, dtype=np.int64)
    block = np.minimum(t // 100_000, 2)
    lat = 52.95 + 0.001 * np.array([0, 1, 2])[block]
    lon = -1.18 + 0.001 * np.array([0, 2, 1])[block]
    manifest = write_session(replace(bundle, geo=GeoTrace(t, lat, lon)), tmp_path / "session")
    report, results = run_pipeline(small(tmp_path / "out", manifest=str(manifest)), until="spatial")
    assert not report.failed
    root = ET.fromstring((tmp_path / "out" / "voronoi.svg").read_text())
    assert len(root.findall(".//{http://www.w3.org/2000/svg}polygon")) == 3
    geo = json.loads((tmp_path / "out" / "voronoi.geojson").read_text())
    assert len(geo["features"]) == 3


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        PipelineConfig(classifiers=["svm"])
    with pytest.raises(ConfigError):
        PipelineConfig(seed="7")
    with pytest.raises(ConfigError):
        PipelineConfig(synth={"duration_s": -1})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        PipelineConfig.load(bad)


def test_output_dir_precedence(tmp_path, monkeypatch):
    monkeypatch.delenv(OUT_ENV, raising=False)
    assert str(PipelineConfig().output_dir()) == DEFAULT_OUT
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    assert PipelineConfig().output_dir() == tmp_path / "env"
    assert PipelineConfig(out_dir=str(tmp_path / "flag")).output_dir() == tmp_path / "flag"


# -- CLI --------------------------------------------------------------------

def _write_config(tmp_path, **kw):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({**SMALL, **kw}))
    return str(path)


def test_cli_exit_codes(tmp_path, capsys):
    cfg = _write_config(tmp_path)
    assert cli.main(["fuse", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert "fuse" in capsys.readouterr().out
    bad = _write_config(tmp_path, synth={"duration_s": 300.0, "constant_channels": {"co2": 412.0}},
                        correlation_channels=["co2"])
    assert cli.main(["stats", "--config", bad, "--out", str(tmp_path / "b")]) == 1
    assert "co2" in capsys.readouterr().err
    (tmp_path / "broken.json").write_text("[]")
    assert cli.main(["run", "--config", str(tmp_path / "broken.json")]) == 2
    with pytest.raises(SystemExit):
        cli.main(["nonsense"])


def test_cli_flags_override_config(tmp_path):
    path = _write_config(tmp_path, seed=3, out_dir=str(tmp_path / "from_config"))
    args = cli.build_parser().parse_args(["validate", "--config", path, "--seed", "11",
                                          "--out", str(tmp_path / "from_flag")])
    cfg = cli.config_from_args(args)
    assert cfg.seed == 11 and cfg.output_dir() == tmp_path / "from_flag"
    args = cli.build_parser().parse_args(["validate", "--config", path])
    assert cli.config_from_args(args).seed == 3


def test_cli_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "envout"))
    assert cli.main(["validate", "--config", _write_config(tmp_path)]) == 0
    assert (tmp_path / "envout" / "validation.json").exists()
    assert (tmp_path / "envout" / "session").is_dir()


def test_cli_manifest_input(tmp_path):
    bundle = generate_synthetic_session(SynthConfig(duration_s=200.0), seed=5)
    manifest = write_session(bundle, tmp_path / "in")
    out = tmp_path / "out"
    assert cli.main(["fuse", "--manifest", str(manifest), "--out", str(out)]) == 0
    assert (out / "fused.csv").exists() and not (out / "session").exists()
