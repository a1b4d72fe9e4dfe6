"""Configuration round-trips and the experiment runner's artifact contract."""

import json

import numpy as np
import pytest

from quintwave.config import PRESETS, RunConfig, preset_config
from quintwave.exceptions import AccuracyError, ConfigError, DomainError
from quintwave.functionals import DiagnosticSeries
from quintwave.grid import RadialGrid
from quintwave.runner import convergence_study, replay_audits, run_experiment
from quintwave.snapshots import save_state
from quintwave.solver import make_data


# -- configuration ------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_dict_round_trip(name):
    cfg = preset_config(name)
    again = RunConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_yaml_round_trip(name, tmp_path):
    cfg = preset_config(name)
    path = cfg.save(tmp_path / f"{name}.yaml")
    assert RunConfig.load(path).to_dict() == cfg.to_dict()


def test_unknown_preset_names_the_field():
    with pytest.raises(ConfigError) as err:
        preset_config("zzz")
    assert err.value.field == "preset"


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"drr": 0.1}, "drr"),
        ({"dr": -1.0}, "dr"),
        ({"dr": 5.0, "r_max": 30.0}, "r_max"),
        ({"order": 3}, "order"),
        ({"order": 2.5}, "order"),
        ({"metric": "zzz"}, "metric"),
        ({"data": "zzz"}, "data"),
        ({"audit_window": [3.0]}, "audit_window"),
        ({"audit_window": [1.0, 5.0]}, "cone_c"),
        ({"cone_c": 2.0, "audit_window": [1.0, 99.0]}, "audit_window"),
        ({"flux_windows": [[1.0, 3.0]]}, "cone_c"),
        ({"nonlinear": "yes"}, "nonlinear"),
        ({"cfl": 0.0}, "cfl"),
        ({"cfl": 1.2}, "cfl"),
        ({"gamma": 0.0}, "gamma"),
        ({"scatter_times": [2.0]}, "scatter_times"),
        ({"scatter_times": [2.0, 4.0], "forcing": "manufactured"}, "scatter_times"),
        ({"main_estimate": [5.0, 5.0]}, "main_estimate"),
        ({"l6_times": [99.0]}, "l6_times"),
        ({"series_every": 0}, "series_every"),
        ({"label": ""}, "label"),
    ],
)
def test_bad_config_names_offending_field(patch, field):
    blob = preset_config("smoke").to_dict()
    blob.pop("audit_window")
    blob.pop("flux_windows")
    blob.pop("cone_c")
    blob.update(patch)
    with pytest.raises(ConfigError) as err:
        RunConfig.from_dict(blob)
    assert err.value.field == field


def test_numpy_scalars_are_normalized(tmp_path):
    cfg = RunConfig(
        dr=np.float64(0.1),
        r_max=np.float64(12.0),
        t_final=np.float64(2.0),
        order=np.int64(2),
        snapshot_times=list(np.arange(0.5, 2.0, 0.5)),
    )
    assert type(cfg.dr) is float
    assert type(cfg.order) is int
    assert all(type(t) is float for t in cfg.snapshot_times)
    # the real test: YAML emission chokes on numpy scalars
    cfg.save(tmp_path / "np.yaml")


def test_load_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError) as err:
        RunConfig.load(tmp_path / "absent.yaml")
    assert err.value.field == "path"


def test_load_invalid_yaml_is_config_error(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("dr: [unclosed\n")
    with pytest.raises(ConfigError):
        RunConfig.load(path)


def test_build_helpers_agree_with_fields():
    cfg = preset_config("smoke")
    grid = cfg.build_grid()
    assert grid.dr == cfg.dr
    assert abs(grid.r_max - cfg.r_max) < 1e-12
    state = cfg.build_initial(grid)
    assert state.t == 0.0
    assert state.u.shape == (grid.n_nodes,)
    assert cfg.build_forcing() is None


# -- run_experiment -----------------------------------------------------------


@pytest.fixture(scope="module")
def smoke_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("smoke_run")
    report = run_experiment(preset_config("smoke"), out_dir=out, plots=True)
    return report, out


EXPECTED_FILES = [
    "audits.json",
    "config_echo.yaml",
    "figures/flux.png",
    "figures/series.png",
    "manifest.json",
    "series.csv",
    "summary.json",
]


def test_manifest_lists_exactly_the_artifacts(smoke_run):
    report, out = smoke_run
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["files"] == EXPECTED_FILES
    assert manifest["label"] == "smoke"
    for name in manifest["files"]:
        assert (out / name).is_file(), name
        assert (out / name).stat().st_size > 0, name


def test_summary_structure_and_values(smoke_run):
    report, _ = smoke_run
    s = report.summary
    assert s["label"] == "smoke"
    assert s["dr"] == 0.05
    assert s["n_steps"] * s["dt"] == pytest.approx(5.0, rel=1e-12)
    drift = s["energy"]["drift_rel"]
    assert 1e-4 < drift < 5e-3
    # audit residuals for the smoke window, relative to their own scales
    for name in ("energy_flux", "conformal", "multiplier"):
        assert abs(s["audits"][name]["residual_rel"]) < 5e-3, name
    assert s["cone_check"]["null_ok"] and s["cone_check"]["h_ok"]
    assert not any(s["certify"]["unbounded"].values())
    assert set(s["l6"]) == {"2", "5"}
    assert s["l6"]["5"] < s["l6"]["2"]
    assert s["flux_windows"]["1-3"] > 0.0


def test_series_csv_round_trips(smoke_run):
    report, out = smoke_run
    loaded = DiagnosticSeries.from_csv(out / "series.csv")
    assert list(loaded.columns) == list(report.series.columns)
    for name in loaded.columns:
        np.testing.assert_allclose(
            loaded.columns[name], report.series.columns[name], atol=1e-12
        )


def test_summary_json_matches_report(smoke_run):
    report, out = smoke_run
    on_disk = json.loads((out / "summary.json").read_text())
    assert on_disk["energy"]["drift_rel"] == pytest.approx(
        report.summary["energy"]["drift_rel"], rel=1e-12
    )
    assert sorted(on_disk) == sorted(report.summary)


def test_no_output_directory_writes_nothing(smoke_run):
    report_again = run_experiment(preset_config("smoke"), out_dir=None, plots=False)
    assert report_again.files == []
    assert report_again.out_dir is None
    # determinism: identical run, identical numbers
    ref, _ = smoke_run
    assert report_again.summary["energy"]["final"] == ref.summary["energy"]["final"]
    assert (
        report_again.summary["audits"]["conformal"]["residual"]
        == ref.summary["audits"]["conformal"]["residual"]
    )


# -- snapshots + replay -------------------------------------------------------


@pytest.fixture(scope="module")
def snapshot_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("snapshot_run")
    blob = preset_config("smoke").to_dict()
    blob["snapshot_times"] = [round(t, 4) for t in np.arange(1.0, 5.0 + 1e-9, 0.05)]
    cfg = RunConfig.from_dict(blob)
    report = run_experiment(cfg, out_dir=out, plots=False)
    return cfg, report, out


def test_snapshot_files_named_by_time(snapshot_run):
    _, report, out = snapshot_run
    snaps = sorted((out / "snapshots").glob("*.qws"))
    assert len(snaps) == 81
    assert snaps[0].name == "state_t0001.0000.qws"
    assert snaps[-1].name == "state_t0005.0000.qws"
    # sidecars ride along
    assert all(p.with_suffix(".qws.json").exists() for p in snaps)


def test_replay_matches_streaming_audits(snapshot_run):
    cfg, report, out = snapshot_run
    paths = sorted((out / "snapshots").glob("*.qws"))
    blob = replay_audits(cfg, paths)
    for name, streamed in report.summary["audits"].items():
        key = "residual" if "residual" in streamed else "residual_interior"
        assert blob[name][key] == pytest.approx(streamed[key], rel=2e-2, abs=1e-6)


def test_replay_requires_audit_window(snapshot_run):
    _, _, out = snapshot_run
    paths = sorted((out / "snapshots").glob("*.qws"))
    bare = RunConfig(dr=0.05, r_max=18.0, t_final=5.0)
    with pytest.raises(ConfigError) as err:
        replay_audits(bare, paths)
    assert err.value.field == "audit_window"


def test_replay_rejects_mixed_grids(snapshot_run, tmp_path):
    cfg, _, out = snapshot_run
    paths = sorted((out / "snapshots").glob("*.qws"))[:4]
    other = make_data(RadialGrid(dr=0.1, n_cells=100), "gaussian")
    alien = tmp_path / "alien.qws"
    save_state(alien, other)
    with pytest.raises(DomainError):
        replay_audits(cfg, list(paths) + [alien])


def test_replay_rejects_coarse_spacing(snapshot_run, tmp_path):
    cfg, _, out = snapshot_run
    # every other snapshot: spacing 0.1 > dr = 0.05
    paths = sorted((out / "snapshots").glob("*.qws"))[::2]
    with pytest.raises(AccuracyError):
        replay_audits(cfg, paths)


# -- convergence orchestration --------------------------------------------------


@pytest.fixture(scope="module")
def smoke_study():
    return convergence_study(preset_config("smoke"), [0.1, 0.05], jobs=1)


def test_convergence_ratios_near_second_order(smoke_study):
    ratios = smoke_study["ratios"]
    for name in ("energy_drift", "audit_energy_flux", "audit_conformal", "audit_multiplier"):
        assert len(ratios[name]) == 1
        assert 3.4 < ratios[name][0] < 4.6, name


def test_convergence_parallel_matches_serial(smoke_study):
    parallel = convergence_study(preset_config("smoke"), [0.1, 0.05], jobs=2)
    assert parallel["resolutions"] == smoke_study["resolutions"]
    assert parallel["ratios"] == smoke_study["ratios"]


def test_convergence_needs_two_resolutions():
    with pytest.raises(ConfigError):
        convergence_study(preset_config("smoke"), [0.1])
