"""Experiment orchestration: one config in, one report directory out.

run_experiment wires the observers declared by a RunConfig into a single
forward evolution, then writes a deterministic set of artifacts:

    config_echo.yaml   exact configuration that ran
    series.csv         per-step scalar diagnostics
    audits.json        full audit reports
    summary.json       headline numbers
    manifest.json      file list (no timestamps, reproducible)
    snapshots/*.qws    binary states at requested times
    figures/*.png      rendered plots (report path only)

With out_dir=None nothing is written and the report is returned
in-memory, which is what the convergence driver uses.
"""

from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import RunConfig
from .exceptions import ConfigError, DomainError
from .functionals import (
    ConformalAudit,
    DiagnosticSeries,
    EnergyFluxAudit,
    FluxMeter,
    MainEstimateAudit,
    MultiplierAudit,
    SeriesRecorder,
    cone_hypothesis_check,
    replay,
    uniform_bound_ratio,
)
from .grid import ConeRegion
from .metric import SampleSpec, certify_decay
from .multipliers import MultiplierProfile
from .scattering import SliceCapture, scattering_diagnostics
from .snapshots import load_state, save_state
from .solver import (
    aligned_timestep,
    duhamel_residual,
    estimate_max_speed,
    evolve,
)


@dataclass
class RunReport:
    config: RunConfig
    summary: dict
    series: DiagnosticSeries
    audits: dict
    out_dir: Optional[Path]
    files: list


def _anchor_times(config: RunConfig) -> list:
    anchors = set()
    if config.audit_window:
        anchors.update(config.audit_window)
    for w in config.flux_windows:
        anchors.update(w)
    anchors.update(config.l6_times)
    anchors.update(config.snapshot_times)
    if config.main_estimate:
        anchors.update((config.main_estimate[0], config.main_estimate[2]))
    return sorted(t for t in anchors if t > 0.0)


def run_experiment(
    config: RunConfig,
    out_dir=None,
    plots: bool = True,
    dt: Optional[float] = None,
) -> RunReport:
    metric = config.build_metric()
    grid = config.build_grid()
    initial = config.build_initial(grid)
    forcing = config.build_forcing()

    c_max = estimate_max_speed(metric, grid, 0.0, config.t_final)
    if dt is None:
        dt = aligned_timestep(
            config.t_final, config.cfl * grid.dr / c_max, _anchor_times(config)
        )
    n_steps = round(config.t_final / dt)

    recorder = SeriesRecorder(gamma=config.gamma, every=config.series_every,
                              order=config.order)
    observers: list = [recorder]
    audit_objs: dict = {}
    if config.audit_window:
        cone = ConeRegion(
            c=config.cone_c, t1=config.audit_window[0], t2=config.audit_window[1]
        )
        audit_objs["energy_flux"] = EnergyFluxAudit(
            metric, cone, gamma=config.gamma, nonlinear=config.nonlinear,
            forcing=forcing, order=config.order,
        )
        audit_objs["conformal"] = ConformalAudit(
            metric, cone, nonlinear=config.nonlinear, forcing=forcing,
            order=config.order,
        )
        audit_objs["multiplier"] = MultiplierAudit(
            metric, *config.audit_window,
            profile=MultiplierProfile(gamma=config.gamma),
            nonlinear=config.nonlinear, forcing=forcing, order=config.order,
        )
    if config.main_estimate:
        t1, r_shell, t2 = config.main_estimate
        audit_objs["main_estimate"] = MainEstimateAudit(
            metric, t1, t2, r_shell, gamma=config.gamma,
            nonlinear=config.nonlinear, forcing=forcing, order=config.order,
        )
    flux_meter = None
    if config.flux_windows:
        flux_meter = FluxMeter(config.cone_c, config.flux_windows, order=config.order)
        observers.append(flux_meter)
    capture = None
    if config.snapshot_times:
        capture = SliceCapture(config.snapshot_times)
        observers.append(capture)
    observers.extend(audit_objs.values())

    store_every = 10**9
    if config.duhamel_budget >= 4:
        store_every = max(1, n_steps // 256)
    spec = dataclasses.replace(
        config.build_spec(dt=dt), store_every=store_every
    )
    result = evolve(spec, observers=observers)

    series = recorder.series()
    audits = {name: obj.report() for name, obj in audit_objs.items()}

    summary: dict = {
        "label": config.label,
        "package_version": __version__,
        "dr": grid.dr,
        "dt": dt,
        "n_steps": result.n_steps,
        "r_max": grid.r_max,
        "max_speed_seen": result.max_speed_seen,
    }
    e0 = series.at("energy", 0.0)
    e_final = series.at("energy", config.t_final)
    summary["energy"] = {
        "initial": e0,
        "final": e_final,
        "drift_rel": abs(e_final - e0) / max(e0, 1e-300),
    }
    if config.l6_times:
        summary["l6"] = {f"{t:g}": series.at("l6", t) for t in config.l6_times}
        summary["uniform_bound"] = {
            f"{t:g}": uniform_bound_ratio(series, t) for t in config.l6_times
        }
    if flux_meter is not None:
        fluxes = flux_meter.fluxes()
        summary["flux_windows"] = {f"{a:g}-{b:g}": v for (a, b), v in fluxes.items()}
    summary["audits"] = {
        name: {
            k: getattr(rep, k)
            for k in ("residual", "residual_rel", "residual_interior", "k_ratio")
            if hasattr(rep, k)
        }
        for name, rep in audits.items()
    }

    cert = certify_decay(
        metric, config.gamma,
        SampleSpec(t_max=config.t_final, r_max=grid.r_max),
    )
    summary["certify"] = cert.to_json()
    if config.cone_c is not None and config.audit_window:
        summary["cone_check"] = cone_hypothesis_check(
            metric,
            ConeRegion(c=config.cone_c, t1=config.audit_window[0],
                       t2=config.audit_window[1]),
            config.gamma,
            cert.amplitudes,
        ).to_json()

    if config.duhamel_budget >= 4:
        dham = duhamel_residual(
            metric, result, budget=config.duhamel_budget,
            order=config.order, box_g=config.box_g,
        )
        summary["duhamel"] = dham.to_json()
    if config.scatter_times:
        scat = scattering_diagnostics(
            metric, initial, config.scatter_times,
            cfl=config.cfl, order=config.order, box_g=config.box_g,
        )
        blob = scat.to_json()
        summary["scatter"] = blob
        audits["scatter"] = scat

    files: list = []
    out_path: Optional[Path] = None
    if out_dir is not None:
        out_path = Path(out_dir)
        out_path.mkdir(parents=True, exist_ok=True)
        config.save(out_path / "config_echo.yaml")
        files.append("config_echo.yaml")
        series.to_csv(out_path / "series.csv")
        files.append("series.csv")
        audit_blob = {
            name: rep.to_json() for name, rep in audits.items() if hasattr(rep, "to_json")
        }
        (out_path / "audits.json").write_text(_dumps(audit_blob))
        files.append("audits.json")
        if capture is not None:
            snap_dir = out_path / "snapshots"
            snap_dir.mkdir(exist_ok=True)
            for state in capture.states():
                name = f"snapshots/state_t{state.t:09.4f}.qws"
                save_state(out_path / name, state)
                files.append(name)
                files.append(name + ".json")
        if plots:
            from .plots import render_run_figures

            fig_dir = out_path / "figures"
            fig_dir.mkdir(exist_ok=True)
            flux_data = summary.get("flux_windows")
            scat_data = summary.get("scatter")
            files.extend(
                render_run_figures(series, flux_data, scat_data, fig_dir)
            )
        (out_path / "summary.json").write_text(_dumps(summary))
        files.append("summary.json")
        manifest = {
            "label": config.label,
            "package_version": __version__,
            "files": sorted(files + ["manifest.json"]),
        }
        (out_path / "manifest.json").write_text(_dumps(manifest))
        files = manifest["files"]

    return RunReport(
        config=config, summary=summary, series=series, audits=audits,
        out_dir=out_path, files=files,
    )


def _dumps(blob) -> str:
    return json.dumps(blob, indent=2, sort_keys=True) + "\n"


# -- convergence driver -----------------------------------------------------------


def _convergence_worker(payload: dict) -> dict:
    cfg = RunConfig.from_dict(payload)
    return run_experiment(cfg, out_dir=None, plots=False).summary


def convergence_study(
    config: RunConfig, resolutions: Sequence[float], jobs: int = 1
) -> dict:
    """Repeats one experiment across grid resolutions and forms ratios.

    Resolutions are processed coarse to fine in the given order; with
    jobs > 1 the runs execute in separate processes but results keep the
    submission order.
    """
    if len(resolutions) < 2:
        raise ConfigError("resolutions", "need at least two resolutions")
    payloads = []
    for dr in resolutions:
        d = config.to_dict()
        d["dr"] = float(dr)
        payloads.append(d)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_convergence_worker, payloads))
    else:
        summaries = [_convergence_worker(p) for p in payloads]

    ratios: dict = {}

    def series_of(path: tuple):
        vals = []
        for s in summaries:
            node = s
            for key in path:
                if node is None or key not in node:
                    return None
                node = node[key]
            vals.append(abs(float(node)))
        return vals

    candidates = {
        "energy_drift": ("energy", "drift_rel"),
        "audit_energy_flux": ("audits", "energy_flux", "residual_interior"),
        "audit_conformal": ("audits", "conformal", "residual"),
        "audit_multiplier": ("audits", "multiplier", "residual"),
    }
    for name, path in candidates.items():
        vals = series_of(path)
        if vals is None:
            continue
        ratios[name] = [
            vals[i] / max(vals[i + 1], 1e-300) for i in range(len(vals) - 1)
        ]
    return {
        "resolutions": [float(dr) for dr in resolutions],
        "summaries": summaries,
        "ratios": ratios,
    }


# -- snapshot replay --------------------------------------------------------------


def replay_audits(config: RunConfig, snapshot_paths: Sequence, out_dir=None) -> dict:
    """Re-runs the configured audits over stored snapshot files.

    The snapshots must share one grid, be uniformly spaced in time no
    coarser than dr, and cover the audit window including its endpoints.
    """
    if not config.audit_window or config.cone_c is None:
        raise ConfigError("audit_window", "replay needs audit_window and cone_c")
    paths = sorted(Path(p) for p in snapshot_paths)
    if not paths:
        raise ConfigError("snapshots", "no snapshot files given")
    states = [load_state(p) for p in paths]
    g0 = states[0].grid
    for s in states[1:]:
        if s.grid.dr != g0.dr or s.grid.n_cells != g0.n_cells:
            raise DomainError("snapshots live on different grids")
    states.sort(key=lambda s: s.t)

    metric = config.build_metric()
    forcing = config.build_forcing()
    cone = ConeRegion(
        c=config.cone_c, t1=config.audit_window[0], t2=config.audit_window[1]
    )
    audit_objs = {
        "energy_flux": EnergyFluxAudit(
            metric, cone, gamma=config.gamma, nonlinear=config.nonlinear,
            forcing=forcing, order=config.order,
        ),
        "conformal": ConformalAudit(
            metric, cone, nonlinear=config.nonlinear, forcing=forcing,
            order=config.order,
        ),
        "multiplier": MultiplierAudit(
            metric, *config.audit_window,
            profile=MultiplierProfile(gamma=config.gamma),
            nonlinear=config.nonlinear, forcing=forcing, order=config.order,
        ),
    }
    replay(states, list(audit_objs.values()))
    blob = {name: obj.report().to_json() for name, obj in audit_objs.items()}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "audits.json").write_text(_dumps(blob))
    return blob
