"""Command line front end.

Subcommands cover the full workflow: `run` executes one configured
experiment and writes the delimited/JSON artifacts plus figures, `convergence`
repeats a run across resolutions, `scatter` computes wave-operator defects,
`audit` replays the identity audits over stored snapshots, and the two
`check-*` commands certify the static ingredients (metric decay, multiplier
positivity) without evolving anything.

Exit codes: 0 success, 2 configuration error, 3 runtime failure
(instability, accuracy, blow-up), 4 an --assert check failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import PRESETS, RunConfig, preset_config
from .exceptions import (
    AccuracyError,
    BlowupError,
    CflError,
    ConfigError,
    DomainError,
    ParameterError,
)

_RUNTIME_ERRORS = (ParameterError, DomainError, AccuracyError, CflError, BlowupError)


def _emit(*parts) -> None:
    print(",".join(str(p) for p in parts))


def _flatten(blob, prefix=""):
    """Yield (dotted_key, scalar) pairs from nested dicts/lists."""
    if isinstance(blob, dict):
        for k in sorted(blob):
            yield from _flatten(blob[k], f"{prefix}{k}." if prefix else f"{k}.")
    elif isinstance(blob, (list, tuple)):
        yield prefix[:-1], ";".join(_fmt(v) for v in blob)
    else:
        yield prefix[:-1], _fmt(blob)


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def _load_config(args) -> RunConfig:
    if getattr(args, "preset", None):
        cfg = preset_config(args.preset)
    else:
        cfg = RunConfig.load(args.config)
    if getattr(args, "dr", None):
        blob = cfg.to_dict()
        blob["dr"] = args.dr
        cfg = RunConfig.from_dict(blob)
    return cfg


def _add_source(parser: argparse.ArgumentParser) -> None:
    src = parser.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="YAML run configuration")
    src.add_argument(
        "--preset", choices=sorted(PRESETS), help="named built-in configuration"
    )


def _write_json(path: Path, blob) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(blob, indent=2, sort_keys=True) + "\n")


# -- run ----------------------------------------------------------------------


def _cmd_run(args) -> int:
    from .runner import run_experiment

    cfg = _load_config(args)
    report = run_experiment(cfg, out_dir=args.out, plots=not args.no_plots)
    for key, val in _flatten(report.summary):
        _emit(key, val)
    if args.out:
        for f in report.files:
            _emit("file", f)
    if args.assert_tol is None:
        return 0
    return _run_assertions(report.summary, args.assert_tol)


def _run_assertions(summary: dict, tol: float) -> int:
    """PASS/FAIL lines for the apriori sanity checks; 4 on any FAIL."""
    checks = []
    drift = summary["energy"]["drift_rel"]
    checks.append(("energy_drift", abs(drift) <= 1e-2, drift))
    for name, blob in summary.get("audits", {}).items():
        rel = blob.get("residual_rel")
        if rel is not None:
            checks.append((f"audit_{name}", abs(rel) <= tol, rel))
        if "equivalence_ok" in blob:
            checks.append(
                (f"equivalence_{name}", bool(blob["equivalence_ok"]), blob["equivalence_ok"])
            )
    cone = summary.get("cone_check")
    if cone:
        checks.append(("cone_null_decay", bool(cone["null_ok"]), cone["sup_null_weighted"]))
        checks.append(("cone_h_decay", bool(cone["h_ok"]), cone["sup_h_weighted"]))
    cert = summary.get("certify")
    if cert:
        grew = [k for k, flag in cert.get("unbounded", {}).items() if flag]
        checks.append(("metric_decay_bounded", not grew, ";".join(grew) or "ok"))
    flux = summary.get("flux_windows", {})
    if len(flux) >= 2:
        vals = [flux[k] for k in flux]
        checks.append(("flux_decreasing", all(b < a for a, b in zip(vals, vals[1:])), vals[-1]))
    failed = False
    for name, ok, val in checks:
        _emit("assert", name, "PASS" if ok else "FAIL", _fmt(val))
        failed = failed or not ok
    return 4 if failed else 0


# -- convergence --------------------------------------------------------------


def _cmd_convergence(args) -> int:
    from .runner import convergence_study

    cfg = _load_config(args)
    study = convergence_study(cfg, args.resolutions, jobs=args.jobs)
    for dr, summ in zip(study["resolutions"], study["summaries"]):
        _emit("resolution", _fmt(dr), "drift", _fmt(summ["energy"]["drift_rel"]))
    for name, ratios in sorted(study["ratios"].items()):
        _emit("ratio", name, ";".join(_fmt(r) for r in ratios))
    if args.out:
        out = Path(args.out)
        trimmed = dict(study)
        _write_json(out / "convergence.json", trimmed)
        if not args.no_plots:
            from . import plots

            sources = {"energy_drift": [abs(s["energy"]["drift_rel"]) for s in study["summaries"]]}
            for name in study["ratios"]:
                if not name.startswith("audit_"):
                    continue
                key = name[len("audit_") :]
                vals = []
                for s in study["summaries"]:
                    rep = s.get("audits", {}).get(key, {})
                    v = rep.get("residual", rep.get("residual_interior"))
                    if v is not None:
                        vals.append(abs(v))
                if len(vals) == len(study["resolutions"]):
                    sources[name] = vals
            plots.plot_convergence(
                study["resolutions"], sources, out / "convergence.png"
            )
            _emit("file", "convergence.png")
        _emit("file", "convergence.json")
    return 0


# -- scatter ------------------------------------------------------------------


def _cmd_scatter(args) -> int:
    from .scattering import scattering_diagnostics

    cfg = _load_config(args)
    times = args.times if args.times else cfg.scatter_times
    if len(times) < 2:
        raise ConfigError("scatter_times", "need at least two capture times")
    metric = cfg.build_metric()
    initial = cfg.build_initial()
    rep = scattering_diagnostics(
        metric,
        initial,
        times,
        cfl=cfg.cfl,
        order=cfg.order,
        box_g=cfg.box_g,
        with_floor=not args.no_floor,
    )
    blob = rep.to_json()
    for key, val in _flatten(blob):
        _emit(key, val)
    if args.out:
        out = Path(args.out)
        _write_json(out / "scatter.json", blob)
        if not args.no_plots:
            from . import plots

            plots.plot_scatter_defects(blob, out / "scatter.png")
            _emit("file", "scatter.png")
        _emit("file", "scatter.json")
    if args.assert_tol is None:
        return 0
    bd = blob["backward_defects"]
    ok = all(b < a for a, b in zip(bd, bd[1:]))
    _emit("assert", "defects_decreasing", "PASS" if ok else "FAIL", _fmt(bd[-1]))
    return 0 if ok else 4


# -- audit replay -------------------------------------------------------------


def _cmd_audit(args) -> int:
    from .runner import replay_audits

    cfg = _load_config(args)
    paths = sorted(Path().glob(args.snapshots) if "*" in args.snapshots else Path(args.snapshots).glob("*.qws"))
    if not paths:
        raise ConfigError("snapshots", f"no snapshot files match {args.snapshots!r}")
    blob = replay_audits(cfg, paths, out_dir=args.out)
    for name in sorted(blob):
        rep = blob[name]
        val = rep.get("residual", rep.get("residual_interior"))
        _emit("audit", name, "residual", _fmt(val))
    return 0


# -- static certifications ----------------------------------------------------


def _parse_params(pairs) -> dict:
    params = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError("param", f"expected key=value, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            val = float(raw)
            if val == int(val) and "." not in raw and "e" not in raw.lower():
                val = int(raw)
        except ValueError:
            val = raw
        params[key.strip()] = val
    return params


def _cmd_check_metric(args) -> int:
    from .metric import SampleSpec, certify_decay, make_metric

    metric = make_metric(args.family, **_parse_params(args.param))
    spec = SampleSpec(t_max=args.t_max, r_max=args.r_max)
    report = certify_decay(metric, args.gamma, spec)
    blob = report.to_json()
    for name in sorted(blob["amplitudes"]):
        _emit("amplitude", name, _fmt(blob["amplitudes"][name]))
    for name in sorted(blob["unbounded"]):
        _emit("unbounded", name, blob["unbounded"][name])
    if args.out:
        _write_json(Path(args.out) / "decay.json", blob)
        _emit("file", "decay.json")
    if args.assert_tol is None:
        return 0
    grew = [k for k, f in blob["unbounded"].items() if f]
    _emit("assert", "decay_bounded", "FAIL" if grew else "PASS", ";".join(grew) or "ok")
    return 4 if grew else 0


def _cmd_check_multiplier(args) -> int:
    from .multipliers import (
        MultiplierProfile,
        a_weight,
        b_weight,
        certify_lower_bounds,
        dyadic_r_grid,
    )

    grid = dyadic_r_grid(r_max=args.r_top)
    all_ok = True
    blobs = {}
    for gamma in args.gamma:
        profile = MultiplierProfile(gamma=gamma)
        report = certify_lower_bounds(profile, grid)
        b1, _, _ = b_weight(profile, 1.0)
        a0, _ = a_weight(profile, 0.0)
        for name, inf in sorted(report.infima.items()):
            _emit("infimum", _fmt(gamma), name, _fmt(inf))
        _emit("value", _fmt(gamma), "b_at_1", _fmt(float(b1)))
        _emit("value", _fmt(gamma), "a_at_0", _fmt(float(a0)))
        _emit("value", _fmt(gamma), "c_value", _fmt(profile.c_value))
        _emit("certified", _fmt(gamma), report.certified)
        all_ok = all_ok and report.certified
        blobs[str(gamma)] = report.to_json()
    if args.out:
        _write_json(Path(args.out) / "multiplier.json", blobs)
        _emit("file", "multiplier.json")
    if args.assert_tol is None:
        return 0
    _emit("assert", "lower_bounds_positive", "PASS" if all_ok else "FAIL", all_ok)
    return 0 if all_ok else 4


# -- parser -------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quintwave",
        description="Radial quintic wave runs on perturbed backgrounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one configured experiment")
    _add_source(run)
    run.add_argument("--out", help="artifact directory (none: stdout only)")
    run.add_argument("--dr", type=float, help="override the grid spacing")
    run.add_argument("--no-plots", action="store_true")
    run.add_argument(
        "--assert",
        dest="assert_tol",
        nargs="?",
        const=0.05,
        default=None,
        type=float,
        metavar="TOL",
        help="check audit residuals against TOL (default 0.05); exit 4 on failure",
    )
    run.set_defaults(func=_cmd_run)

    conv = sub.add_parser("convergence", help="repeat a run across resolutions")
    _add_source(conv)
    conv.add_argument(
        "--resolutions",
        type=float,
        nargs="+",
        required=True,
        metavar="DR",
        help="grid spacings, coarse to fine",
    )
    conv.add_argument("--jobs", type=int, default=1)
    conv.add_argument("--out")
    conv.add_argument("--no-plots", action="store_true")
    conv.set_defaults(func=_cmd_convergence)

    scat = sub.add_parser("scatter", help="wave-operator defect diagnostics")
    _add_source(scat)
    scat.add_argument("--times", type=float, nargs="+", metavar="T")
    scat.add_argument("--out")
    scat.add_argument("--no-plots", action="store_true")
    scat.add_argument("--no-floor", action="store_true", help="skip the linear floor runs")
    scat.add_argument(
        "--assert",
        dest="assert_tol",
        nargs="?",
        const=0.0,
        default=None,
        type=float,
        metavar="TOL",
        help="require strictly decreasing pull-back defects",
    )
    scat.set_defaults(func=_cmd_scatter)

    aud = sub.add_parser("audit", help="replay identity audits over snapshots")
    _add_source(aud)
    aud.add_argument(
        "--snapshots",
        required=True,
        help="snapshot directory or glob of .qws files",
    )
    aud.add_argument("--out")
    aud.set_defaults(func=_cmd_audit)

    met = sub.add_parser("check-metric", help="certify decay amplitudes of a metric")
    met.add_argument("--family", required=True)
    met.add_argument(
        "--param",
        action="append",
        metavar="KEY=VALUE",
        help="metric parameter, repeatable",
    )
    met.add_argument("--gamma", type=float, default=0.1)
    met.add_argument("--t-max", type=float, default=40.0)
    met.add_argument("--r-max", type=float, default=50.0)
    met.add_argument("--out")
    met.add_argument(
        "--assert",
        dest="assert_tol",
        nargs="?",
        const=0.0,
        default=None,
        type=float,
        help="exit 4 if any amplitude grows with the sample box",
    )
    met.set_defaults(func=_cmd_check_metric)

    mul = sub.add_parser(
        "check-multiplier", help="certify positivity of the multiplier weights"
    )
    mul.add_argument("--gamma", type=float, nargs="+", default=[0.05, 0.1, 0.3])
    mul.add_argument(
        "--r-top", type=float, default=2.0**10, help="top of the dyadic radius range"
    )
    mul.add_argument("--out")
    mul.add_argument(
        "--assert",
        dest="assert_tol",
        nargs="?",
        const=0.0,
        default=None,
        type=float,
        help="exit 4 unless every sampled infimum is positive",
    )
    mul.set_defaults(func=_cmd_check_multiplier)

    pres = sub.add_parser("presets", help="list the built-in configurations")
    pres.set_defaults(func=_cmd_presets)

    return parser


def _cmd_presets(args) -> int:
    for name in sorted(PRESETS):
        cfg = preset_config(name)
        _emit("preset", name, cfg.metric, _fmt(cfg.dr), _fmt(cfg.t_final))
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _RUNTIME_ERRORS as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
