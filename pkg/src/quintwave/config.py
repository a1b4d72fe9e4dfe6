"""Run configuration: a YAML-serializable description of one experiment.

A RunConfig names the metric family, the initial data, the grid, the
evolution parameters, and which diagnostics to compute.  Loading and
saving round-trips losslessly (floats go through their shortest
round-trip representation), and every field is validated with the
offending field name attached to the error.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .exceptions import ConfigError
from .grid import FieldState, RadialGrid
from .metric import MetricField, make_metric
from .solver import EvolutionSpec, make_data


@dataclass
class RunConfig:
    label: str = "run"
    # metric
    metric: str = "flat"
    metric_params: dict = field(default_factory=dict)
    # initial data
    data: str = "gaussian"
    data_params: dict = field(default_factory=lambda: {"amplitude": 1.0, "sigma": 1.0})
    forcing: Optional[str] = None  # "manufactured" drives the MMS source
    # grid
    dr: float = 0.02
    r_max: float = 30.0
    # evolution
    t_final: float = 10.0
    cfl: float = 0.45
    order: int = 2
    nonlinear: bool = True
    box_g: bool = False
    # diagnostics
    gamma: float = 0.1
    series_every: int = 1
    cone_c: Optional[float] = None
    audit_window: Optional[list] = None     # [t1, t2]
    flux_windows: list = field(default_factory=list)   # [[t1, t2], ...]
    l6_times: list = field(default_factory=list)
    snapshot_times: list = field(default_factory=list)
    scatter_times: list = field(default_factory=list)
    duhamel_budget: int = 0                 # 0 disables the Duhamel check
    main_estimate: Optional[list] = None    # [t1, r_shell, t2]

    def __post_init__(self):
        # numpy scalars sneak in easily and break YAML emission
        for name in _FLOATS:
            val = getattr(self, name)
            if val is not None:
                setattr(self, name, float(val))
        for name in _INTS:
            setattr(self, name, int(getattr(self, name)))
        for name in _FLOAT_LISTS | {"audit_window"}:
            val = getattr(self, name)
            if val is not None:
                setattr(self, name, [float(x) for x in val])
        self.flux_windows = [[float(x) for x in w] for w in self.flux_windows]
        self.validate()

    def validate(self):
        def bad(fieldname, msg):
            raise ConfigError(fieldname, msg)

        if not isinstance(self.label, str) or not self.label:
            bad("label", "must be a nonempty string")
        if self.dr <= 0.0:
            bad("dr", "must be positive")
        if self.r_max < 8.0 * self.dr:
            bad("r_max", "must cover at least eight cells")
        if self.t_final <= 0.0:
            bad("t_final", "must be positive")
        if not 0.0 < self.cfl <= 0.95:
            bad("cfl", "must lie in (0, 0.95]")
        if self.order not in (2, 4):
            bad("order", "must be 2 or 4")
        if not 0.0 < self.gamma <= 1.0:
            bad("gamma", "must lie in (0, 1]")
        if self.series_every < 1:
            bad("series_every", "must be a positive integer")
        if self.duhamel_budget < 0:
            bad("duhamel_budget", "must be nonnegative")
        if self.forcing not in (None, "manufactured"):
            bad("forcing", "must be null or 'manufactured'")
        if self.audit_window is not None:
            w = self.audit_window
            if len(w) != 2 or not w[0] < w[1]:
                bad("audit_window", "must be [t1, t2] with t1 < t2")
            if w[1] > self.t_final + 1e-9:
                bad("audit_window", "must end by t_final")
            if self.cone_c is None:
                bad("cone_c", "required when audit_window is set")
        for w in self.flux_windows:
            if len(w) != 2 or not w[0] < w[1] or w[1] > self.t_final + 1e-9:
                bad("flux_windows", f"bad window {w}")
        if self.flux_windows and self.cone_c is None:
            bad("cone_c", "required when flux_windows are set")
        if self.cone_c is not None and self.cone_c <= 0.0:
            bad("cone_c", "must be positive")
        for name, times in (
            ("l6_times", self.l6_times),
            ("snapshot_times", self.snapshot_times),
            ("scatter_times", self.scatter_times),
        ):
            if any(t < 0.0 or t > self.t_final + 1e-9 for t in times):
                bad(name, "times must lie in [0, t_final]")
        if self.scatter_times and len(self.scatter_times) < 2:
            bad("scatter_times", "need at least two times")
        if self.scatter_times and self.forcing is not None:
            bad("scatter_times", "scattering diagnostics need an unforced run")
        if self.main_estimate is not None:
            m = self.main_estimate
            if len(m) != 3 or not (0.0 < m[0] < m[2] <= self.t_final + 1e-9) or m[1] <= 0.0:
                bad("main_estimate", "must be [t1, r_shell, t2], 0 < t1 < t2 <= t_final")
        try:
            make_metric(self.metric, **self.metric_params)
        except Exception as exc:
            bad("metric", str(exc))
        if self.data not in _KNOWN_DATA:
            bad("data", f"unknown family {self.data!r}; choose from {sorted(_KNOWN_DATA)}")

    # -- construction helpers ----------------------------------------------

    def build_metric(self) -> MetricField:
        return make_metric(self.metric, **self.metric_params)

    def build_grid(self) -> RadialGrid:
        return RadialGrid(dr=self.dr, n_cells=round(self.r_max / self.dr))

    def build_initial(self, grid: Optional[RadialGrid] = None) -> FieldState:
        grid = grid or self.build_grid()
        if self.forcing == "manufactured":
            return self._manufactured().exact_state(0.0, grid)
        return make_data(grid, self.data, **self.data_params)

    def _manufactured(self):
        from .solver import ManufacturedSolution

        params = dict(self.data_params)
        return ManufacturedSolution(self.build_metric(), box_g=self.box_g, **params)

    def build_forcing(self):
        if self.forcing == "manufactured":
            return self._manufactured().forcing
        return None

    def build_spec(self, dt: Optional[float] = None) -> EvolutionSpec:
        return EvolutionSpec(
            metric=self.build_metric(),
            initial=self.build_initial(),
            t_final=self.t_final,
            cfl=self.cfl,
            nonlinear=self.nonlinear,
            forcing=self.build_forcing(),
            order=self.order,
            box_g=self.box_g,
            dt=dt,
        )

    # -- (de)serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("", "config root must be a mapping")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - names)
        if unknown:
            raise ConfigError(unknown[0], f"unknown config keys: {unknown}")
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name not in raw:
                continue
            kwargs[f.name] = _coerce(f.name, raw[f.name])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError("", str(exc)) from None

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(yaml.safe_dump(self.to_dict(), sort_keys=True))
        return path

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("path", f"cannot read {path}: {exc}") from None
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError("", f"invalid YAML in {path}: {exc}") from None
        return cls.from_dict(raw or {})


_KNOWN_DATA = {"gaussian", "dalembert", "outgoing", "bump", "zero"}

_FLOATS = {"dr", "r_max", "t_final", "cfl", "gamma", "cone_c"}
_INTS = {"order", "series_every", "duhamel_budget"}
_BOOLS = {"nonlinear", "box_g"}
_FLOAT_LISTS = {"l6_times", "snapshot_times", "scatter_times", "main_estimate"}
_WINDOW_LISTS = {"flux_windows"}


def _coerce(name: str, value):
    """Nudge YAML scalars to the declared field types, loudly on mismatch."""
    def bad(msg):
        raise ConfigError(name, msg)

    if value is None:
        return None
    try:
        if name in _FLOATS:
            return float(value)
        if name in _INTS:
            if isinstance(value, float) and value != int(value):
                bad("must be an integer")
            return int(value)
        if name in _BOOLS:
            if not isinstance(value, bool):
                bad("must be true or false")
            return value
        if name in _FLOAT_LISTS or name == "audit_window":
            return [float(x) for x in value]
        if name in _WINDOW_LISTS:
            return [[float(x) for x in w] for w in value]
    except (TypeError, ValueError):
        bad(f"cannot interpret {value!r}")
    return value


# -- presets ---------------------------------------------------------------------

PRESETS = {
    "minkowski-reference": dict(
        label="minkowski-reference",
        metric="flat",
        data="gaussian",
        data_params={"amplitude": 1.0, "sigma": 1.0},
        dr=0.02,
        r_max=56.0,
        t_final=40.0,
        gamma=0.1,
        cone_c=2.0,
        audit_window=[5.0, 40.0],
        flux_windows=[[5.0, 10.0], [10.0, 20.0], [20.0, 40.0]],
        l6_times=[10.0, 20.0, 40.0],
        main_estimate=[5.0, 5.0, 40.0],
    ),
    "family-a": dict(
        label="family-a",
        metric="a",
        metric_params={"eps": 0.05, "gamma": 0.1},
        data="gaussian",
        data_params={"amplitude": 1.0, "sigma": 1.0},
        dr=0.02,
        r_max=56.0,
        t_final=40.0,
        gamma=0.1,
        cone_c=2.0,
        audit_window=[5.0, 40.0],
        flux_windows=[[5.0, 10.0], [10.0, 20.0], [20.0, 40.0]],
        l6_times=[10.0, 20.0, 40.0],
        main_estimate=[5.0, 5.0, 40.0],
    ),
    "family-b": dict(
        label="family-b",
        metric="b",
        metric_params={"eps": 0.05, "gamma": 0.1, "r_on": 2.0, "r_off": 4.0},
        data="gaussian",
        data_params={"amplitude": 1.0, "sigma": 1.0},
        dr=0.02,
        r_max=40.0,
        t_final=20.0,
        gamma=0.1,
        cone_c=5.0,
        audit_window=[5.0, 20.0],
    ),
    "family-c": dict(
        label="family-c",
        metric="c",
        metric_params={"floor": 0.2, "depth": 24.0, "width": 4.0, "t_ramp": 20.0},
        data="gaussian",
        data_params={"amplitude": 1.0, "sigma": 1.0},
        dr=0.02,
        r_max=56.0,
        t_final=40.0,
        gamma=0.1,
        l6_times=[10.0, 20.0, 40.0],
    ),
    "smoke": dict(
        label="smoke",
        metric="flat",
        data="gaussian",
        data_params={"amplitude": 1.0, "sigma": 1.0},
        dr=0.05,
        r_max=18.0,
        t_final=5.0,
        cone_c=2.0,
        audit_window=[1.0, 5.0],
        flux_windows=[[1.0, 3.0]],
        l6_times=[2.0, 5.0],
    ),
}


def preset_config(name: str) -> RunConfig:
    try:
        kwargs = PRESETS[name]
    except KeyError:
        raise ConfigError(
            "preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}"
        ) from None
    return RunConfig(**{k: (dict(v) if isinstance(v, dict) else v) for k, v in kwargs.items()})
