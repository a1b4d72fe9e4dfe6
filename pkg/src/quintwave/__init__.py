"""Numerical laboratory for the energy-critical quintic wave equation.

Radially symmetric solver for the quasilinear-coefficient wave equation
g^{00} u_tt + ... = u^5 (+ F) on small asymptotically flat perturbations
of the flat metric, plus the decay and scattering diagnostics built on
top of it: uniform energy bounds, integrated local energy decay,
light-cone flux decay, pointwise-in-time L^6 decay, and Duhamel /
scattering defects.
"""

from importlib import import_module

__version__ = "0.1.0"

# public name -> submodule, resolved lazily so light imports stay light
_EXPORTS = {
    "AccuracyError": "exceptions",
    "BlowupError": "exceptions",
    "CflError": "exceptions",
    "ConfigError": "exceptions",
    "DomainError": "exceptions",
    "ParameterError": "exceptions",
    "MetricField": "metric",
    "make_metric": "metric",
    "certify_decay": "metric",
    "MultiplierProfile": "multipliers",
    "certify_lower_bounds": "multipliers",
    "RadialGrid": "grid",
    "FieldState": "grid",
    "ConeRegion": "grid",
    "energy_norms": "grid",
    "cone_interpolate": "grid",
    "save_state": "snapshots",
    "load_state": "snapshots",
    "EvolutionSpec": "solver",
    "evolve": "solver",
    "backward_linear": "solver",
    "make_data": "solver",
    "ManufacturedSolution": "solver",
    "duhamel_residual": "solver",
    "aligned_timestep": "solver",
    "SeriesRecorder": "functionals",
    "DiagnosticSeries": "functionals",
    "EnergyFluxAudit": "functionals",
    "ConformalAudit": "functionals",
    "MultiplierAudit": "functionals",
    "MainEstimateAudit": "functionals",
    "cone_hypothesis_check": "functionals",
    "flux_through_cone": "functionals",
    "le1_norm_sq": "functionals",
    "replay": "functionals",
    "uniform_bound_ratio": "functionals",
    "RunConfig": "config",
    "run_experiment": "runner",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name):
    try:
        module = _EXPORTS[name]
    except KeyError:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}") from None
    return getattr(import_module(f".{module}", __name__), name)


def __dir__():
    return __all__
