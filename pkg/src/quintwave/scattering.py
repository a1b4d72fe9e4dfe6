"""Scattering diagnostics: does the solution settle into a free wave?

The candidate scattering datum is the nonlinear state at a late time
pulled back to t = 0 with the *linear* flow, w_T = S(0, T) u(T).  If the
solution scatters, w_T is Cauchy in T in the free energy metric, and
pushing the latest w_T forward linearly should shadow the nonlinear
solution ever better.  Both defects are measured here, together with a
discretization floor from running the identical pipeline on the linear
equation, where every defect is pure scheme noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import AccuracyError, ParameterError
from .grid import FieldState, RadialGrid
from .metric import MetricField
from .solver import (
    EvolutionSpec,
    aligned_timestep,
    backward_linear,
    estimate_max_speed,
    evolve,
)

_T_TOL = 1e-9


def free_energy_distance(a: FieldState, b: FieldState, order: int = 2) -> float:
    """Distance in the free energy norm, sqrt(|d_r du|^2/2 + |dv|^2/2).

    The quintic potential term is omitted: differences of states are not
    solutions and the scattering comparison lives in H^1 x L^2.
    """
    if a.grid is not b.grid and (a.grid.dr != b.grid.dr or a.grid.n_cells != b.grid.n_cells):
        raise ParameterError("states live on different grids")
    du_r = a.grid.diff1(a.u - b.u, order)
    dv = a.v - b.v
    return math.sqrt(0.5 * a.grid.integrate(du_r**2 + dv**2))


class SliceCapture:
    """Observer keeping the states whose times match a given list."""

    def __init__(self, times: Sequence[float]):
        self.times = sorted(float(t) for t in times)
        self.found: dict = {}

    def observe(self, state: FieldState):
        for t in self.times:
            if abs(state.t - t) < _T_TOL:
                self.found[t] = state

    def states(self) -> list:
        missing = [t for t in self.times if t not in self.found]
        if missing:
            raise AccuracyError(f"capture times not hit by the stepper: {missing}")
        return [self.found[t] for t in self.times]


@dataclass
class ScatterReport:
    """Backward-map Cauchy defects and forward shadowing defects."""

    times: list
    profile: FieldState
    backward_defects: list
    forward_defects: list
    floor_backward: list
    floor_forward: list
    free_energy_initial: float

    def to_json(self):
        return {
            "times": list(self.times),
            "backward_defects": list(self.backward_defects),
            "forward_defects": list(self.forward_defects),
            "floor_backward": list(self.floor_backward),
            "floor_forward": list(self.floor_forward),
            "free_energy_initial": self.free_energy_initial,
        }


def _pipeline(
    metric: MetricField,
    initial: FieldState,
    times: Sequence[float],
    nonlinear: bool,
    cfl: float,
    order: int,
    box_g: bool,
    forcing=None,
):
    """Forward run capturing slices, then linear pull-backs to t0."""
    t_max = max(times)
    grid = initial.grid
    c_max = estimate_max_speed(metric, grid, initial.t, t_max)
    dt = aligned_timestep(
        t_max - initial.t, cfl * grid.dr / c_max, anchors=[t - initial.t for t in times]
    )
    cap = SliceCapture(times)
    spec = EvolutionSpec(
        metric=metric,
        initial=initial,
        t_final=t_max,
        dt=dt,
        nonlinear=nonlinear,
        forcing=forcing,
        order=order,
        box_g=box_g,
        store_every=10**9,
    )
    evolve(spec, observers=[cap])
    slices = cap.states()
    # reuse the forward dt: anchors are integer multiples of it, so the
    # backward walk retraces the forward steps instead of re-snapping
    pulled = [
        backward_linear(metric, s, initial.t, cfl=cfl, order=order, box_g=box_g, dt=dt)
        for s in slices
    ]
    return slices, pulled, dt


def _defects(metric, initial, slices, pulled, times, order, box_g, dt):
    backward = [
        free_energy_distance(pulled[k + 1], pulled[k], order)
        for k in range(len(pulled) - 1)
    ]
    profile = pulled[-1]
    forward = []
    for t_k, s_k in zip(times, slices):
        spec = EvolutionSpec(
            metric=metric,
            initial=profile,
            t_final=t_k,
            dt=dt,
            nonlinear=False,
            order=order,
            box_g=box_g,
            store_every=10**9,
            check_domain=False,
        )
        forward.append(free_energy_distance(evolve(spec).final, s_k, order))
    return backward, forward, profile


def scattering_diagnostics(
    metric: MetricField,
    initial: FieldState,
    times: Sequence[float],
    cfl: float = 0.45,
    order: int = 2,
    box_g: bool = False,
    with_floor: bool = True,
) -> ScatterReport:
    """Runs the full scattering pipeline from one initial state.

    times must be increasing and all past the initial time.  The floor
    pipeline repeats every evolution with the nonlinearity switched off,
    so its defects contain discretization error only.
    """
    times = [float(t) for t in times]
    if len(times) < 2 or any(b <= a for a, b in zip(times, times[1:])):
        raise ParameterError("need at least two strictly increasing times")
    if times[0] <= initial.t:
        raise ParameterError("capture times must follow the initial time")

    slices, pulled, dt = _pipeline(metric, initial, times, True, cfl, order, box_g)
    backward, forward, profile = _defects(
        metric, initial, slices, pulled, times, order, box_g, dt
    )
    floor_b: list = []
    floor_f: list = []
    if with_floor:
        fs, fp, fdt = _pipeline(metric, initial, times, False, cfl, order, box_g)
        floor_b, floor_f, _ = _defects(
            metric, initial, fs, fp, times, order, box_g, fdt
        )
    u_r0 = initial.grid.diff1(initial.u, order)
    free_e = 0.5 * initial.grid.integrate(u_r0**2 + initial.v**2)
    return ScatterReport(
        times=times,
        profile=profile,
        backward_defects=backward,
        forward_defects=forward,
        floor_backward=floor_b,
        floor_forward=floor_f,
        free_energy_initial=free_e,
    )


def extract_profile(
    metric: MetricField,
    final: FieldState,
    t0: float = 0.0,
    cfl: float = 0.45,
    order: int = 2,
    box_g: bool = False,
) -> FieldState:
    """Linear pull-back S(t0, T) u(T) of a late-time state."""
    return backward_linear(metric, final, t0, cfl=cfl, order=order, box_g=box_g)


@dataclass
class PowerLawFit:
    rate: float
    amplitude: float
    max_log_residual: float
    t_lo: float
    t_hi: float

    def to_json(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def decay_fit(ts, ys, t_lo: Optional[float] = None, t_hi: Optional[float] = None) -> PowerLawFit:
    """Least-squares power law y ~ A t^rate on a log-log window.

    Drops nonpositive samples (they have no log) and reports the largest
    pointwise log deviation as the fit quality.
    """
    ts = np.asarray(ts, dtype=float)
    ys = np.asarray(ys, dtype=float)
    lo = ts[0] if t_lo is None else t_lo
    hi = ts[-1] if t_hi is None else t_hi
    mask = (ts >= lo - _T_TOL) & (ts <= hi + _T_TOL) & (ts > 0.0) & (ys > 0.0)
    if np.count_nonzero(mask) < 3:
        raise ParameterError("need at least three positive samples to fit")
    lt, ly = np.log(ts[mask]), np.log(ys[mask])
    rate, intercept = np.polyfit(lt, ly, 1)
    resid = ly - (rate * lt + intercept)
    return PowerLawFit(
        rate=float(rate),
        amplitude=float(np.exp(intercept)),
        max_log_residual=float(np.max(np.abs(resid))),
        t_lo=float(lo),
        t_hi=float(hi),
    )
