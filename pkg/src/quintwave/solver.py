"""Time evolution of the radial quintic wave equation on a perturbed metric.

The second-order equation

    g00 u_tt + 2 h0r d_t d_r u + (1 + hrr) u_rr + (1 + hww) (2/r) u_r
        + c_t u_t + c_r u_r  =  u^5 + F,

with c_t = d_t h00 + d_r h0r + 2 h0r / r and
c_r = d_t h0r + d_r hrr + 2 (hrr - hww) / r, is advanced as a first-order
system in (u, v = u_t) by a kick-drift-kick leapfrog.  When the
acceleration depends on v (mixed h0r term or nonzero c_t) the closing
kick is iterated once on a predicted velocity; otherwise the step is the
classic time-reversible form, which the backward linear evolution relies
on.  Origin limits: (2/r) u_r -> 2 u_rr, 2 h0r / r -> 2 d_r h0r, c_r -> 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import BlowupError, CflError, DomainError, ParameterError
from .grid import FieldState, RadialGrid
from .metric import MetricField, Minkowski

Forcing = Callable[[float, np.ndarray], np.ndarray]

_G00_FLOOR = 0.5  # require |g00| >= 1/2 everywhere


@dataclass
class StepCoefficients:
    """Frozen per-time coefficient arrays for the acceleration."""

    g00: np.ndarray
    two_h0r: np.ndarray
    one_hrr: np.ndarray
    one_hww: np.ndarray
    c_t: np.ndarray
    c_r: np.ndarray
    couples_v: bool
    c_max: float


def radial_coefficients(
    metric: MetricField, t: float, grid: RadialGrid, box_g: bool = False
) -> StepCoefficients:
    r = grid.r
    c = metric.radial(t, r)
    g00 = c.g00
    if np.max(g00) > -_G00_FLOOR:
        raise CflError(
            f"metric time lapse degenerates at t={t}: max g00 = {np.max(g00):.4f}"
        )

    # 2 h0r / r with the odd-parity origin limit 2 d_r h0r(0)
    h0r_over_r = np.empty_like(r)
    h0r_over_r[1:] = c.h0r[1:] / r[1:]
    h0r_over_r[0] = c.h0r_r[0]
    c_t = c.h00_t + c.h0r_r + 2.0 * h0r_over_r

    diff_rw = np.empty_like(r)
    diff_rw[1:] = (c.hrr[1:] - c.hww[1:]) / r[1:]
    diff_rw[0] = 0.0  # regular tensors have hrr - hww = O(r^2)
    c_r = c.h0r_t + c.hrr_r + 2.0 * diff_rw
    c_r[0] = 0.0

    if box_g:
        # extra first-order terms g^{ab} d_b(ln sqrt|g|) d_a u with
        # ln sqrt|g| = -1/2 ln(|g00 grr - g0r^2| gww^2)
        det2 = g00 * c.grr - c.h0r**2
        det2_t = c.h00_t * c.grr + g00 * c.hrr_t - 2.0 * c.h0r * c.h0r_t
        det2_r = c.h00_r * c.grr + g00 * c.hrr_r - 2.0 * c.h0r * c.h0r_r
        lt = -0.5 * (det2_t / det2 + 2.0 * c.hww_t / c.gww)
        lr = -0.5 * (det2_r / det2 + 2.0 * c.hww_r / c.gww)
        c_t = c_t + g00 * lt + c.h0r * lr
        c_r = c_r + c.h0r * lt + c.grr * lr

    couples = bool(np.any(c.h0r != 0.0) or np.any(c_t != 0.0))
    disc = np.sqrt(np.maximum(c.h0r**2 - g00 * c.grr, 0.0))
    cp = np.abs((c.h0r + disc) / g00)
    cm = np.abs((c.h0r - disc) / g00)
    c_ang = np.sqrt(np.maximum(c.gww / (-g00), 0.0))
    c_max = float(np.max(np.maximum(np.maximum(cp, cm), c_ang)))
    return StepCoefficients(
        g00=g00,
        two_h0r=2.0 * c.h0r,
        one_hrr=1.0 + c.hrr,
        one_hww=1.0 + c.hww,
        c_t=c_t,
        c_r=c_r,
        couples_v=couples,
        c_max=c_max,
    )


class _CoefficientCache:
    """Keeps the last few coefficient evaluations keyed by time."""

    def __init__(self, metric, grid, box_g):
        self.metric = metric
        self.grid = grid
        self.box_g = box_g
        self._static: Optional[StepCoefficients] = None
        self._recent: dict[float, StepCoefficients] = {}

    def at(self, t: float) -> StepCoefficients:
        if getattr(self.metric, "is_static", False):
            if self._static is None:
                self._static = radial_coefficients(self.metric, 0.0, self.grid, self.box_g)
            return self._static
        key = round(float(t), 12)
        hit = self._recent.get(key)
        if hit is None:
            hit = radial_coefficients(self.metric, t, self.grid, self.box_g)
            self._recent[key] = hit
            while len(self._recent) > 3:
                self._recent.pop(next(iter(self._recent)))
        return hit


def acceleration(
    coeffs: StepCoefficients,
    grid: RadialGrid,
    u: np.ndarray,
    v: np.ndarray,
    t: float,
    nonlinear: bool,
    forcing: Optional[Forcing],
    order: int = 2,
) -> np.ndarray:
    u_r = grid.diff1(u, order)
    u_rr = grid.diff2(u, order)
    v_r = grid.diff1(v, order)
    lop = np.empty_like(u_r)
    lop[1:] = 2.0 * u_r[1:] / grid.r[1:]
    lop[0] = 2.0 * u_rr[0]
    rhs = np.zeros_like(u)
    if nonlinear:
        rhs += u**5
    if forcing is not None:
        rhs = rhs + forcing(t, grid.r)
    rhs -= (
        coeffs.two_h0r * v_r
        + coeffs.one_hrr * u_rr
        + coeffs.one_hww * lop
        + coeffs.c_t * v
        + coeffs.c_r * u_r
    )
    return rhs / coeffs.g00


@dataclass
class EvolutionSpec:
    """Everything needed to advance an initial state to a final time."""

    metric: MetricField
    initial: FieldState
    t_final: float
    cfl: float = 0.5
    nonlinear: bool = True
    forcing: Optional[Forcing] = None
    order: int = 2
    box_g: bool = False
    store_every: Optional[int] = None
    check_every: int = 20
    blowup_threshold: float = 1e6
    dt: Optional[float] = None           # override the CFL choice (still checked)
    check_domain: bool = True

    def __post_init__(self):
        if not 0.0 < self.cfl <= 0.9:
            raise ParameterError("cfl must lie in (0, 0.9]")
        if self.t_final <= self.initial.t:
            raise ParameterError("t_final must exceed the initial time")
        if self.check_every < 1:
            raise ParameterError("check_every must be >= 1")


@dataclass
class EvolutionResult:
    final: FieldState
    states: list[FieldState]
    dt: float
    n_steps: int
    store_every: int
    max_speed_seen: float


def estimate_max_speed(metric, grid: RadialGrid, t0: float, t1: float) -> float:
    """Coarse bound on the characteristic speed over a time window."""
    if getattr(metric, "is_static", False):
        ts = [t0]
    else:
        ts = np.linspace(t0, t1, 17)
    rs = np.linspace(0.0, grid.r_max, 257)
    return max(float(np.max(metric.char_speeds(t, rs))) for t in ts)


def check_domain_size(spec: EvolutionSpec, c_max: float):
    """Data-aware finite-speed sizing: the support never reaches the edge."""
    grid = spec.initial.grid
    reach = (
        spec.initial.support_radius()
        + c_max * (spec.t_final - spec.initial.t)
        + 5.0 * grid.dr
    )
    if spec.forcing is not None:
        return  # forced runs fill the domain; caller owns the boundary
    if reach > grid.r_max:
        raise DomainError(
            f"grid radius {grid.r_max:.2f} too small: data support plus "
            f"causal reach needs {reach:.2f}"
        )


def choose_dt(spec: EvolutionSpec, c_max: float) -> tuple[float, int]:
    grid = spec.initial.grid
    span = spec.t_final - spec.initial.t
    if spec.dt is not None:
        dt = spec.dt
        if dt > spec.cfl * grid.dr / c_max * (1.0 + 1e-9):
            raise CflError(f"requested dt {dt} violates the CFL bound")
    else:
        dt = spec.cfl * grid.dr / c_max
    n = max(1, int(math.ceil(span / dt - 1e-9)))
    return span / n, n


def aligned_timestep(span: float, dt_max: float, anchors=()) -> float:
    """Largest dt = span/n with dt <= dt_max hitting every anchor time.

    Window-based diagnostics need the stepper to land exactly on their
    endpoints; n is raised until each anchor is an integer number of
    steps.  Anchors must be commensurate with the span for this to
    terminate quickly (integers and simple fractions are).
    """
    if span <= 0.0 or dt_max <= 0.0:
        raise ParameterError("span and dt_max must be positive")
    n = max(1, int(math.ceil(span / dt_max - 1e-9)))
    for _ in range(100000):
        dt = span / n
        if all(abs(a / dt - round(a / dt)) < 1e-9 for a in anchors):
            return dt
        n += 1
    raise ParameterError("no aligned step found: anchors incommensurate with span")


def _kdk_step(cache, grid, t, u, v, dt, nonlinear, forcing, order):
    """One kick-drift-kick step; iterated closing kick when accel uses v."""
    c0 = cache.at(t)
    a1 = acceleration(c0, grid, u, v, t, nonlinear, forcing, order)
    vh = v + 0.5 * dt * a1
    u2 = u + dt * vh
    t2 = t + dt
    c1 = cache.at(t2)
    if c0.couples_v or c1.couples_v:
        vp = vh + 0.5 * dt * acceleration(c1, grid, u2, vh, t2, nonlinear, forcing, order)
        v2 = vh + 0.5 * dt * acceleration(c1, grid, u2, vp, t2, nonlinear, forcing, order)
    else:
        v2 = vh + 0.5 * dt * acceleration(c1, grid, u2, vh, t2, nonlinear, forcing, order)
    return u2, v2


def evolve(spec: EvolutionSpec, observers: Sequence = ()) -> EvolutionResult:
    grid = spec.initial.grid
    c_max = estimate_max_speed(spec.metric, grid, spec.initial.t, spec.t_final)
    if spec.check_domain:
        check_domain_size(spec, c_max)
    dt, n_steps = choose_dt(spec, c_max)
    store_every = spec.store_every
    if store_every is None:
        store_every = max(1, int(grid.dr / dt + 1e-9))

    cache = _CoefficientCache(spec.metric, grid, spec.box_g)
    time_dependent = not getattr(spec.metric, "is_static", False)

    u = spec.initial.u.copy()
    v = spec.initial.v.copy()
    t = spec.initial.t
    states = [spec.initial]
    last_good = spec.initial
    max_speed_seen = c_max

    for obs in observers:
        begin = getattr(obs, "begin", None)
        if begin is not None:
            begin(grid, dt, spec)
        obs.observe(spec.initial)

    for k in range(1, n_steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            u, v = _kdk_step(
                cache, grid, t, u, v, dt, spec.nonlinear, spec.forcing, spec.order
            )
        t = spec.initial.t + k * dt

        peak = max(np.max(np.abs(u)), np.max(np.abs(v)))
        if not np.isfinite(peak) or peak > spec.blowup_threshold:
            raise BlowupError(
                f"field magnitude {peak} at t={t:.4f}",
                state=last_good,
                step=k,
            )
        if k % spec.check_every == 0 or k == n_steps:
            if time_dependent:
                speed = cache.at(t).c_max
                max_speed_seen = max(max_speed_seen, speed)
                if dt > spec.cfl * grid.dr / speed * (1.0 + 1e-6):
                    raise CflError(
                        f"characteristic speed {speed:.3f} at t={t:.3f} "
                        f"breaks the CFL bound for dt={dt:.5f}"
                    )

        state = FieldState(t=t, u=u, v=v, grid=grid)
        last_good = state
        if k % store_every == 0 or k == n_steps:
            states.append(state)
        for obs in observers:
            obs.observe(state)

    for obs in observers:
        end = getattr(obs, "end", None)
        if end is not None:
            end(last_good)

    return EvolutionResult(
        final=last_good,
        states=states,
        dt=dt,
        n_steps=n_steps,
        store_every=store_every,
        max_speed_seen=max_speed_seen,
    )


def backward_linear(
    metric: MetricField,
    final: FieldState,
    t_back: float,
    cfl: float = 0.5,
    order: int = 2,
    dt: Optional[float] = None,
    box_g: bool = False,
) -> FieldState:
    """Evolve the linear equation backward from `final` to time t_back.

    Runs the same leapfrog with a negative time step; for static metrics
    without v-coupling this undoes a forward linear evolution to roundoff.
    """
    if t_back >= final.t:
        raise ParameterError("t_back must precede the final time")
    grid = final.grid
    c_max = estimate_max_speed(metric, grid, t_back, final.t)
    span = final.t - t_back
    step = dt if dt is not None else cfl * grid.dr / c_max
    if step > cfl * grid.dr / c_max * (1.0 + 1e-9):
        raise CflError(f"requested dt {step} violates the CFL bound")
    n = max(1, int(math.ceil(span / step - 1e-9)))
    h = -span / n

    cache = _CoefficientCache(metric, grid, box_g)
    u = final.u.copy()
    v = final.v.copy()
    t = final.t
    for k in range(1, n + 1):
        u, v = _kdk_step(cache, grid, t, u, v, h, False, None, order)
        t = final.t + k * h
        peak = max(np.max(np.abs(u)), np.max(np.abs(v)))
        if not np.isfinite(peak):
            raise BlowupError(f"backward evolution lost finiteness at t={t:.4f}")
    return FieldState(t=t_back, u=u, v=v, grid=grid)


# -- initial data families -----------------------------------------------------


def _truncate(arr: np.ndarray, rel: float = 1e-20) -> np.ndarray:
    peak = np.max(np.abs(arr))
    if peak > 0.0:
        arr = np.where(np.abs(arr) < rel * peak, 0.0, arr)
    return arr


def gaussian_data(grid: RadialGrid, amplitude: float = 1.0, sigma: float = 1.0) -> FieldState:
    """u0 = A exp(-r^2 / (2 sigma^2)), v0 = 0, hard-truncated tails."""
    if sigma <= 0.0:
        raise ParameterError("sigma must be positive")
    u = _truncate(amplitude * np.exp(-(grid.r**2) / (2.0 * sigma**2)))
    return FieldState(t=0.0, u=u, v=np.zeros(grid.n_nodes), grid=grid)


def dalembert_data(grid: RadialGrid, amplitude: float = 1.0, sigma: float = 1.0) -> FieldState:
    """Even-profile data whose free evolution is closed-form.

    With f(s) = A exp(-s^2 / (2 sigma^2)) the flat linear solution is
    u = [f(t - r) - f(t + r)] / r, so u0 = 0 and v0 = -2 f'(r) / r.
    """
    if sigma <= 0.0:
        raise ParameterError("sigma must be positive")
    v = _truncate((2.0 * amplitude / sigma**2) * np.exp(-(grid.r**2) / (2.0 * sigma**2)))
    return FieldState(t=0.0, u=np.zeros(grid.n_nodes), v=v, grid=grid)


def dalembert_solution(t: float, r: np.ndarray, amplitude: float = 1.0, sigma: float = 1.0):
    """Closed-form flat linear solution matching `dalembert_data`."""
    r = np.asarray(r, dtype=float)

    def f(s):
        return amplitude * np.exp(-(s**2) / (2.0 * sigma**2))

    safe = np.where(r > 0.0, r, 1.0)
    u = np.where(
        r > 0.0,
        (f(t - r) - f(t + r)) / safe,
        2.0 * amplitude * t / sigma**2 * np.exp(-(t**2) / (2.0 * sigma**2)),
    )
    v = np.where(
        r > 0.0,
        (-(t - r) * f(t - r) + (t + r) * f(t + r)) / (sigma**2 * safe),
        2.0 * amplitude / sigma**2 * (1.0 - t**2 / sigma**2)
        * np.exp(-(t**2) / (2.0 * sigma**2)),
    )
    return u, v


def outgoing_pulse_data(
    grid: RadialGrid, amplitude: float = 1.0, r_center: float = 6.0, sigma: float = 1.0
) -> FieldState:
    """Purely outgoing shell u = f(t - r)/r seeded at r = r_center.

    A smooth switch kills the 1/r factor inside r < 2 sigma, where the
    profile is already exponentially small for r_center >> sigma.
    """
    if r_center < 4.0 * sigma:
        raise ParameterError("outgoing pulse needs r_center >= 4 sigma")
    r = grid.r
    from .metric import smootherstep

    chi, _, _ = smootherstep(r, sigma, 2.0 * sigma)
    safe = np.where(r > 0.0, r, 1.0)
    prof = amplitude * np.exp(-((r - r_center) ** 2) / (2.0 * sigma**2))
    u = _truncate(chi * prof / safe)
    v = _truncate(chi * (r - r_center) / sigma**2 * prof / safe)
    return FieldState(t=0.0, u=u, v=v, grid=grid)


def bump_data(
    grid: RadialGrid, amplitude: float = 1.0, r_center: float = 0.0, width: float = 2.0
) -> FieldState:
    """Compactly supported C^2 bump, v0 = 0."""
    if width <= 0.0:
        raise ParameterError("width must be positive")
    s = (grid.r - r_center) / width
    u = amplitude * np.clip(1.0 - s * s, 0.0, None) ** 3
    return FieldState(t=0.0, u=u, v=np.zeros(grid.n_nodes), grid=grid)


def zero_data(grid: RadialGrid) -> FieldState:
    z = np.zeros(grid.n_nodes)
    return FieldState(t=0.0, u=z, v=z, grid=grid)


DATA_FAMILIES = {
    "gaussian": gaussian_data,
    "dalembert": dalembert_data,
    "outgoing": outgoing_pulse_data,
    "bump": bump_data,
    "zero": zero_data,
}


def make_data(grid: RadialGrid, family: str, **params) -> FieldState:
    try:
        ctor = DATA_FAMILIES[family]
    except KeyError:
        raise ParameterError(
            f"unknown data family {family!r}; choose from {sorted(DATA_FAMILIES)}"
        ) from None
    return ctor(grid, **params)


# -- Duhamel consistency ---------------------------------------------------------


@dataclass
class DuhamelReport:
    t: float
    residual: float     # energy-space defect against the Duhamel reconstruction
    relative: float     # residual / sqrt(initial energy-norm scale)
    n_nodes: int
    partial: bool       # quadrature coarsened to respect the budget

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def duhamel_residual(
    metric: MetricField,
    result: EvolutionResult,
    budget: int = 32,
    order: int = 2,
    box_g: bool = False,
) -> DuhamelReport:
    """Compare a nonlinear run against its own Duhamel reconstruction.

    The stored states act as quadrature nodes for
    u(T) = S(T,0) u[0] + int_0^T S(T,s) (0, u^5(s)/g00(s)) ds
    with S the linear propagator; each node costs one linear sub-evolution,
    capped by `budget` (stride-coarsening sets the partial flag).
    """
    if budget < 4:
        raise ParameterError("duhamel budget must be at least 4")
    states = result.states
    if len(states) < 2:
        raise ParameterError("need stored states to form the Duhamel quadrature")
    grid = states[0].grid
    t_end = result.final.t

    idx = list(range(len(states)))
    partial = False
    max_nodes = budget - 1  # one linear evolution is spent on the data term
    if len(idx) > max_nodes:
        stride = int(math.ceil((len(idx) - 1) / (max_nodes - 1)))
        idx = list(range(0, len(idx) - 1, stride)) + [len(idx) - 1]
        partial = True
    nodes = [states[i] for i in idx]

    def linear_to_end(state: FieldState) -> FieldState:
        if state.t >= t_end - 1e-12:
            return state
        sub = EvolutionSpec(
            metric=metric,
            initial=state,
            t_final=t_end,
            nonlinear=False,
            order=order,
            box_g=box_g,
            dt=result.dt,
            cfl=0.9,
            check_domain=False,
            store_every=max(1, result.n_steps),
        )
        return evolve(sub).final

    hom = linear_to_end(states[0])
    u_sum = hom.u.copy()
    v_sum = hom.v.copy()

    ts = np.array([s.t for s in nodes])
    evolved = []
    for s in nodes:
        g00 = metric.radial(s.t, grid.r).g00
        src = FieldState(t=s.t, u=np.zeros(grid.n_nodes), v=s.u**5 / g00, grid=grid)
        evolved.append(linear_to_end(src))
    for k in range(len(nodes) - 1):
        w = 0.5 * (ts[k + 1] - ts[k])
        u_sum += w * (evolved[k].u + evolved[k + 1].u)
        v_sum += w * (evolved[k].v + evolved[k + 1].v)

    du_r = grid.diff1(result.final.u - u_sum, order)
    dv = result.final.v - v_sum
    residual = math.sqrt(grid.integrate(du_r * du_r) + grid.integrate(dv * dv))
    ur0 = grid.diff1(states[0].u, order)
    scale = math.sqrt(
        grid.integrate(ur0 * ur0) + grid.integrate(states[0].v ** 2)
    )
    return DuhamelReport(
        t=t_end,
        residual=residual,
        relative=residual / max(scale, 1e-300),
        n_nodes=len(nodes),
        partial=partial,
    )


# -- manufactured solutions ------------------------------------------------------


@dataclass
class ManufacturedSolution:
    """w(t, r) = A exp(-r^2 / (2 sigma^2)) cos(omega t) with exact forcing.

    The forcing F = P w - w^5 is assembled from the divergence form
    P w = d_t(g00 w_t + g0r w_r) + r^{-2} d_r[r^2 (g0r w_t + grr w_r)]
    directly, independent of the solver's coefficient grouping, so a run
    driven by it cross-checks both formulations.
    """

    metric: MetricField
    amplitude: float = 0.1
    sigma: float = 2.0
    omega: float = 1.0
    box_g: bool = False

    def _w(self, t: float, r: np.ndarray):
        s2 = self.sigma**2
        prof = self.amplitude * np.exp(-(r**2) / (2.0 * s2))
        cos, sin = math.cos(self.omega * t), math.sin(self.omega * t)
        w = prof * cos
        w_t = -self.omega * prof * sin
        w_tt = -self.omega**2 * prof * cos
        w_r = -(r / s2) * prof * cos
        w_rr = (r * r / s2 - 1.0) / s2 * prof * cos
        w_tr = self.omega * (r / s2) * prof * sin
        return w, w_t, w_tt, w_r, w_rr, w_tr

    def exact_state(self, t: float, grid: RadialGrid) -> FieldState:
        w, w_t, *_ = self._w(t, grid.r)
        return FieldState(t=t, u=w, v=w_t, grid=grid)

    def forcing(self, t: float, r: np.ndarray) -> np.ndarray:
        c = self.metric.radial(t, r)
        w, w_t, w_tt, w_r, w_rr, w_tr = self._w(t, r)
        g00, g0r, grr = c.g00, c.h0r, c.grr
        # d_t(g00 w_t + g0r w_r)
        part_t = c.h00_t * w_t + g00 * w_tt + c.h0r_t * w_r + g0r * w_tr
        # r^{-2} d_r[r^2 (g0r w_t + grr w_r)]
        flux_r = c.h0r_r * w_t + g0r * w_tr + c.hrr_r * w_r + grr * w_rr
        over_r = np.empty_like(r)
        rr = np.asarray(r, dtype=float)
        pos = rr > 0.0
        over_r[pos] = 2.0 * (g0r[pos] * w_t[pos] + grr[pos] * w_r[pos]) / rr[pos]
        if np.any(~pos):
            # g0r odd, w_r odd: limits 2(d_r g0r w_t + grr w_rr)
            over_r[~pos] = 2.0 * (c.h0r_r[~pos] * w_t[~pos] + grr[~pos] * w_rr[~pos])
        pw = part_t + flux_r + over_r
        if self.box_g:
            det2 = g00 * grr - c.h0r**2
            det2_t = c.h00_t * grr + g00 * c.hrr_t - 2.0 * c.h0r * c.h0r_t
            det2_r = c.h00_r * grr + g00 * c.hrr_r - 2.0 * c.h0r * c.h0r_r
            lt = -0.5 * (det2_t / det2 + 2.0 * c.hww_t / c.gww)
            lr = -0.5 * (det2_r / det2 + 2.0 * c.hww_r / c.gww)
            pw = pw + (g00 * w_t + g0r * w_r) * lt + (c.h0r * w_t + grr * w_r) * lr
        return pw - w**5
