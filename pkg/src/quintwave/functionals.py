"""Diagnostics and audit identities evaluated along an evolution.

Everything here is an observer: it sees each state once (streamed from
`evolve` or replayed from stored snapshots via `replay`) and accumulates
scalar channels, so memory stays flat no matter how long the run is.
Audit residuals follow from multiplying the equation by a vector field
and integrating by parts; on flat space with no forcing they vanish up
to discretization error, which is what the refinement tests pin.

Conventions (defocusing sign, v = u_t):
  energy density        e = (v^2 + u_r^2)/2 + u^6/6
  outgoing derivative   Lu = v + u_r
  cone multiplier       Xu = (t+c) v + r u_r + u
  perturbation operator H[u] = h00 u_tt + 2 h0r v_r + hrr u_rr
                             + hww (2/r) u_r + c_t v + c_r u_r
with u_tt recovered from the equation itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import AccuracyError, DomainError, ParameterError
from .grid import FOUR_PI, ConeRegion, FieldState, RadialGrid
from .metric import MetricField, Minkowski
from .multipliers import MultiplierProfile
from .solver import acceleration, radial_coefficients

_T_TOL = 1e-9


def _trapz(ys: np.ndarray, ts: np.ndarray) -> float:
    if len(ts) < 2:
        return 0.0
    return float(np.sum((ys[1:] + ys[:-1]) * np.diff(ts)) * 0.5)


def _bracket(x):
    return np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2)


def replay(states: Sequence[FieldState], observers: Sequence) -> None:
    """Feed stored states through observers exactly as evolve would."""
    for s in states:
        for obs in observers:
            obs.observe(s)


# -- per-state derived quantities -------------------------------------------------


class _StateView:
    """Shared per-state derivatives so several audits don't recompute them."""

    def __init__(self, state: FieldState, order: int = 2):
        self.state = state
        self.grid = state.grid
        self.t = state.t
        self.u = state.u
        self.v = state.v
        self.u_r = state.grid.diff1(state.u, order)
        self.order = order

    def energy_density(self):
        return 0.5 * (self.v**2 + self.u_r**2) + self.u**6 / 6.0

    def xu(self, c: float):
        return (self.t + c) * self.v + self.grid.r * self.u_r + self.u

    def trace(self, r_star: float):
        g = self.grid
        pt = np.array([r_star])
        return (
            float(g.interp_cubic(self.u, pt)[0]),
            float(g.interp_cubic(self.v, pt)[0]),
            float(g.interp_cubic(self.u_r, pt)[0]),
        )


class _PerturbationEvaluator:
    """Pointwise H[u] - F for audit bulk terms.

    Uses the solver's coefficient assembly and the equation itself for
    u_tt, so the audited identity matches what the stepper integrates.
    """

    def __init__(self, metric, grid, nonlinear=True, forcing=None, order=2):
        self.metric = metric
        self.grid = grid
        self.nonlinear = nonlinear
        self.forcing = forcing
        self.order = order
        self.flat = isinstance(metric, Minkowski)

    def h_and_f(self, view: _StateView):
        """(H[u], F) arrays; zeros skipped where possible."""
        z = None
        f_arr = (
            self.forcing(view.t, self.grid.r) if self.forcing is not None else None
        )
        if self.flat:
            return z, f_arr
        co = radial_coefficients(self.metric, view.t, self.grid)
        acc = acceleration(
            co, self.grid, view.u, view.v, view.t, self.nonlinear, self.forcing,
            self.order,
        )
        u_rr = self.grid.diff2(view.u, self.order)
        v_r = self.grid.diff1(view.v, self.order)
        lop = np.empty_like(view.u_r)
        lop[1:] = 2.0 * view.u_r[1:] / self.grid.r[1:]
        lop[0] = 2.0 * u_rr[0]
        h = (
            (co.g00 + 1.0) * acc
            + co.two_h0r * v_r
            + (co.one_hrr - 1.0) * u_rr
            + (co.one_hww - 1.0) * lop
            + co.c_t * view.v
            + co.c_r * view.u_r
        )
        return h, f_arr


def le1_density(view: _StateView, gamma: float) -> float:
    """Local-energy-decay integrand at one time (whole space)."""
    br = _bracket(view.grid.r)
    z = (
        (view.v**2 + view.u_r**2) / br ** (1.0 + gamma)
        + view.u**2 / br ** (3.0 + gamma)
        + view.u**6 / br
    )
    return view.grid.integrate(z)


def le1_norm_sq(states: Sequence[FieldState], gamma: float, t1: float, t2: float) -> float:
    """Post-hoc squared LE norm over [t1, t2] (trapezoid in time)."""
    sel = [s for s in states if t1 - _T_TOL <= s.t <= t2 + _T_TOL]
    if len(sel) < 2:
        raise AccuracyError("need at least two states in the window")
    ts = np.array([s.t for s in sel])
    ys = np.array([le1_density(_StateView(s), gamma) for s in sel])
    return _trapz(ys, ts)


# -- scalar series ----------------------------------------------------------------


@dataclass
class DiagnosticSeries:
    """Uniformly sampled scalar time series with trapezoid windows."""

    columns: dict

    @property
    def t(self) -> np.ndarray:
        return self.columns["t"]

    def names(self):
        return [k for k in self.columns if k != "t"]

    def at(self, name: str, t: float) -> float:
        ts = self.t
        i = int(np.argmin(np.abs(ts - t)))
        if abs(ts[i] - t) > 1e-6 * max(1.0, abs(t)):
            raise DomainError(f"series has no sample near t={t}")
        return float(self.columns[name][i])

    def window_integral(self, name: str, t1: float, t2: float) -> float:
        ts = self.t
        mask = (ts >= t1 - _T_TOL) & (ts <= t2 + _T_TOL)
        if np.count_nonzero(mask) < 2:
            raise DomainError(f"window [{t1}, {t2}] has too few samples")
        return _trapz(self.columns[name][mask], ts[mask])

    def to_csv(self, path):
        names = ["t"] + self.names()
        data = np.column_stack([self.columns[n] for n in names])
        header = ",".join(names)
        np.savetxt(path, data, delimiter=",", header=header, comments="")

    @classmethod
    def from_csv(cls, path) -> "DiagnosticSeries":
        with open(path) as fh:
            names = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(columns={n: data[:, i].copy() for i, n in enumerate(names)})


class SeriesRecorder:
    """Observer recording energy-space scalars for every state it sees."""

    def __init__(self, gamma: float = 0.1, every: int = 1, order: int = 2):
        if every < 1:
            raise ParameterError("every must be >= 1")
        self.gamma = gamma
        self.every = every
        self.order = order
        self._rows = []
        self._seen = 0

    def observe(self, state: FieldState):
        k, self._seen = self._seen, self._seen + 1
        if k % self.every:
            return
        view = _StateView(state, self.order)
        g = state.grid
        hdot1 = g.integrate(view.u_r**2)
        l2v = g.integrate(view.v**2)
        u6 = g.integrate(view.u**6)
        self._rows.append(
            (
                state.t,
                0.5 * (hdot1 + l2v) + u6 / 6.0,
                0.5 * (hdot1 + l2v),
                u6 / 6.0,
                u6 ** (1.0 / 6.0),
                float(np.max(np.abs(view.u))),
                le1_density(view, self.gamma),
            )
        )

    def series(self) -> DiagnosticSeries:
        if not self._rows:
            raise AccuracyError("series recorder saw no states")
        arr = np.array(self._rows)
        names = ["t", "energy", "e_grad", "e_pot", "l6", "linf_u", "le1_density"]
        return DiagnosticSeries(columns={n: arr[:, i].copy() for i, n in enumerate(names)})


def uniform_bound_ratio(series: DiagnosticSeries, t_end: float, t_start: float = 0.0) -> float:
    """K(T) = (LE-norm^2 over [t_start, T] + E(T)) / E(t_start)."""
    le1 = series.window_integral("le1_density", t_start, t_end)
    return (le1 + series.at("energy", t_end)) / series.at("energy", t_start)


# -- window bookkeeping for audits -------------------------------------------------


class _WindowTape:
    """Collects per-time channels and captures slices at the window ends."""

    def __init__(self, t1: float, t2: float):
        if not t1 < t2:
            raise ParameterError("audit window needs t1 < t2")
        self.t1 = t1
        self.t2 = t2
        self.ts: list = []
        self.chan: dict = {}
        self.first: Optional[FieldState] = None
        self.last: Optional[FieldState] = None

    def wants(self, t: float) -> bool:
        return self.t1 - _T_TOL <= t <= self.t2 + _T_TOL

    def push(self, state: FieldState, **values):
        self.ts.append(state.t)
        for k, val in values.items():
            self.chan.setdefault(k, []).append(val)
        if abs(state.t - self.t1) < _T_TOL:
            self.first = state
        if abs(state.t - self.t2) < _T_TOL:
            self.last = state

    def finish(self, require_spacing: Optional[float] = None):
        if self.first is None or self.last is None:
            raise AccuracyError(
                f"audit window [{self.t1}, {self.t2}] not covered: endpoint "
                "slices missing (run times must hit the window edges)"
            )
        ts = np.array(self.ts)
        if len(ts) < 2:
            raise AccuracyError("audit window saw fewer than two states")
        dts = np.diff(ts)
        if np.any(dts <= 0.0) or not np.allclose(dts, dts[0], rtol=1e-6, atol=1e-12):
            raise AccuracyError("audit requires uniformly spaced states")
        if require_spacing is not None and dts[0] > require_spacing * (1.0 + 1e-6):
            raise AccuracyError(
                f"state spacing {dts[0]:.3g} too coarse (needs <= {require_spacing:.3g})"
            )
        self.ts = ts
        self.chan = {k: np.array(v) for k, v in self.chan.items()}

    def integral(self, name: str) -> float:
        return _trapz(self.chan[name], self.ts)


# -- energy / flux audit ------------------------------------------------------------


@dataclass
class EnergyFluxReport:
    cone_c: float
    t1: float
    t2: float
    e_in_t1: float
    e_in_t2: float
    e_ext_t1: float
    e_ext_t2: float
    e_total_t1: float
    flux: float
    bulk_h_in: float
    bulk_h_ext: float
    forcing_in: float
    forcing_ext: float
    residual_interior: float
    residual_exterior: float
    residual_rel: float
    slice_h_in: tuple
    slice_h_ext: tuple
    lateral_h: float
    bulk_h_by_parts: float
    f_term_bound: float
    le1_sq: float
    exterior_slack: float

    def to_json(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["slice_h_in"] = list(self.slice_h_in)
        out["slice_h_ext"] = list(self.slice_h_ext)
        return out


class EnergyFluxAudit:
    """Audits E_{r<t+c}(t2) = E_{r<t+c}(t1) + flux + bulk perturbation terms.

    The exterior identity (same pieces, flux leaving) is evaluated too, and
    the by-parts decomposition of the perturbation bulk into slice terms,
    a lateral term, and a remainder is reported alongside.  The exterior
    slack checks E_ext(t2) + flux <= E_ext(t1) + <c> LE^2 + F-term.
    """

    def __init__(
        self,
        metric: MetricField,
        cone: ConeRegion,
        gamma: float = 0.1,
        nonlinear: bool = True,
        forcing=None,
        order: int = 2,
    ):
        self.metric = metric
        self.cone = cone
        self.gamma = gamma
        self.order = order
        self.tape = _WindowTape(cone.t1, cone.t2)
        self.pert = None
        self._nonlinear = nonlinear
        self._forcing = forcing
        self._dr = None

    def observe(self, state: FieldState):
        if not self.tape.wants(state.t):
            return
        if self.pert is None:
            self.cone.validate(state.grid)
            self._dr = state.grid.dr
            self.pert = _PerturbationEvaluator(
                self.metric, state.grid, self._nonlinear, self._forcing, self.order
            )
        view = _StateView(state, self.order)
        g = state.grid
        r_star = state.t + self.cone.c
        ut, vt, urt = view.trace(r_star)
        q_flux = FOUR_PI * r_star**2 * (0.5 * (vt + urt) ** 2 + ut**6 / 6.0)

        h_arr, f_arr = self.pert.h_and_f(view)
        vals = {"q_flux": q_flux}
        if h_arr is not None:
            vh = view.v * h_arr
            vals["w_h_in"] = g.ball_integral(vh, r_star)
            vals["w_h_ext"] = g.exterior_integral(vh, r_star)
            rc = self.metric.radial(state.t, np.array([r_star]))
            h00s, h0rs, hrrs = float(rc.h00[0]), float(rc.h0r[0]), float(rc.hrr[0])
            vals["lat_h"] = (
                FOUR_PI
                * r_star**2
                * vt
                * (-(h00s * vt + h0rs * urt) + (h0rs * vt + hrrs * urt))
            )
        if f_arr is not None:
            vf = view.v * f_arr
            vals["w_f_in"] = g.ball_integral(vf, r_star)
            vals["w_f_ext"] = g.exterior_integral(vf, r_star)
            vals["f_l2"] = math.sqrt(g.integrate(f_arr**2))
            vals["v_l2"] = math.sqrt(g.integrate(view.v**2))
        vals["le1"] = le1_density(view, self.gamma)
        self.tape.push(state, **vals)

    def report(self) -> EnergyFluxReport:
        self.tape.finish(require_spacing=self._dr)
        t1, t2, c = self.tape.t1, self.tape.t2, self.cone.c
        first, last = self.tape.first, self.tape.last
        g = first.grid
        e1 = _StateView(first, self.order).energy_density()
        e2 = _StateView(last, self.order).energy_density()
        e_in_1 = g.ball_integral(e1, t1 + c)
        e_in_2 = g.ball_integral(e2, t2 + c)
        e_ext_1 = g.exterior_integral(e1, t1 + c)
        e_ext_2 = g.exterior_integral(e2, t2 + c)
        e_tot_1 = e_in_1 + e_ext_1
        flux = self.tape.integral("q_flux")

        have_h = "w_h_in" in self.tape.chan
        bulk_h_in = self.tape.integral("w_h_in") if have_h else 0.0
        bulk_h_ext = self.tape.integral("w_h_ext") if have_h else 0.0
        lateral_h = self.tape.integral("lat_h") if have_h else 0.0
        have_f = "w_f_in" in self.tape.chan
        forcing_in = self.tape.integral("w_f_in") if have_f else 0.0
        forcing_ext = self.tape.integral("w_f_ext") if have_f else 0.0
        f_term = (
            _trapz(self.tape.chan["f_l2"] * self.tape.chan["v_l2"], self.tape.ts)
            if have_f
            else 0.0
        )

        def slice_h(state, t):
            if not have_h:
                return 0.0, 0.0
            view = _StateView(state, self.order)
            rc = self.metric.radial(t, g.r)
            dens = view.v * (rc.h00 * view.v + rc.h0r * view.u_r)
            return g.ball_integral(dens, t + c), g.exterior_integral(dens, t + c)

        sh1 = slice_h(first, t1)
        sh2 = slice_h(last, t2)
        # interior: E_in(t2) - E_in(t1) = flux + int v (H - F)
        residual_in = e_in_2 - e_in_1 - flux - (bulk_h_in - forcing_in)
        residual_ext = e_ext_2 - e_ext_1 + flux - (bulk_h_ext - forcing_ext)
        by_parts_rem = bulk_h_in - (sh2[0] - sh1[0] + lateral_h)
        le1_sq = self.tape.integral("le1")
        slack = (
            e_ext_1
            + _bracket(c) * le1_sq
            + f_term
            - (e_ext_2 + flux)
        )
        return EnergyFluxReport(
            cone_c=c,
            t1=t1,
            t2=t2,
            e_in_t1=e_in_1,
            e_in_t2=e_in_2,
            e_ext_t1=e_ext_1,
            e_ext_t2=e_ext_2,
            e_total_t1=e_tot_1,
            flux=flux,
            bulk_h_in=bulk_h_in,
            bulk_h_ext=bulk_h_ext,
            forcing_in=forcing_in,
            forcing_ext=forcing_ext,
            residual_interior=residual_in,
            residual_exterior=residual_ext,
            residual_rel=abs(residual_in) / max(e_tot_1, 1e-300),
            slice_h_in=(sh1[0], sh2[0]),
            slice_h_ext=(sh1[1], sh2[1]),
            lateral_h=lateral_h,
            bulk_h_by_parts=by_parts_rem,
            f_term_bound=f_term,
            le1_sq=le1_sq,
            exterior_slack=float(slack),
        )


def flux_through_cone(
    states: Sequence[FieldState], cone: ConeRegion, metric: Optional[MetricField] = None
) -> float:
    """Post-hoc lateral energy flux through r = t + c over [t1, t2]."""
    audit = EnergyFluxAudit(metric or Minkowski(), cone)
    replay(states, [audit])
    return audit.report().flux


class FluxMeter:
    """Streams the lateral flux density once, integrates many windows.

    All windows share the cone offset c; window endpoints must land on
    state times (the stepper is expected to be aligned with them).
    """

    def __init__(self, c: float, windows: Sequence, order: int = 2):
        if c <= 0.0:
            raise ParameterError("cone offset must be positive")
        self.c = c
        self.windows = [(float(a), float(b)) for a, b in windows]
        if not self.windows or any(b <= a for a, b in self.windows):
            raise ParameterError("windows must be nonempty [t1, t2] pairs")
        self.order = order
        self._t_lo = min(a for a, _ in self.windows)
        self._t_hi = max(b for _, b in self.windows)
        self._ts: list = []
        self._qs: list = []
        self._checked = False

    def observe(self, state: FieldState):
        if not self._t_lo - _T_TOL <= state.t <= self._t_hi + _T_TOL:
            return
        if not self._checked:
            ConeRegion(c=self.c, t1=self._t_lo, t2=self._t_hi).validate(state.grid)
            self._checked = True
        view = _StateView(state, self.order)
        r_star = state.t + self.c
        ut, vt, urt = view.trace(r_star)
        self._ts.append(state.t)
        self._qs.append(
            FOUR_PI * r_star**2 * (0.5 * (vt + urt) ** 2 + ut**6 / 6.0)
        )

    def fluxes(self) -> dict:
        ts = np.array(self._ts)
        qs = np.array(self._qs)
        if len(ts) < 2:
            raise AccuracyError("flux meter saw too few states")
        out = {}
        for a, b in self.windows:
            mask = (ts >= a - _T_TOL) & (ts <= b + _T_TOL)
            sel = ts[mask]
            if len(sel) < 2 or abs(sel[0] - a) > _T_TOL or abs(sel[-1] - b) > _T_TOL:
                raise AccuracyError(f"flux window [{a}, {b}] not covered by states")
            out[(a, b)] = _trapz(qs[mask], sel)
        return out


# -- conformal audit ---------------------------------------------------------------


@dataclass
class ConformalReport:
    cone_c: float
    t1: float
    t2: float
    p_t1: float
    p_t2: float
    p_t1_split: tuple
    p_t2_split: tuple
    interior_u6: float
    lateral_x: float
    pert_bulk: float
    forcing_bulk: float
    slice_h_split_t1: tuple
    slice_h_split_t2: tuple
    lateral_h: float
    bulk_h_by_parts: float
    residual: float
    residual_rel: float
    p_min_density: float

    def to_json(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        for k in ("p_t1_split", "p_t2_split", "slice_h_split_t1", "slice_h_split_t2"):
            out[k] = list(out[k])
        return out


class ConformalAudit:
    """Audits P(t2) + (1/3) iint u^6 = P(t1) + LAT_X + iint Xu (H - F).

    P(T) integrates, over the ball r < T + c,
      (T+c)/2 [ (Xu/(T+c))^2 + u_r^2 (1 - (r/(T+c))^2) ] + u^2/(T+c)
      + (T+c) u^6/6,
    which is pointwise nonnegative inside the cone; LAT_X integrates
    4 pi (t+c) (Xu)^2 over the lateral boundary.  Slice and P values are
    also reported split at radius (T+c)/2.
    """

    def __init__(
        self,
        metric: MetricField,
        cone: ConeRegion,
        nonlinear: bool = True,
        forcing=None,
        order: int = 2,
    ):
        self.metric = metric
        self.cone = cone
        self.order = order
        self.tape = _WindowTape(cone.t1, cone.t2)
        self.pert = None
        self._nonlinear = nonlinear
        self._forcing = forcing
        self._dr = None
        self._p_min = math.inf

    def _p_density(self, view: _StateView, radius: float):
        r = view.grid.r
        xu = view.xu(self.cone.c)
        inside = r <= radius
        frac = np.where(inside, r / radius, 0.0)
        dens = (
            radius / 2.0 * ((xu / radius) ** 2 + view.u_r**2 * (1.0 - frac**2))
            + view.u**2 / radius
            + radius * view.u**6 / 6.0
        )
        return np.where(inside, dens, 0.0)

    def observe(self, state: FieldState):
        if not self.tape.wants(state.t):
            return
        if self.pert is None:
            self.cone.validate(state.grid)
            self._dr = state.grid.dr
            self.pert = _PerturbationEvaluator(
                self.metric, state.grid, self._nonlinear, self._forcing, self.order
            )
        view = _StateView(state, self.order)
        g = state.grid
        r_star = state.t + self.cone.c
        ut, vt, urt = view.trace(r_star)
        xu_trace = r_star * (vt + urt) + ut
        vals = {
            "lat_x": FOUR_PI * r_star * xu_trace**2,
            "u6_in": g.ball_integral(view.u**6, r_star),
        }
        h_arr, f_arr = self.pert.h_and_f(view)
        if h_arr is not None:
            xu = view.xu(self.cone.c)
            vals["w_h"] = g.ball_integral(xu * h_arr, r_star)
            rc = self.metric.radial(state.t, np.array([r_star]))
            h00s, h0rs, hrrs = float(rc.h00[0]), float(rc.h0r[0]), float(rc.hrr[0])
            vals["lat_h"] = (
                FOUR_PI
                * r_star**2
                * xu_trace
                * (-(h00s * vt + h0rs * urt) + (h0rs * vt + hrrs * urt))
            )
        if f_arr is not None:
            xu = view.xu(self.cone.c)
            vals["w_f"] = g.ball_integral(xu * f_arr, r_star)
        self.tape.push(state, **vals)
        pd = self._p_density(view, r_star)
        inside = state.grid.r <= r_star
        self._p_min = min(self._p_min, float(np.min(pd[inside])))

    def _p_and_split(self, state: FieldState):
        view = _StateView(state, self.order)
        radius = state.t + self.cone.c
        dens = self._p_density(view, radius)
        half = radius / 2.0
        inner = state.grid.ball_integral(dens, half)
        outer = state.grid.region_integral(dens, half, radius)
        return inner + outer, (inner, outer)

    def _slice_h_split(self, state: FieldState):
        view = _StateView(state, self.order)
        radius = state.t + self.cone.c
        rc = self.metric.radial(state.t, state.grid.r)
        if isinstance(self.metric, Minkowski):
            return (0.0, 0.0)
        dens = view.xu(self.cone.c) * (rc.h00 * view.v + rc.h0r * view.u_r)
        half = radius / 2.0
        return (
            state.grid.ball_integral(dens, half),
            state.grid.region_integral(dens, half, radius),
        )

    def report(self) -> ConformalReport:
        self.tape.finish(require_spacing=self._dr)
        p1, split1 = self._p_and_split(self.tape.first)
        p2, split2 = self._p_and_split(self.tape.last)
        lat_x = self.tape.integral("lat_x")
        interior = self.tape.integral("u6_in") / 3.0
        have_h = "w_h" in self.tape.chan
        pert = self.tape.integral("w_h") if have_h else 0.0
        lat_h = self.tape.integral("lat_h") if have_h else 0.0
        have_f = "w_f" in self.tape.chan
        forcing = self.tape.integral("w_f") if have_f else 0.0
        sh1 = self._slice_h_split(self.tape.first) if have_h else (0.0, 0.0)
        sh2 = self._slice_h_split(self.tape.last) if have_h else (0.0, 0.0)
        residual = p2 + interior - p1 - lat_x - (pert - forcing)
        by_parts_rem = pert - ((sh2[0] + sh2[1]) - (sh1[0] + sh1[1]) + lat_h)
        return ConformalReport(
            cone_c=self.cone.c,
            t1=self.tape.t1,
            t2=self.tape.t2,
            p_t1=p1,
            p_t2=p2,
            p_t1_split=split1,
            p_t2_split=split2,
            interior_u6=interior,
            lateral_x=lat_x,
            pert_bulk=pert,
            forcing_bulk=forcing,
            slice_h_split_t1=sh1,
            slice_h_split_t2=sh2,
            lateral_h=lat_h,
            bulk_h_by_parts=by_parts_rem,
            residual=residual,
            residual_rel=abs(residual) / max(abs(p1), 1e-300),
            p_min_density=self._p_min,
        )


# -- multiplier identity audit -------------------------------------------------------


@dataclass
class MultiplierReport:
    t1: float
    t2: float
    gamma: float
    be_t1: float
    be_t2: float
    bulk: float
    forcing_term: float
    perturbation_term: float
    err_envelope: float
    err_ratio: float
    residual: float
    residual_rel: float
    le1_sq: float
    e_t1: float
    e_t2: float
    k_measured: float
    equivalence_min: float
    equivalence_max: float
    equivalence_ok: bool

    def to_json(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


class MultiplierAudit:
    """Audits the dyadic-multiplier energy identity over [t1, t2].

    With M = a u + b u_r + C v and BE(t) = int (a u v + b u_r v + C e) dx,
      BE(t2) - BE(t1) + iint { b'(v^2 + u_r^2)/2 - (lap a) u^2 / 2
                               + ((2/3) a - b'/6) u^6 }
        = - iint M F + iint M H[u].
    Also measures K = (LE^2 + E(t2)) / E(t1), the BE / (C E) equivalence
    band, and the perturbation envelope
      ERR = iint (|h|/<r> + |dh|) [ (v^2+u_r^2) + sqrt(v^2+u_r^2) |u|/<r> ].
    """

    def __init__(
        self,
        metric: MetricField,
        t1: float,
        t2: float,
        profile: Optional[MultiplierProfile] = None,
        nonlinear: bool = True,
        forcing=None,
        order: int = 2,
    ):
        self.metric = metric
        self.profile = profile or MultiplierProfile()
        self.tape = _WindowTape(t1, t2)
        self.order = order
        self.pert = None
        self._nonlinear = nonlinear
        self._forcing = forcing
        self._weights = None
        self._ratios = []

    def _setup(self, grid: RadialGrid):
        from .multipliers import a_weight, b_weight, goodsign_weight

        r = grid.r
        b, b1, _ = b_weight(self.profile, r)
        a, lap = a_weight(self.profile, r)
        good = goodsign_weight(self.profile, r)
        c_const = self.profile.c_value
        # node 0 carries zero quadrature weight; clear the -inf Laplacian
        lap = lap.copy()
        lap[0] = 0.0
        self._weights = (a, b, b1, lap, good, c_const)

    def _be_and_energy(self, view: _StateView):
        a, b, b1, lap, good, c_const = self._weights
        g = view.grid
        e = view.energy_density()
        be = g.integrate(a * view.u * view.v + b * view.u_r * view.v + c_const * e)
        return be, g.integrate(e)

    def observe(self, state: FieldState):
        if not self.tape.wants(state.t):
            return
        if self.pert is None:
            self.pert = _PerturbationEvaluator(
                self.metric, state.grid, self._nonlinear, self._forcing, self.order
            )
            self._setup(state.grid)
        view = _StateView(state, self.order)
        g = state.grid
        a, b, b1, lap, good, c_const = self._weights
        grad_sq = view.v**2 + view.u_r**2
        bulk_dens = (
            0.5 * b1 * grad_sq - 0.5 * lap * view.u**2 + good * view.u**6
        )
        vals = {"bulk": g.integrate(bulk_dens)}
        m_field = a * view.u + b * view.u_r + c_const * view.v
        h_arr, f_arr = self.pert.h_and_f(view)
        if h_arr is not None:
            vals["mh"] = g.integrate(m_field * h_arr)
            rc = self.metric.radial(state.t, g.r)
            habs = np.maximum.reduce(
                [np.abs(rc.h00), np.abs(rc.h0r), np.abs(rc.hrr), np.abs(rc.hww)]
            )
            dhabs = np.maximum.reduce(
                [
                    np.abs(rc.h00_t), np.abs(rc.h00_r),
                    np.abs(rc.h0r_t), np.abs(rc.h0r_r),
                    np.abs(rc.hrr_t), np.abs(rc.hrr_r),
                    np.abs(rc.hww_t), np.abs(rc.hww_r),
                ]
            )
            br = _bracket(g.r)
            env = (habs / br + dhabs) * (
                grad_sq + np.sqrt(grad_sq) * np.abs(view.u) / br
            )
            vals["err_env"] = g.integrate(env)
        if f_arr is not None:
            vals["mf"] = g.integrate(m_field * f_arr)
        vals["le1"] = le1_density(view, self.profile.gamma)
        be, e_tot = self._be_and_energy(view)
        vals["be"] = be
        vals["energy"] = e_tot
        self._ratios.append(be / max(c_const * e_tot, 1e-300))
        self.tape.push(state, **vals)

    def report(self) -> MultiplierReport:
        self.tape.finish()
        chan = self.tape.chan
        be1, be2 = chan["be"][0], chan["be"][-1]
        e1, e2 = chan["energy"][0], chan["energy"][-1]
        bulk = self.tape.integral("bulk")
        mf = self.tape.integral("mf") if "mf" in chan else 0.0
        mh = self.tape.integral("mh") if "mh" in chan else 0.0
        err_env = self.tape.integral("err_env") if "err_env" in chan else 0.0
        residual = be2 - be1 + bulk + mf - mh
        le1_sq = self.tape.integral("le1")
        ratios = np.array(self._ratios)
        eq_min, eq_max = float(np.min(ratios)), float(np.max(ratios))
        scale = self.profile.c_value * max(e1, 1e-300)
        return MultiplierReport(
            t1=self.tape.t1,
            t2=self.tape.t2,
            gamma=self.profile.gamma,
            be_t1=be1,
            be_t2=be2,
            bulk=bulk,
            forcing_term=mf,
            perturbation_term=mh,
            err_envelope=err_env,
            err_ratio=abs(mh) / max(err_env, 1e-300),
            residual=residual,
            residual_rel=abs(residual) / scale,
            le1_sq=le1_sq,
            e_t1=e1,
            e_t2=e2,
            k_measured=(le1_sq + e2) / max(e1, 1e-300),
            equivalence_min=eq_min,
            equivalence_max=eq_max,
            equivalence_ok=bool(0.25 <= eq_min and eq_max <= 4.0),
        )


# -- global pointwise-decay estimate audit --------------------------------------------


@dataclass
class MainEstimateReport:
    t1: float
    t2: float
    r_shell: float
    gamma: float
    chosen_c: float
    candidate_fluxes: list
    lhs_u6: float
    rhs_total: float
    rhs_interior: float
    rhs_energy_decay: float
    rhs_g_argument: float
    rhs_g_value: float
    e_interior_t1: float
    e_exterior_t1: float
    e_total_t1: float
    le1_sq: float
    f_term: float
    k_ratio: float

    def to_json(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _g_concave(theta: float) -> float:
    return theta + theta ** (1.0 / 3.0)


class MainEstimateAudit:
    """Measures LHS / RHS for the global L^6-decay estimate.

    LHS = int u^6(t2) dx.  RHS combines the interior energy at t1 scaled
    by (t1 + R + 1)/t2, the total-energy tail E/t2^gamma, and
    G(exterior energy + <R> LE^2 + F-term) with G(s) = s + s^{1/3}.
    The cone offset c is chosen among 16 equispaced candidates in
    [R, R+1] minimizing the lateral flux, mirroring the averaging step
    in the underlying argument.
    """

    N_CANDIDATES = 16

    def __init__(
        self,
        metric: MetricField,
        t1: float,
        t2: float,
        r_shell: float,
        gamma: float = 0.1,
        nonlinear: bool = True,
        forcing=None,
        order: int = 2,
    ):
        if r_shell <= 0.0:
            raise ParameterError("r_shell must be positive")
        self.metric = metric
        self.t1 = t1
        self.t2 = t2
        self.r_shell = r_shell
        self.gamma = gamma
        self.order = order
        self.tape = _WindowTape(t1, t2)
        self.cs = np.linspace(r_shell, r_shell + 1.0, self.N_CANDIDATES)
        self._forcing = forcing
        self._nonlinear = nonlinear
        self._checked = False

    def observe(self, state: FieldState):
        if not self.tape.wants(state.t):
            return
        if not self._checked:
            ConeRegion(c=float(self.cs[-1]), t1=self.t1, t2=self.t2).validate(state.grid)
            self._checked = True
        view = _StateView(state, self.order)
        g = state.grid
        vals = {"le1": le1_density(view, self.gamma)}
        for j, c in enumerate(self.cs):
            r_star = state.t + c
            ut, vt, urt = view.trace(r_star)
            vals[f"flux_{j}"] = FOUR_PI * r_star**2 * (
                0.5 * (vt + urt) ** 2 + ut**6 / 6.0
            )
        if self._forcing is not None:
            f_arr = self._forcing(state.t, g.r)
            vals["f_l2"] = math.sqrt(g.integrate(f_arr**2))
            vals["v_l2"] = math.sqrt(g.integrate(view.v**2))
        self.tape.push(state, **vals)

    def report(self) -> MainEstimateReport:
        self.tape.finish(require_spacing=self.tape.first.grid.dr)
        first, last = self.tape.first, self.tape.last
        g = first.grid
        t1, t2, rsh = self.t1, self.t2, self.r_shell
        fluxes = [self.tape.integral(f"flux_{j}") for j in range(self.N_CANDIDATES)]
        j_best = int(np.argmin(fluxes))
        e_dens_1 = _StateView(first, self.order).energy_density()
        e_in = g.ball_integral(e_dens_1, t1 + rsh + 1.0)
        e_ext = g.exterior_integral(e_dens_1, t1 + rsh)
        e_tot = g.integrate(e_dens_1)
        le1_sq = self.tape.integral("le1")
        f_term = (
            _trapz(self.tape.chan["f_l2"] * self.tape.chan["v_l2"], self.tape.ts)
            if "f_l2" in self.tape.chan
            else 0.0
        )
        lhs = g.integrate(last.u**6)
        theta = e_ext + float(_bracket(rsh)) * le1_sq + f_term
        rhs_interior = (t1 + rsh + 1.0) / t2 * e_in
        rhs_decay = e_tot / t2**self.gamma
        rhs_g = _g_concave(theta)
        rhs = rhs_interior + rhs_decay + rhs_g
        return MainEstimateReport(
            t1=t1,
            t2=t2,
            r_shell=rsh,
            gamma=self.gamma,
            chosen_c=float(self.cs[j_best]),
            candidate_fluxes=[float(f) for f in fluxes],
            lhs_u6=lhs,
            rhs_total=rhs,
            rhs_interior=rhs_interior,
            rhs_energy_decay=rhs_decay,
            rhs_g_argument=theta,
            rhs_g_value=rhs_g,
            e_interior_t1=e_in,
            e_exterior_t1=e_ext,
            e_total_t1=e_tot,
            le1_sq=le1_sq,
            f_term=f_term,
            k_ratio=lhs / max(rhs, 1e-300),
        )


# -- cone-adapted smallness check ------------------------------------------------------


@dataclass
class ConeHypothesisReport:
    cone_c: float
    gamma: float
    sup_null_weighted: float
    sup_h_weighted: float
    amp_null: float
    amp_h: float
    null_ok: bool
    h_ok: bool

    def to_json(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def cone_hypothesis_check(
    metric: MetricField,
    cone: ConeRegion,
    gamma: float,
    amplitudes: dict,
    n_samples: int = 200,
) -> ConeHypothesisReport:
    """Checks the lateral-smallness quantities against certified amplitudes.

    Along r = t + c the theory needs |h^{LL}| <x>^{1+gamma} / <c> and
    |h| <x>^{1/2+gamma} / <c>^{1/2} controlled by the same amplitudes the
    box certification measured (the actual offset c is used as the
    separation scale).
    """
    from .metric import null_contraction

    ts = np.linspace(cone.t1, cone.t2, n_samples)
    rs = ts + cone.c
    brc = float(_bracket(cone.c))
    sup_null = 0.0
    sup_h = 0.0
    for t, r in zip(ts, rs):
        x = np.array([r, 0.0, 0.0])
        hll = abs(float(null_contraction(metric, float(t), x)))
        rc = metric.radial(float(t), np.array([r]))
        habs = max(
            abs(float(rc.h00[0])), abs(float(rc.h0r[0])),
            abs(float(rc.hrr[0])), abs(float(rc.hww[0])),
        )
        br = float(_bracket(r))
        sup_null = max(sup_null, hll * br ** (1.0 + gamma) / brc)
        sup_h = max(sup_h, habs * br ** (0.5 + gamma) / math.sqrt(brc))
    amp_null = amplitudes["null_decay"]
    amp_h = amplitudes["h_decay"]
    return ConeHypothesisReport(
        cone_c=cone.c,
        gamma=gamma,
        sup_null_weighted=sup_null,
        sup_h_weighted=sup_h,
        amp_null=amp_null,
        amp_h=amp_h,
        null_ok=bool(sup_null <= amp_null * (1.0 + 1e-9)),
        h_ok=bool(sup_h <= amp_h * (1.0 + 1e-9)),
    )
