"""Radial spatial grid: stencils, quadrature, cone interpolation, norms.

Nodes sit at r_i = i dr for i = 0..N (N cells, R_max = N dr).  All evolved
fields are even through the origin, so interior stencils extend by even
reflection at r = 0; the outer edge uses one-sided stencils of matching
order.  Quadrature is the trapezoid rule against 4 pi r^2 dr with fixed
summation order, so runs are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import AccuracyError, DomainError, ParameterError

FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid with N cells (N + 1 nodes) spanning [0, N dr]."""

    dr: float
    n_cells: int

    def __post_init__(self):
        if not self.dr > 0.0:
            raise ParameterError("grid spacing dr must be positive")
        if self.n_cells < 8:
            raise ParameterError("grid needs at least 8 cells")

    @property
    def r_max(self) -> float:
        return self.n_cells * self.dr

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @cached_property
    def r(self) -> np.ndarray:
        r = np.arange(self.n_nodes) * self.dr
        r.setflags(write=False)
        return r

    # -- stencils -------------------------------------------------------------

    def _padded_even(self, f: np.ndarray, k: int) -> np.ndarray:
        # even reflection through r = 0: f[-j] = f[j]
        return np.concatenate([f[k:0:-1], f])

    def diff1(self, f: np.ndarray, order: int = 2) -> np.ndarray:
        """d/dr of an even field; one-sided at the outer edge."""
        f = np.asarray(f, dtype=float)
        h = self.dr
        out = np.empty_like(f)
        if order == 2:
            g = self._padded_even(f, 1)
            out[:-1] = (g[2:] - g[:-2]) / (2.0 * h)
            out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
        elif order == 4:
            g = self._padded_even(f, 2)
            out[:-2] = (g[:-4] - 8.0 * g[1:-3] + 8.0 * g[3:-1] - g[4:]) / (12.0 * h)
            # offset and fully one-sided 4th-order rows at the outer edge
            out[-2] = (
                -f[-5] + 6.0 * f[-4] - 18.0 * f[-3] + 10.0 * f[-2] + 3.0 * f[-1]
            ) / (12.0 * h)
            out[-1] = (
                3.0 * f[-5] - 16.0 * f[-4] + 36.0 * f[-3] - 48.0 * f[-2] + 25.0 * f[-1]
            ) / (12.0 * h)
        else:
            raise ParameterError("stencil order must be 2 or 4")
        return out

    def diff2(self, f: np.ndarray, order: int = 2) -> np.ndarray:
        """d^2/dr^2 of an even field; one-sided at the outer edge."""
        f = np.asarray(f, dtype=float)
        h2 = self.dr * self.dr
        out = np.empty_like(f)
        if order == 2:
            g = self._padded_even(f, 1)
            out[:-1] = (g[2:] - 2.0 * g[1:-1] + g[:-2]) / h2
            out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / h2
        elif order == 4:
            g = self._padded_even(f, 2)
            out[:-2] = (
                -g[:-4] + 16.0 * g[1:-3] - 30.0 * g[2:-2] + 16.0 * g[3:-1] - g[4:]
            ) / (12.0 * h2)
            out[-2] = (
                10.0 * f[-1] - 15.0 * f[-2] - 4.0 * f[-3] + 14.0 * f[-4]
                - 6.0 * f[-5] + f[-6]
            ) / (12.0 * h2)
            out[-1] = (
                45.0 * f[-1] - 154.0 * f[-2] + 214.0 * f[-3] - 156.0 * f[-4]
                + 61.0 * f[-5] - 10.0 * f[-6]
            ) / (12.0 * h2)
        else:
            raise ParameterError("stencil order must be 2 or 4")
        return out

    def laplacian(self, f: np.ndarray, order: int = 2) -> np.ndarray:
        """Radial Laplacian f'' + (2/r) f' with the l'Hopital origin value 3 f''(0)."""
        d1 = self.diff1(f, order)
        d2 = self.diff2(f, order)
        out = np.empty_like(d2)
        out[1:] = d2[1:] + 2.0 * d1[1:] / self.r[1:]
        out[0] = 3.0 * d2[0]
        return out

    # -- quadrature -----------------------------------------------------------

    def integrate(self, density: np.ndarray) -> float:
        """Integral over all space of a radial density, trapezoid in r."""
        g = FOUR_PI * self.r * self.r * np.asarray(density, dtype=float)
        return float(np.sum((g[:-1] + g[1:])) * (0.5 * self.dr))

    def cumulative(self, density: np.ndarray) -> np.ndarray:
        """Running integral over balls up to each node (starts at 0)."""
        g = FOUR_PI * self.r * self.r * np.asarray(density, dtype=float)
        out = np.empty(self.n_nodes)
        out[0] = 0.0
        np.cumsum((g[:-1] + g[1:]) * (0.5 * self.dr), out=out[1:])
        return out

    def ball_integral(self, density: np.ndarray, radius: float) -> float:
        return self.region_integral(density, 0.0, radius)

    def region_integral(self, density: np.ndarray, r_lo: float, r_hi: float) -> float:
        """Integral over the annulus r_lo < r < r_hi, linear partial cells.

        Defined through one cumulative function so adjacent regions add
        exactly: ball(b) - ball(a) is the annulus by construction.
        """
        if not 0.0 <= r_lo <= r_hi:
            raise DomainError("region must satisfy 0 <= r_lo <= r_hi")
        if r_hi > self.r_max + 1e-12 * self.dr:
            raise DomainError(
                f"region edge {r_hi} exceeds grid radius {self.r_max}"
            )
        cum = self.cumulative(density)
        g = FOUR_PI * self.r * self.r * np.asarray(density, dtype=float)

        def at(s: float) -> float:
            s = min(s, self.r_max)
            k = min(int(s / self.dr), self.n_cells - 1)
            xi = (s - self.r[k]) / self.dr
            gs = g[k] + (g[k + 1] - g[k]) * xi
            return float(cum[k]) + (s - self.r[k]) * 0.5 * (g[k] + gs)

        return at(r_hi) - at(r_lo)

    def exterior_integral(self, density: np.ndarray, radius: float) -> float:
        return self.region_integral(density, radius, self.r_max)

    # -- interpolation --------------------------------------------------------

    def interp_cubic(self, f: np.ndarray, s) -> np.ndarray:
        """4-point Lagrange interpolation of a nodal field at radii s."""
        f = np.asarray(f, dtype=float)
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s < -1e-12) or np.any(s > self.r_max + 1e-12 * self.dr):
            raise DomainError("interpolation radius outside the grid")
        s = np.clip(s, 0.0, self.r_max)
        k = np.clip((s / self.dr).astype(int) - 1, 0, self.n_cells - 3)
        xi = s / self.dr - k
        w0 = -(xi - 1.0) * (xi - 2.0) * (xi - 3.0) / 6.0
        w1 = xi * (xi - 2.0) * (xi - 3.0) / 2.0
        w2 = -xi * (xi - 1.0) * (xi - 3.0) / 2.0
        w3 = xi * (xi - 1.0) * (xi - 2.0) / 6.0
        return w0 * f[k] + w1 * f[k + 1] + w2 * f[k + 2] + w3 * f[k + 3]


# -- field state ----------------------------------------------------------------


@dataclass(frozen=True)
class FieldState:
    """Immutable snapshot (u, v = du/dt) on a radial grid at one time."""

    t: float
    u: np.ndarray
    v: np.ndarray
    grid: RadialGrid

    def __post_init__(self):
        u = np.array(self.u, dtype=float, copy=True)
        v = np.array(self.v, dtype=float, copy=True)
        if u.shape != (self.grid.n_nodes,) or v.shape != (self.grid.n_nodes,):
            raise ParameterError("field arrays must match the grid node count")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ParameterError("field state contains non-finite values")
        u.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    def u_r(self, order: int = 2) -> np.ndarray:
        return self.grid.diff1(self.u, order)

    def energy_density(self) -> np.ndarray:
        ur = self.u_r()
        return 0.5 * (self.v**2 + ur**2) + self.u**6 / 6.0

    def support_radius(self, rel_tol: float = 1e-14) -> float:
        """Largest radius where |u| or |v| exceeds rel_tol * peak."""
        mag = np.maximum(np.abs(self.u), np.abs(self.v))
        peak = float(np.max(mag))
        if peak == 0.0:
            return 0.0
        idx = np.nonzero(mag > rel_tol * peak)[0]
        return float(self.grid.r[idx[-1]]) if idx.size else 0.0


@dataclass(frozen=True)
class NormReport:
    energy: float
    e_grad: float       # int 1/2 (v^2 + u_r^2)
    e_pot: float        # int u^6 / 6
    hdot1_sq: float     # int u_r^2
    l2v_sq: float       # int v^2
    l6: float           # L^6 norm of u
    defect: Optional[float] = None


def energy_norms(state: FieldState, reference: Optional[FieldState] = None) -> NormReport:
    """Energy-space norms of a state, optionally with a same-grid reference.

    The defect is the energy-space distance
    sqrt(|grad(u - u_ref)|_{L2}^2 + |v - v_ref|_{L2}^2).
    """
    g = state.grid
    ur = state.u_r()
    hdot1 = g.integrate(ur * ur)
    l2v = g.integrate(state.v * state.v)
    u6 = g.integrate(state.u**6)
    report = NormReport(
        energy=0.5 * (hdot1 + l2v) + u6 / 6.0,
        e_grad=0.5 * (hdot1 + l2v),
        e_pot=u6 / 6.0,
        hdot1_sq=hdot1,
        l2v_sq=l2v,
        l6=u6 ** (1.0 / 6.0),
    )
    if reference is None:
        return report
    if reference.grid != g:
        raise DomainError("reference state lives on a different grid")
    du_r = ur - reference.u_r()
    dv = state.v - reference.v
    defect = math.sqrt(g.integrate(du_r * du_r) + g.integrate(dv * dv))
    return NormReport(**{**report.__dict__, "defect": defect})


def energy_defect(a: FieldState, b: FieldState) -> float:
    return energy_norms(a, b).defect


# -- cone regions ----------------------------------------------------------------


@dataclass(frozen=True)
class ConeRegion:
    """Forward light cone r < t + c over a time interval [t1, t2]."""

    c: float
    t1: float
    t2: float

    def __post_init__(self):
        if self.c < 0.0:
            raise ParameterError("cone offset c must be nonnegative")
        if not self.t1 < self.t2:
            raise ParameterError("cone interval needs t1 < t2")

    def radius(self, t) -> np.ndarray:
        return np.asarray(t, dtype=float) + self.c

    def validate(self, grid: RadialGrid, margin: Optional[float] = None):
        m = 5.0 * grid.dr if margin is None else margin
        if self.t2 + self.c + m > grid.r_max + 1e-12:
            raise DomainError(
                f"cone exit radius {self.t2 + self.c} + margin exceeds grid "
                f"radius {grid.r_max}"
            )


def cone_trace(state: FieldState, r_star: float):
    """(u, v, u_r) at radius r_star by cubic interpolation."""
    g = state.grid
    u = float(g.interp_cubic(state.u, r_star)[0])
    v = float(g.interp_cubic(state.v, r_star)[0])
    ur = float(g.interp_cubic(state.u_r(), r_star)[0])
    return u, v, ur


def cone_interpolate(
    states: Sequence[FieldState],
    cone: ConeRegion,
    integrand: Callable[[FieldState, float], float],
) -> float:
    """Lateral cone integral of a pointwise integrand q(state, r_star).

    Accumulates sum over time of q * 4 pi (t+c)^2 dt by the trapezoid rule
    over states with uniform spacing inside [t1, t2]; the sqrt(2) line
    element and the 1/sqrt(2) surface normalization cancel exactly.
    """
    sel = [s for s in states if cone.t1 - 1e-9 <= s.t <= cone.t2 + 1e-9]
    if len(sel) < 2:
        raise AccuracyError("need at least two states inside the cone interval")
    ts = np.array([s.t for s in sel])
    dts = np.diff(ts)
    dt = float(dts[0])
    if not np.allclose(dts, dt, rtol=1e-9, atol=1e-12):
        raise AccuracyError("cone states must be uniformly spaced in time")
    if dt > sel[0].grid.dr + 1e-12:
        raise AccuracyError(
            f"state spacing {dt} too coarse for cone integration (needs <= dr)"
        )
    cone.validate(sel[0].grid)
    total = 0.0
    for i, s in enumerate(sel):
        r_star = s.t + cone.c
        q = integrand(s, r_star) * FOUR_PI * r_star * r_star
        w = 0.5 * dt if i in (0, len(sel) - 1) else dt
        total += q * w
    return total


# -- tiny 3D cross-check grid -----------------------------------------------------


class Grid3D:
    """Small Cartesian box for cross-checking radial reductions.

    Cell-sum quadrature and numpy-gradient derivatives only; capped size.
    """

    def __init__(self, dx: float, n: int):
        if dx <= 0.0:
            raise ParameterError("dx must be positive")
        if not 4 <= n <= 128:
            raise ParameterError("3D cross-check grid is capped at 128^3")
        self.dx = float(dx)
        self.n = int(n)
        axis = (np.arange(n) - (n - 1) / 2.0) * dx
        self.x, self.y, self.z = np.meshgrid(axis, axis, axis, indexing="ij")
        self.r = np.sqrt(self.x**2 + self.y**2 + self.z**2)

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(f)) * self.dx**3

    def gradient(self, f: np.ndarray):
        return np.gradient(f, self.dx, edge_order=2)
