"""Lorentzian background metrics g = m + h and decay-hypothesis certification.

Metrics are handled through their inverse components g^{alpha beta}; the flat
part is m = diag(-1, 1, 1, 1) and h is the perturbation.  Every shipped family
is radially symmetric, so the solver consumes scalar radial components

    h00(t, r) = h^{00}
    h0r(t, r) = h^{0i} x_i / r          (odd in r)
    hrr(t, r) = h^{ij} x_i x_j / r^2    (radial-radial eigenvalue)
    hww(t, r) = tangential eigenvalue of h^{ij}

while the full 4x4 tensor evaluation exists for cross-checks and for the
decay certifier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, NamedTuple, Tuple

import numpy as np

from .exceptions import DomainError, ParameterError

MINKOWSKI = np.diag([-1.0, 1.0, 1.0, 1.0])

_TINY_R = 1e-12


def bracket(x):
    """Smoothed absolute value <x> = sqrt(1 + x^2)."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + x * x)


def bracket_power(x, p):
    """<x>^p with first and second derivatives in x."""
    x = np.asarray(x, dtype=float)
    b2 = 1.0 + x * x
    v = b2 ** (0.5 * p)
    d1 = p * x * b2 ** (0.5 * p - 1.0)
    d2 = p * b2 ** (0.5 * p - 1.0) + p * (p - 2.0) * x * x * b2 ** (0.5 * p - 2.0)
    return v, d1, d2


def smootherstep(r, r_on, r_off):
    """C^2 ramp: 0 for r <= r_on, 1 for r >= r_off, with derivatives."""
    r = np.asarray(r, dtype=float)
    u = np.clip((r - r_on) / (r_off - r_on), 0.0, 1.0)
    v = u ** 3 * (6.0 * u * u - 15.0 * u + 10.0)
    d1 = 30.0 * u * u * (u - 1.0) ** 2 / (r_off - r_on)
    d2 = 60.0 * u * (2.0 * u - 1.0) * (u - 1.0) / (r_off - r_on) ** 2
    return v, d1, d2


class ScalarProfile(NamedTuple):
    """A scalar field f(t, r) with partial derivatives through second order."""

    val: np.ndarray
    dt: np.ndarray
    dr: np.ndarray
    dtt: np.ndarray
    dtr: np.ndarray
    drr: np.ndarray


def _zeros_like_profile(shape) -> ScalarProfile:
    z = np.zeros(shape)
    return ScalarProfile(z, z.copy(), z.copy(), z.copy(), z.copy(), z.copy())


def scale_profile(p: ScalarProfile, c: float) -> ScalarProfile:
    return ScalarProfile(*(c * a for a in p))


def cone_product(P, Q, R) -> ScalarProfile:
    """Assemble f(t,r) = P(t-r) * Q(t+r) * W(r) from factor value/d1/d2 triples.

    P, Q, W are (value, first, second) tuples already evaluated at s = t - r,
    q = t + r, and r respectively.
    """
    p, p1, p2 = P
    q, q1, q2 = Q
    w, w1, w2 = R
    val = p * q * w
    dt = (p1 * q + p * q1) * w
    dr = (-p1 * q + p * q1) * w + p * q * w1
    dtt = (p2 * q + 2.0 * p1 * q1 + p * q2) * w
    dtr = (-p2 * q + p * q2) * w + (p1 * q + p * q1) * w1
    drr = (
        (p2 * q + p * q2 - 2.0 * p1 * q1) * w
        + 2.0 * (-p1 * q + p * q1) * w1
        + p * q * w2
    )
    return ScalarProfile(val, dt, dr, dtt, dtr, drr)


@dataclass(frozen=True)
class RadialComponents:
    """Radial perturbation components and their first derivatives at fixed t.

    All arrays share the shape of the radius array they were evaluated on.
    """

    h00: np.ndarray
    h0r: np.ndarray
    hrr: np.ndarray
    hww: np.ndarray
    h00_t: np.ndarray
    h00_r: np.ndarray
    h0r_t: np.ndarray
    h0r_r: np.ndarray
    hrr_t: np.ndarray
    hrr_r: np.ndarray
    hww_t: np.ndarray
    hww_r: np.ndarray

    @property
    def g00(self):
        return -1.0 + self.h00

    @property
    def g0r(self):
        return self.h0r

    @property
    def grr(self):
        return 1.0 + self.hrr

    @property
    def gww(self):
        return 1.0 + self.hww


_COMPONENT_NAMES = ("h00", "h0r", "hrr", "hww")


class MetricField:
    """Base class: an evaluable inverse-metric perturbation field.

    Subclasses implement `radial_profiles` returning closed-form component
    profiles with derivatives through second order.  Evaluation is pure; no
    interior mutability, safe for concurrent sweeps.
    """

    family_id = "base"
    is_static = True
    params: Dict[str, float] = {}

    def radial_profiles(self, t, r) -> Dict[str, ScalarProfile]:
        raise NotImplementedError

    # -- radial interface ---------------------------------------------------

    def radial(self, t, r) -> RadialComponents:
        """Components and first derivatives on a radius array at time t."""
        r = np.asarray(r, dtype=float)
        prof = self.radial_profiles(t, r)
        shape = np.broadcast_shapes(np.shape(t), r.shape)
        out = {}
        for name in _COMPONENT_NAMES:
            p = prof.get(name)
            if p is None:
                z = np.zeros(shape)
                out[name] = z
                out[name + "_t"] = z
                out[name + "_r"] = z
            else:
                out[name] = np.broadcast_to(p.val, shape)
                out[name + "_t"] = np.broadcast_to(p.dt, shape)
                out[name + "_r"] = np.broadcast_to(p.dr, shape)
        return RadialComponents(**out)

    def char_speeds(self, t, r) -> np.ndarray:
        """Largest local characteristic speed at each radius.

        Radial roots of g^{00} c^2 - 2 g^{0r} c + g^{rr} = 0 together with
        the tangential speed sqrt(g^{ww} / -g^{00}).
        """
        c = self.radial(t, r)
        g00 = c.g00
        disc = c.g0r * c.g0r - g00 * c.grr
        s = np.sqrt(np.maximum(disc, 0.0))
        cp = np.abs((c.g0r + s) / g00)
        cm = np.abs((c.g0r - s) / g00)
        c_ang = np.sqrt(np.maximum(c.gww / (-g00), 0.0))
        return np.maximum(np.maximum(cp, cm), c_ang)

    # -- full-tensor interface ----------------------------------------------

    def eval(self, t, x, order: int = 2):
        """Inverse metric g^{ab}(t, x) with derivative blocks.

        Returns (g, dg, d2g); dg[mu, a, b] = d_mu g^{ab} and
        d2g[mu, nu, a, b] = d_mu d_nu g^{ab}, with mu = 0 the time direction.
        Blocks beyond `order` are None.  Accepts a single point (x shape (3,))
        or a batch (x shape (M, 3) with t scalar or shape (M,)).
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = x[None, :] if single else x
        if X.ndim != 2 or X.shape[1] != 3:
            raise ParameterError("x must be a 3-vector or an (M, 3) batch")
        M = X.shape[0]
        T = np.broadcast_to(np.asarray(t, dtype=float), (M,))
        if not (np.all(np.isfinite(T)) and np.all(np.isfinite(X))):
            raise ParameterError("non-finite evaluation point")
        R = np.sqrt(np.sum(X * X, axis=1))
        safe_r = np.where(R < _TINY_R, 1.0, R)
        xh = np.where(R[:, None] < _TINY_R, 0.0, X / safe_r[:, None])

        prof = self.radial_profiles(T, R)
        for name in _COMPONENT_NAMES[1:]:
            if name in prof and np.any(prof[name].val != 0.0):
                raise NotImplementedError(
                    "full-tensor assembly is implemented for h^{00}-only "
                    "families; use the radial interface for general components"
                )
        f = prof.get("h00")
        if f is None:
            f = _zeros_like_profile((M,))
        else:
            f = ScalarProfile(*(np.broadcast_to(a, (M,)) for a in f))

        g = np.tile(MINKOWSKI, (M, 1, 1))
        g[:, 0, 0] += f.val
        dg = d2g = None
        if order >= 1:
            dg = np.zeros((M, 4, 4, 4))
            dg[:, 0, 0, 0] = f.dt
            for k in range(3):
                dg[:, k + 1, 0, 0] = f.dr * xh[:, k]
        if order >= 2:
            d2g = np.zeros((M, 4, 4, 4, 4))
            d2g[:, 0, 0, 0, 0] = f.dtt
            for k in range(3):
                d2g[:, 0, k + 1, 0, 0] = f.dtr * xh[:, k]
                d2g[:, k + 1, 0, 0, 0] = f.dtr * xh[:, k]
            # d_k d_l h00 = f_rr xh_k xh_l + (f_r / r)(delta_kl - xh_k xh_l);
            # at r = 0 the angular factor tends to f_rr.
            fr_over_r = np.where(R < _TINY_R, f.drr, f.dr / safe_r)
            for k in range(3):
                for l in range(3):
                    ang = (1.0 if k == l else 0.0) - xh[:, k] * xh[:, l]
                    d2g[:, k + 1, l + 1, 0, 0] = (
                        f.drr * xh[:, k] * xh[:, l] + fr_over_r * ang
                    )
        if single:
            g = g[0]
            dg = None if dg is None else dg[0]
            d2g = None if d2g is None else d2g[0]
        return g, dg, d2g


# -- null frame ---------------------------------------------------------------


@dataclass(frozen=True)
class NullFrame:
    """Flat null directions at a point, components as used in contractions.

    ell_bar contracts h to the incoming-null quantity h^{00} - 2 h^{0i} xh_i
    + h^{ij} xh_i xh_j; both directions are Minkowski-null.
    """

    t: float
    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.shape != (3,) or float(np.dot(x, x)) == 0.0:
            raise DomainError("null frame needs a nonzero 3-vector")
        object.__setattr__(self, "x", x)

    @property
    def unit(self) -> np.ndarray:
        return self.x / math.sqrt(float(np.dot(self.x, self.x)))

    @property
    def ell_bar(self) -> np.ndarray:
        return np.concatenate(([-1.0], self.unit))

    @property
    def ell(self) -> np.ndarray:
        return np.concatenate(([1.0], self.unit))


def null_contraction(metric: MetricField, t, x):
    """h^{alpha beta} contracted twice with the incoming null direction.

    Equals h^{00} - 2 h^{0i} x_i/|x| + h^{ij} x_i x_j/|x|^2, which for a
    radial perturbation reduces to h00 - 2 h0r + hrr.  The direction is
    undefined at x = 0.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    R2 = np.sum(X * X, axis=1)
    if np.any(R2 == 0.0):
        raise DomainError("null contraction undefined at x = 0")
    c = metric.radial(t, np.sqrt(R2))
    val = c.h00 - 2.0 * c.h0r + c.hrr
    return float(val[0]) if single else val


def eval_metric(metric: MetricField, t, x, order: int = 2):
    """Module-level alias for MetricField.eval."""
    return metric.eval(t, x, order=order)


def lorentzian_signature_ok(g: np.ndarray) -> np.ndarray:
    """Vectorized signature check: exactly one negative eigenvalue.

    Uses interlacing: a positive-definite spatial 3x3 block forces at least
    three positive eigenvalues, and a negative 4x4 determinant then forces
    exactly one negative.  Avoids per-sample eigendecompositions.
    """
    g = np.asarray(g, dtype=float)
    if g.ndim == 2:
        g = g[None]
    s = g[:, 1:, 1:]
    m1 = s[:, 0, 0] > 0.0
    m2 = s[:, 0, 0] * s[:, 1, 1] - s[:, 0, 1] ** 2 > 0.0
    m3 = np.linalg.det(s) > 0.0
    d4 = np.linalg.det(g) < 0.0
    return (g[:, 0, 0] < 0.0) & m1 & m2 & m3 & d4


# -- shipped families ---------------------------------------------------------


class Minkowski(MetricField):
    family_id = "minkowski"
    is_static = True

    def __init__(self):
        self.params = {}

    def radial_profiles(self, t, r):
        return {}


class StaticDecay(MetricField):
    """h^{00} = -eps <r>^{-1-gamma}, all other components flat."""

    family_id = "static-decay"
    is_static = True

    def __init__(self, eps: float = 0.05, gamma: float = 0.1):
        if not 0.0 <= eps <= 0.5:
            raise ParameterError("static-decay: eps must lie in [0, 0.5]")
        if gamma <= 0.0:
            raise ParameterError("static-decay: gamma must be positive")
        self.eps = float(eps)
        self.gamma = float(gamma)
        self.params = {"eps": self.eps, "gamma": self.gamma}

    def radial_profiles(self, t, r):
        r = np.asarray(r, dtype=float)
        v, d1, d2 = bracket_power(r, -1.0 - self.gamma)
        z = np.zeros_like(v)
        return {
            "h00": ScalarProfile(-self.eps * v, z, -self.eps * d1, z, z, -self.eps * d2)
        }


class ConeAdapted(MetricField):
    """Time-dependent h^{00} = -eps <t-r>^{1/2} <r>^{-gamma} <t+r>^{-1/2} chi(r).

    chi is a C^2 ramp vanishing for r <= r_on, so the field is flat near the
    origin.  The weighted size of h saturates its decay budget with equality
    on the cutoff support; the incoming-null contraction decays strictly
    slower, which the certifier flags.
    """

    family_id = "cone-adapted"
    is_static = False

    def __init__(
        self,
        eps: float = 0.05,
        gamma: float = 0.1,
        r_on: float = 1.0,
        r_off: float = 2.0,
    ):
        if not 0.0 <= eps <= 0.5:
            raise ParameterError("cone-adapted: eps must lie in [0, 0.5]")
        if gamma < 0.0:
            raise ParameterError("cone-adapted: gamma must be nonnegative")
        if not 0.0 < r_on < r_off:
            raise ParameterError("cone-adapted: need 0 < r_on < r_off")
        self.eps = float(eps)
        self.gamma = float(gamma)
        self.r_on = float(r_on)
        self.r_off = float(r_off)
        self.params = {
            "eps": self.eps,
            "gamma": self.gamma,
            "r_on": self.r_on,
            "r_off": self.r_off,
        }

    def radial_profiles(self, t, r):
        t = np.asarray(t, dtype=float)
        r = np.asarray(r, dtype=float)
        P = bracket_power(t - r, 0.5)
        Q = bracket_power(t + r, -0.5)
        vb, db1, db2 = bracket_power(r, -self.gamma)
        vc, dc1, dc2 = smootherstep(r, self.r_on, self.r_off)
        W = (vb * vc, db1 * vc + vb * dc1, db2 * vc + 2.0 * db1 * dc1 + vb * dc2)
        return {"h00": scale_profile(cone_product(P, Q, W), -self.eps)}


class Violating(MetricField):
    """Non-decaying control family: constant floor plus a slow deepening well.

    h^{00} = -(floor + depth (1 + t/t_ramp) exp(-(r/width)^2)).  The floor
    breaks every time-weighted decay budget near the light cone, the ramp
    makes |h| itself grow with the sampled box, and the well slows interior
    characteristics to 1/sqrt(1 + floor + depth (1 + t/t_ramp)), trapping
    outgoing waves so the dynamical decay diagnostics fail as well.  With
    depth = 0 or t_ramp = None the family is static.  Intended for t >= 0.
    """

    family_id = "violating"

    def __init__(
        self,
        floor: float = 0.2,
        depth: float = 0.0,
        width: float = 4.0,
        t_ramp: float | None = None,
    ):
        if not 0.0 <= floor <= 20.0:
            raise ParameterError("violating: floor must lie in [0, 20]")
        if not 0.0 <= depth <= 200.0:
            raise ParameterError("violating: depth must lie in [0, 200]")
        if width <= 0.0:
            raise ParameterError("violating: width must be positive")
        if t_ramp is not None and t_ramp <= 0.0:
            raise ParameterError("violating: t_ramp must be positive or None")
        self.floor = float(floor)
        self.depth = float(depth)
        self.width = float(width)
        self.t_ramp = None if t_ramp is None else float(t_ramp)
        self.is_static = self.t_ramp is None or self.depth == 0.0
        self.params = {
            "floor": self.floor,
            "depth": self.depth,
            "width": self.width,
            "t_ramp": self.t_ramp,
        }

    def radial_profiles(self, t, r):
        t = np.asarray(t, dtype=float)
        r = np.asarray(r, dtype=float)
        w = self.width
        e = np.exp(-((r / w) ** 2))
        if self.is_static:
            growth, rate = 1.0, 0.0
        else:
            growth, rate = 1.0 + t / self.t_ramp, 1.0 / self.t_ramp
        d = self.depth
        val = -(self.floor + d * growth * e)
        dr1 = d * growth * (2.0 * r / w**2) * e
        drr = d * growth * (2.0 / w**2) * (1.0 - 2.0 * r * r / w**2) * e
        dt1 = -d * rate * e
        dtr = d * rate * (2.0 * r / w**2) * e
        shape = np.broadcast_shapes(t.shape, r.shape)
        z = np.zeros(shape)
        bc = lambda arr: np.broadcast_to(np.asarray(arr, dtype=float), shape)
        return {
            "h00": ScalarProfile(bc(val), bc(dt1), bc(dr1), z, bc(dtr), bc(drr))
        }


class CallableRadialMetric(MetricField):
    """Wraps user-supplied radial component callables c(t, r) -> value.

    Derivatives come from 4th-order central finite differences, reflecting
    through r = 0 with the component's parity (h0r odd, the rest even).
    Intended for tabulated or ad-hoc metrics without closed-form derivatives.
    """

    family_id = "callable"

    _PARITY = {"h00": 1.0, "h0r": -1.0, "hrr": 1.0, "hww": 1.0}

    def __init__(
        self,
        components: Dict[str, Callable],
        static: bool = False,
        fd_step: float = 1e-2,
    ):
        unknown = set(components) - set(_COMPONENT_NAMES)
        if unknown:
            raise ParameterError(f"unknown metric components: {sorted(unknown)}")
        if fd_step <= 0.0:
            raise ParameterError("fd_step must be positive")
        self.components = dict(components)
        self.is_static = bool(static)
        self.fd_step = float(fd_step)
        self.params = {"fd_step": self.fd_step}

    def _sample(self, func, parity, t, r):
        r = np.asarray(r, dtype=float)
        sign = np.where(r < 0.0, parity, 1.0)
        return sign * np.asarray(func(t, np.abs(r)), dtype=float)

    def radial_profiles(self, t, r):
        # 4th-order central stencils; mixed dtr nests the t-stencil in r.
        c1 = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
        o1 = np.array([-2.0, -1.0, 1.0, 2.0])
        c2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
        o2 = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        h = self.fd_step
        out = {}
        for name, func in self.components.items():
            parity = self._PARITY[name]
            ev = lambda tt, rr: self._sample(func, parity, tt, rr)
            val = ev(t, r)
            dr = sum(c * ev(t, r + o * h) for c, o in zip(c1, o1)) / h
            drr = sum(c * ev(t, r + o * h) for c, o in zip(c2, o2)) / h**2
            if self.is_static:
                z = np.zeros_like(val)
                out[name] = ScalarProfile(val, z, dr, z, z, drr)
                continue
            dt = sum(c * ev(t + o * h, r) for c, o in zip(c1, o1)) / h
            dtt = sum(c * ev(t + o * h, r) for c, o in zip(c2, o2)) / h**2
            dtr = sum(
                ct * cr * ev(t + ot * h, r + orr * h)
                for ct, ot in zip(c1, o1)
                for cr, orr in zip(c1, o1)
            ) / h**2
            out[name] = ScalarProfile(val, dt, dr, dtt, dtr, drr)
        return out


_FAMILIES = {
    "minkowski": Minkowski,
    "static-decay": StaticDecay,
    "cone-adapted": ConeAdapted,
    "violating": Violating,
}

_ALIASES = {"flat": "minkowski", "a": "static-decay", "b": "cone-adapted", "c": "violating"}


def make_metric(family: str, **params) -> MetricField:
    """Construct a metric by family name; parameters are validated."""
    key = family.strip().lower()
    key = _ALIASES.get(key, key)
    cls = _FAMILIES.get(key)
    if cls is None:
        known = sorted(set(_FAMILIES) | set(_ALIASES))
        raise ParameterError(f"unknown metric family {family!r}; known: {known}")
    try:
        return cls(**params)
    except TypeError as exc:
        raise ParameterError(f"bad parameters for family {family!r}: {exc}") from None


# -- decay certification ------------------------------------------------------


@dataclass(frozen=True)
class SampleSpec:
    """Sampling box for the decay certifier.

    The tensor grid over [0, t_max] x [0, r_max] is augmented with near-cone
    samples r = t + offset, and the whole box is rescaled by each entry of
    box_scales to detect amplitudes that grow with the sampled region.
    """

    t_max: float = 20.0
    r_max: float = 25.0
    n_t: int = 41
    n_r: int = 61
    cone_offsets: Tuple[float, ...] = (-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0)
    box_scales: Tuple[float, ...] = (1.0, 2.0, 4.0)
    growth_flag_ratio: float = 1.2

    def __post_init__(self):
        if self.t_max <= 0 or self.r_max <= 0:
            raise ParameterError("sample box must have positive extent")
        if self.n_t < 2 or self.n_r < 2:
            raise ParameterError("sample counts must be at least 2")
        if len(self.box_scales) < 1:
            raise ParameterError("at least one box scale required")

    def points(self, scale: float = 1.0):
        ts = np.linspace(0.0, self.t_max * scale, self.n_t)
        rs = np.linspace(0.0, self.r_max * scale, self.n_r)
        T, R = np.meshgrid(ts, rs, indexing="ij")
        t_flat = [T.ravel()]
        r_flat = [R.ravel()]
        for d in self.cone_offsets:
            rc = ts + d
            keep = (rc >= 0.0) & (rc <= self.r_max * scale)
            t_flat.append(ts[keep])
            r_flat.append(rc[keep])
        return np.concatenate(t_flat), np.concatenate(r_flat)


HYPOTHESES = ("h_decay", "null_decay", "deriv_decay")


@dataclass
class DecayReport:
    """Certified decay amplitudes for one metric over one sample spec.

    amplitude[hyp] is the smallest eps' with weighted-sup <= eps' over the
    base box; box_amplitudes tracks the rescaled boxes and `unbounded` flags
    sustained growth under box doubling.
    """

    family_id: str
    gamma: float
    sample_description: str
    amplitudes: Dict[str, float]
    worst_points: Dict[str, Tuple[float, float]]
    box_amplitudes: Dict[str, Tuple[float, ...]] = field(default_factory=dict)
    unbounded: Dict[str, bool] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "family_id": self.family_id,
            "gamma": self.gamma,
            "sample_description": self.sample_description,
            "amplitudes": dict(self.amplitudes),
            "worst_points": {k: list(v) for k, v in self.worst_points.items()},
            "box_amplitudes": {k: list(v) for k, v in self.box_amplitudes.items()},
            "unbounded": dict(self.unbounded),
        }


def decay_weighted_sups(metric: MetricField, gamma: float, ts, rs, chunk: int = 8192):
    """Weighted suprema of |h|, |h^{LbarLbar}|, |dh| over paired samples.

    Returns (amplitudes, worst_points) keyed by hypothesis name.  The
    derivative hypothesis takes the larger of the first-order sup with weight
    <x>^{1+gamma} and the second-order sup with weight <x>^{2+gamma}.
    """
    ts = np.asarray(ts, dtype=float).ravel()
    rs = np.asarray(rs, dtype=float).ravel()
    if ts.size == 0 or ts.shape != rs.shape:
        raise ParameterError("sample arrays must be nonempty and equal length")
    best = {k: 0.0 for k in HYPOTHESES}
    where = {k: (float(ts[0]), float(rs[0])) for k in HYPOTHESES}
    zhat = np.array([0.0, 0.0, 1.0])
    for lo in range(0, ts.size, chunk):
        t = ts[lo : lo + chunk]
        r = rs[lo : lo + chunk]
        X = r[:, None] * zhat[None, :]
        g, dg, d2g = metric.eval(t, X, order=2)
        habs = np.max(np.abs(g - MINKOWSKI), axis=(1, 2))
        dmax = np.max(np.abs(dg), axis=(1, 2, 3))
        d2max = np.max(np.abs(d2g), axis=(1, 2, 3, 4))
        br = bracket(r)
        ratio = bracket(t + r) / bracket(t - r)
        q = {
            "h_decay": habs * br**gamma * np.sqrt(ratio),
            "deriv_decay": np.maximum(
                dmax * br ** (1.0 + gamma), d2max * br ** (2.0 + gamma)
            ),
        }
        pos = r > 0.0
        null = np.zeros_like(r)
        if np.any(pos):
            null[pos] = np.abs(null_contraction(metric, t[pos], X[pos]))
        q["null_decay"] = null * br**gamma * ratio
        for k, arr in q.items():
            i = int(np.argmax(arr))
            if arr[i] > best[k]:
                best[k] = float(arr[i])
                where[k] = (float(t[i]), float(r[i]))
    return best, where


def certify_decay(
    metric: MetricField, gamma: float, samples: SampleSpec | None = None
) -> DecayReport:
    """Measure the decay-hypothesis amplitudes of a metric on a sample box.

    Each amplitude is a sampled supremum, so it is monotone under sample
    refinement; growth across doubled boxes marks the hypothesis unbounded.
    """
    if samples is None:
        samples = SampleSpec()
    if gamma <= 0.0:
        raise ParameterError("gamma must be positive")
    box_amps = {k: [] for k in HYPOTHESES}
    base_amp = None
    base_where = None
    for scale in samples.box_scales:
        ts, rs = samples.points(scale)
        amps, where = decay_weighted_sups(metric, gamma, ts, rs)
        for k in HYPOTHESES:
            box_amps[k].append(amps[k])
        if base_amp is None:
            base_amp, base_where = amps, where
    unbounded = {}
    rho = samples.growth_flag_ratio
    for k in HYPOTHESES:
        seq = box_amps[k]
        grows = seq[0] > 1e-14 and all(
            seq[i + 1] >= rho * seq[i] for i in range(len(seq) - 1)
        )
        unbounded[k] = bool(grows and len(seq) >= 2)
    desc = (
        f"grid {samples.n_t}x{samples.n_r} on [0,{samples.t_max}]x[0,{samples.r_max}]"
        f" + cone offsets {samples.cone_offsets}, box scales {samples.box_scales}"
    )
    return DecayReport(
        family_id=metric.family_id,
        gamma=float(gamma),
        sample_description=desc,
        amplitudes=base_amp,
        worst_points=base_where,
        box_amplitudes={k: tuple(v) for k, v in box_amps.items()},
        unbounded=unbounded,
    )
