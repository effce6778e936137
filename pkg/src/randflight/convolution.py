"""Layer recurrence for the absolutely continuous density components.

The joint density of position and n+1 turns is a time integral of
surface integrals of the n-turn density over the set

    M(x, tau) = S(x, c(t - tau))  intersected with  int B(0, c tau),

the part of the last-leg sphere whose starting points are reachable in
the first tau of the flight.  Depending on tau this set is empty, a
spherical cap, or the whole sphere; the regimes switch at
tau = t/2 -+ |x|/(2c).

Numerical scheme
----------------
Layers live on a time ladder tau_j = j t / J.  Each ladder slot stores a
table over the scaled radius sigma = r / (c tau_j), so interpolation in
time blends values at equal *relative* depth inside the support, keeping
the support boundary aligned across slots.  The one-turn layer has an
inverse-square-root boundary divergence in the plane, so its tables
store the regular factor f1 * sqrt((c tau)^2 - r^2) and the singular
factor is restored analytically at evaluation time.

Surface integrals over caps are taken in the chord-radius variable
s = |xi| (planar case: both arc branches summed), where the geometric
and boundary singularities appear as inverse square roots at the
interval ends; every panel is mapped through sin^2, which integrates
those ends exactly.  Time panels split at the cap/full-sphere
transition, where the integrand has a kink (and, while consuming the
one-turn layer, a mild logarithmic spike), with extra graded panels in
the latter case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .analytic import one_turn_profile, singular_layer
from .core import (DensityField, DensityLayer, EvalPoint, FlightParams,
                   PolarGrid, RadialGrid, conditional_weight_or_raise,
                   tail_mass)
from .dissipation import CircularGaussianLaw, DissipationLaw, UniformLaw
from .errors import DomainError
from .specfun import SeriesControl, gamma_half, gauss_2f1

__all__ = [
    "IntersectionCase",
    "IntersectionRegion",
    "StepConfig",
    "classify_intersection",
    "surface_integral",
    "seed_layer",
    "next_layer",
    "conditional_layer",
    "transition_density",
    "ac_profile",
    "residual_check",
]

_TINY = 1e-300
_SIGMA_CAP = 1.0 - 1e-4  # plain tables stop short of the measure-zero edge
_R_TINY_REL = 1e-7


# --------------------------------------------------------------------------
# intersection geometry
# --------------------------------------------------------------------------

class IntersectionCase(str, Enum):
    EMPTY = "empty"
    PARTIAL_CAP = "partial_cap"
    FULL_SPHERE = "full_sphere"


@dataclass(frozen=True)
class IntersectionRegion:
    """The reachable part of the last-leg sphere S(x, c(t-tau)).

    ``gamma0`` is the boundary colatitude measured from the direction of
    x: admissible directions have colatitude in (gamma0, pi].  In the
    plane the region is the arc (gamma0, 2 pi - gamma0) around the
    direction of x; in dimension 3 it is the cap beyond gamma0.
    """

    case: IntersectionCase
    center: tuple
    radius: float
    tau: float
    t: float
    cos_bound: float
    gamma0: float

    @property
    def arc_bounds(self) -> tuple[float, float]:
        return (self.gamma0, 2.0 * math.pi - self.gamma0)


def classify_intersection(params: FlightParams, point: EvalPoint,
                          tau: float) -> IntersectionRegion:
    """Classify M(x, tau) as empty, a partial cap, or the full sphere.

    Empty for tau <= t/2 - |x|/(2c) (the last-leg sphere still encloses
    the whole reachable ball), full sphere for tau > t/2 + |x|/(2c)
    (sphere strictly inside the ball), partial cap between.  Both
    tangency instants carry zero quadrature measure; they are assigned
    to the empty and partial-cap cases respectively.
    """
    t, r = point.t, point.r
    c = params.c
    if not 0.0 < tau < t:
        raise DomainError(f"tau must lie in (0, t), got tau={tau}, t={t}")
    if r >= params.radius(t):
        raise DomainError(f"point radius {r} outside the open support ball")
    rho = c * (t - tau)
    if tau <= 0.5 * t - 0.5 * r / c:
        return IntersectionRegion(IntersectionCase.EMPTY, point.x, rho, tau,
                                  t, -1.0, math.pi)
    if tau > 0.5 * t + 0.5 * r / c:
        return IntersectionRegion(IntersectionCase.FULL_SPHERE, point.x, rho,
                                  tau, t, 1.0, 0.0)
    a = c * tau
    d = (a * a - r * r - rho * rho) / max(2.0 * r * rho, _TINY)
    d = min(1.0, max(-1.0, d))
    return IntersectionRegion(IntersectionCase.PARTIAL_CAP, point.x, rho, tau,
                              t, d, math.acos(d))


def surface_integral(params: FlightParams, law: DissipationLaw | None,
                     region: IntersectionRegion, integrand, tau: float,
                     n_quad: int = 96) -> float:
    """Integral of the scaled dissipation density times ``integrand``
    over the region, with respect to the surface measure.

    ``integrand`` maps an (N, m) array of points to values.  With
    ``law=None`` the dissipation weight is replaced by the constant 1,
    turning the result into the raw surface integral (arc-length and
    sphere-area checks use this).  In dimension 3 the integrand must be
    rotation-invariant: the cap integral reduces to a chord-radius
    integral and the integrand is probed along the axis through x.

    An empty region integrates to zero; that is a regular outcome of the
    recurrence, not an error.
    """
    if tau != region.tau:
        raise DomainError("tau does not match the classified region")
    if region.case is IntersectionCase.EMPTY:
        return 0.0
    x = np.asarray(region.center, dtype=float)
    r = float(np.linalg.norm(x))
    rho = region.radius
    z, w = _gl_cached(n_quad)
    if params.m == 2:
        g0 = region.gamma0
        gam = g0 + (math.pi - g0) * z  # one arc branch; mirror the other
        wg = w * (math.pi - g0)
        e1 = x / r if r > 0 else np.array([1.0, 0.0])
        e2 = np.array([-e1[1], e1[0]])
        total = 0.0
        for sgn in (1.0, -1.0):
            u = np.outer(np.cos(sgn * gam), e1) + np.outer(np.sin(sgn * gam), e2)
            f = np.asarray(integrand(x[None, :] + rho * u), dtype=float)
            if law is None:
                total += rho * float(np.sum(wg * f))
            else:
                total += float(np.sum(wg * law.density_from_axis_cos(-u[:, 0]) * f))
        return total
    if params.m == 3:
        a = params.c * tau
        if r < 1e-12 * a:
            pts = np.array([[rho, 0.0, 0.0]])
            f = float(np.asarray(integrand(pts), dtype=float)[0])
            return 4.0 * math.pi * rho * rho * f if law is None else f
        s_hi = min(r + rho, a) if region.case is IntersectionCase.PARTIAL_CAP \
            else r + rho
        s_lo = abs(r - rho)
        if s_hi <= s_lo:
            return 0.0
        s = s_lo + (s_hi - s_lo) * z
        ws = w * (s_hi - s_lo)
        f = np.asarray(integrand(s[:, None] * (x / r)[None, :]), dtype=float)
        raw = 2.0 * math.pi * rho / r * float(np.sum(ws * s * f))
        if law is None:
            return raw
        if not isinstance(law, UniformLaw):
            raise DomainError("non-symmetric laws are planar only")
        return raw / (4.0 * math.pi * rho * rho)
    raise DomainError(f"surface_integral supports m in {{2, 3}}, got {params.m}")


# --------------------------------------------------------------------------
# quadrature helpers
# --------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _gl_cached(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _sin2_panels(a: np.ndarray, b: np.ndarray, order: int,
                 with_gaps: bool = False):
    """Gauss-Legendre nodes mapped through sin^2 onto per-row intervals.

    The map's derivative vanishes at both ends, which integrates
    inverse-square-root endpoint singularities exactly and softens
    logarithmic ones.  Returns nodes and weights of shape
    ``a.shape + (order,)``; with ``with_gaps`` also the distances
    node - a and b - node in the forms width * sin^2 and width * cos^2,
    which stay meaningful when the interval is so narrow that the
    plain subtractions cancel to zero.
    """
    z, w = _gl_cached(order)
    width = (b - a)[..., None]
    s2 = np.sin(0.5 * np.pi * z) ** 2
    nodes = a[..., None] + width * s2
    weights = w * width * (0.5 * np.pi) * np.sin(np.pi * z)
    if with_gaps:
        return nodes, weights, width * s2, width * (1.0 - s2)
    return nodes, weights


# --------------------------------------------------------------------------
# ladders
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StepConfig:
    """Resolution knobs of the ladder engine."""

    ladder_slots: int = 64       # time slots J; tables at tau_j = j t / J
    n_sigma: int = 65            # radial table nodes over the scaled radius
    n_theta: int = 16            # angular table nodes (non-symmetric laws)
    time_order: int = 16         # Gauss-Legendre order per time panel
    arc_order: int = 24          # Gauss-Legendre order per surface panel
    seed_grade: tuple = (1e-3, 1e-2, 1e-1, 1.0)  # decade subpanels
    seed_quad: int = 32          # order of the planar one-turn evaluator

    def __post_init__(self) -> None:
        if self.ladder_slots < 8:
            raise DomainError("ladder needs at least 8 slots")
        if self.n_theta < 8 or self.n_theta % 2:
            raise DomainError("n_theta must be even and >= 8")


def _sigma_pattern(n: int, cap: float) -> np.ndarray:
    return cap * np.sin(0.5 * np.pi * np.arange(n) / (n - 1))


def _default_config(law: DissipationLaw) -> StepConfig:
    # the skewed planar pipeline carries full angular tables; keep its
    # default resolution laptop-friendly
    if isinstance(law, CircularGaussianLaw):
        return StepConfig(ladder_slots=32, n_sigma=49, n_theta=16,
                          time_order=12, arc_order=16,
                          seed_grade=(1e-2, 1e-1, 1.0))
    return StepConfig()


@dataclass(frozen=True)
class _Ladder:
    """Tables of one layer over the time ladder.

    ``tab`` has shape (J+1, n_sigma, n_theta); rotation-invariant data
    uses n_theta = 1.  ``reg='inv_sqrt'`` marks regularized one-turn
    tables.  ``evaluator(r, theta, t) -> values`` is the exact pointwise
    route used for public node values and seed masses; stepped ladders
    have none and are read from their tables.
    """

    n: int
    params: FlightParams
    law: DissipationLaw
    times: np.ndarray
    sigma: np.ndarray
    thetas: np.ndarray | None
    tab: np.ndarray
    reg: str | None = None
    evaluator: object = None

    @property
    def t(self) -> float:
        return float(self.times[-1])

    def query(self, s, theta, tau, support_gap=None):
        """Layer values at (radius, angle, time): bilinear in
        (sigma, theta) within a slot, linear across slots at fixed
        sigma = s / (c tau).

        For regularized one-turn tables the boundary factor
        1/sqrt((c tau)^2 - s^2) is restored here; callers probing close
        to the support sphere pass ``support_gap`` = c*tau - s computed
        in a cancellation-free form.
        """
        s = np.asarray(s, dtype=float)
        tau = np.asarray(tau, dtype=float)
        c = self.params.c
        J = len(self.times) - 1
        dt = self.t / J
        jf = np.clip(tau / dt, 0.0, J - 1e-12)
        j0 = jf.astype(int)
        ft = jf - j0
        sig = np.clip(s / np.maximum(c * tau, _TINY), 0.0, self.sigma[-1])
        i0 = np.clip(np.searchsorted(self.sigma, sig, side="right") - 1,
                     0, len(self.sigma) - 2)
        fs = np.clip((sig - self.sigma[i0])
                     / (self.sigma[i0 + 1] - self.sigma[i0]), 0.0, 1.0)
        if self.tab.shape[2] == 1:
            v0 = (1 - fs) * self.tab[j0, i0, 0] + fs * self.tab[j0, i0 + 1, 0]
            v1 = (1 - fs) * self.tab[j0 + 1, i0, 0] \
                + fs * self.tab[j0 + 1, i0 + 1, 0]
        else:
            theta = np.asarray(theta, dtype=float)
            n_th = self.tab.shape[2]
            tf = (theta + np.pi) / (2.0 * np.pi / n_th)
            k0 = np.floor(tf).astype(int) % n_th
            k1 = (k0 + 1) % n_th
            fh = tf - np.floor(tf)

            def slot(jj):
                lo = (1 - fh) * self.tab[jj, i0, k0] + fh * self.tab[jj, i0, k1]
                hi = (1 - fh) * self.tab[jj, i0 + 1, k0] \
                    + fh * self.tab[jj, i0 + 1, k1]
                return (1 - fs) * lo + fs * hi

            v0, v1 = slot(j0), slot(j0 + 1)
        out = (1 - ft) * v0 + ft * v1
        if self.reg == "inv_sqrt":
            av = c * tau
            gap = av - s if support_gap is None else support_gap
            out = out / np.sqrt(np.maximum(gap * (av + s), _TINY))
        return out

    def top_values(self, r, theta=None):
        """Layer values at the ladder's final time, exact when available."""
        r = np.asarray(r, dtype=float)
        if self.evaluator is not None:
            return self.evaluator(r, theta, self.t)
        if theta is None:
            theta = np.zeros_like(r)
        return self.query(r, np.asarray(theta, dtype=float),
                          np.full(np.shape(r), self.t))

    def mass(self) -> float:
        """Accurate mass of the top-slot layer."""
        p = self.params
        R = p.radius(self.t)
        if self.n == 1 and p.m == 2:
            # r = R sin(u) cancels the boundary inverse square root,
            # leaving the smooth regular factor
            z, w = _gl_cached(96)
            u = 0.5 * np.pi * z
            wu = 0.5 * np.pi * w
            r = R * np.sin(u)
            th_set = [0.0] if self.thetas is None else list(self.thetas)
            acc = 0.0
            for th in th_set:
                g = _one_turn_reg_planar(p, self.law, r, np.full_like(r, th),
                                         self.t)
                acc += float(R * np.sum(wu * g * np.sin(u)))
            return 2.0 * math.pi * acc / len(th_set)
        if self.n == 1 and p.m == 3:
            # exact primitive of r log((R+r)/(R-r)) over the support
            B = p.lam * math.exp(-p.lam * self.t) / (4.0 * math.pi
                                                     * p.c**2 * self.t)
            return 4.0 * math.pi * B * R * R
        r = self.sigma * R
        prof = self.tab[-1, :, 0] if self.tab.shape[2] == 1 \
            else self.tab[-1].mean(axis=1)
        if p.m == 2:
            mass = float(np.trapezoid(2.0 * np.pi * r * prof, r))
            mass += float(prof[-1]) * math.pi * (R * R - r[-1] ** 2)
        else:
            mass = float(np.trapezoid(4.0 * np.pi * r * r * prof, r))
            mass += float(prof[-1]) * (4.0 / 3.0) * math.pi * (R**3 - r[-1] ** 3)
        return mass


# --------------------------------------------------------------------------
# one-turn seeds
# --------------------------------------------------------------------------

def _one_turn_reg_planar(params: FlightParams, law: DissipationLaw,
                         r, theta, t, n_quad: int = 32):
    """Regular factor f1(x, t) * sqrt((ct)^2 - |x|^2) of the planar
    one-turn density, any dissipation law.

    A one-turn path is a first leg of length c*tau and a last leg of
    length c*(t - tau) meeting at one of the two intersection points of
    the circles with those radii around 0 and x; collapsing the two
    circle deltas leaves the inverse of twice the triangle area as the
    Jacobian.  Substituting c*(2 tau - t) = |x| sin(s) absorbs both
    endpoint singularities of the time integral together with the
    boundary factor, leaving a smooth integral of the product of the
    two direction densities over s in (-pi/2, pi/2).
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    ct = params.radius(t)
    z, w = _gl_cached(n_quad)
    ang = -0.5 * np.pi + np.pi * z
    ws = np.pi * w
    sin_s = np.sin(ang)
    rr = r[..., None]
    a = 0.5 * (ct + rr * sin_s)          # first-leg length
    rho = 0.5 * (ct - rr * sin_s)        # last-leg length
    dpar = 0.5 * (rr + ct * sin_s)       # turn point along the axis of x
    # a^2 - dpar^2 = ((ct)^2 - r^2) cos^2(s) / 4 exactly
    h = 0.5 * np.sqrt(np.maximum(ct * ct - rr * rr, 0.0)) * np.abs(np.cos(ang))
    cth = np.cos(theta)[..., None]
    sth = np.sin(theta)[..., None]
    acc = 0.0
    for sgn in (1.0, -1.0):
        u1x = (cth * dpar - sth * sgn * h) / np.maximum(a, _TINY)
        u2x = (cth * (rr - dpar) + sth * sgn * h) / np.maximum(rho, _TINY)
        acc = acc + (law.density_from_axis_cos(u1x)
                     * law.density_from_axis_cos(u2x))
    integral = np.sum(ws * acc, axis=-1)
    return params.lam * np.exp(-params.lam * t) / params.c * integral


def _seed_profile_generic(params: FlightParams, r: np.ndarray,
                          t: float) -> np.ndarray:
    """One-turn density of the isotropic law through the generic
    hypergeometric series (kept independent of the elementary fast
    paths in :mod:`randflight.analytic`)."""
    m = params.m
    ct = params.radius(t)
    coeff = (params.lam * math.exp(-params.lam * t) * 2.0 ** (m - 3)
             * gamma_half(m)
             / (math.pi ** (m / 2.0) * params.c**m * t ** (m - 1)))
    ctrl = SeriesControl(rel_tol=1e-14, max_terms=200_000)
    out = np.empty(len(r))
    for i, ri in enumerate(r):
        out[i] = coeff * gauss_2f1(0.5 * (m - 1), 2.0 - 0.5 * m, 0.5 * m,
                                   (ri / ct) ** 2, ctrl)
    return out


def _make_seed_ladder(params: FlightParams, law: DissipationLaw, t: float,
                      cfg: StepConfig) -> _Ladder:
    J = cfg.ladder_slots
    times = np.linspace(0.0, t, J + 1)
    if params.m == 3:
        if not isinstance(law, UniformLaw):
            raise DomainError("dimension 3 supports the uniform law only")

        def evaluator(r, theta, tt):
            return one_turn_profile(params, np.asarray(r, dtype=float), tt)

        sigma = _sigma_pattern(cfg.n_sigma, 1.0)
        tab = np.zeros((J + 1, cfg.n_sigma, 1))  # consumed analytically
        return _Ladder(1, params, law, times, sigma, None, tab,
                       reg=None, evaluator=evaluator)

    symmetric = not isinstance(law, CircularGaussianLaw)
    n_th = 1 if symmetric else cfg.n_theta
    thetas = None if symmetric else (-np.pi + 2.0 * np.pi
                                     * np.arange(n_th) / n_th)
    th_nodes = np.zeros(1) if symmetric else thetas
    sigma = _sigma_pattern(cfg.n_sigma, 1.0)
    tab = np.empty((J + 1, cfg.n_sigma, n_th))
    for j in range(J + 1):
        tj = times[j] if j > 0 else 1e-12 * t  # regular-factor limit at 0+
        rr = sigma * params.radius(tj)
        for k in range(n_th):
            tab[j, :, k] = _one_turn_reg_planar(
                params, law, rr, np.full_like(rr, th_nodes[k]), tj,
                cfg.seed_quad)

    def evaluator(r, theta, tt):
        r = np.asarray(r, dtype=float)
        th = np.zeros_like(r) if theta is None \
            else np.asarray(theta, dtype=float)
        g = _one_turn_reg_planar(params, law, r, th, tt, cfg.seed_quad)
        w2 = params.radius(tt) ** 2 - r * r
        return g / np.sqrt(np.maximum(w2, _TINY))

    return _Ladder(1, params, law, times, sigma, thetas, tab,
                   reg="inv_sqrt", evaluator=evaluator)


# --------------------------------------------------------------------------
# the recurrence step
# --------------------------------------------------------------------------

def _time_panels(r: np.ndarray, T: float, c: float, order: int,
                 grade: tuple | None):
    """Per-target-radius time quadrature, split at the cap/full-sphere
    transition.

    With ``grade`` (seed consumption) the stretch after the transition
    is subdivided geometrically toward it, where the integrand has a
    logarithmic spike, and the cap stretch is subdivided toward its own
    left end, where the early-time weight of the one-turn layer varies
    on the scale of tau itself.
    """
    tm = 0.5 * T - 0.5 * r / c
    tp = 0.5 * T + 0.5 * r / c
    bounds = []
    if grade:
        # decade ladder: some subpanel matches the scale of a boundary
        # layer of any relative width down to the smallest fraction
        fr = (0.0,) + tuple(grade)
        mid = 0.5 * (tm + tp)
        half = mid - tm
        for g0, g1 in zip(fr[:-1], fr[1:]):
            bounds.append((tm + g0 * half, tm + g1 * half))
        for g0, g1 in zip(fr[:-1], fr[1:]):
            bounds.append((tp - g1 * half, tp - g0 * half))
        dB = T - tp
        for g0, g1 in zip(fr[:-1], fr[1:]):
            bounds.append((tp + g0 * dB, tp + g1 * dB))
    else:
        bounds.append((tm, tp))
        bounds.append((tp, T))
    nodes, weights = [], []
    for a, b in bounds:
        nd, wt = _sin2_panels(a, b, order)
        nodes.append(nd)
        weights.append(wt)
    return np.concatenate(nodes, axis=-1), np.concatenate(weights, axis=-1)


def _step_values_planar(params: FlightParams, law: DissipationLaw,
                        ladder: _Ladder, r_targets: np.ndarray,
                        th_targets: np.ndarray, T: float,
                        cfg: StepConfig) -> np.ndarray:
    """One application of the layer recurrence at time T, planar case;
    returns values of shape (len(r_targets), len(th_targets)).

    The surface integral runs in the chord-radius variable s over both
    arc branches; the angle-to-radius Jacobian is
    2 s / sqrt(((r+rho)^2 - s^2)(s^2 - (r-rho)^2)), whose endpoint
    singularities the sin^2 panel map integrates exactly.
    """
    lam, c = params.lam, params.c
    r_targets = np.asarray(r_targets, dtype=float)
    grade = cfg.seed_grade if ladder.n == 1 else None
    r_tiny = _R_TINY_REL * c * T
    out = np.zeros((len(r_targets), len(th_targets)))

    regular = r_targets >= r_tiny
    if np.any(regular):
        r = r_targets[regular]
        tau, wt = _time_panels(r, T, c, cfg.time_order, grade)
        rho = c * (T - tau)
        rr = r[:, None]
        s_lo = np.abs(rr - rho)
        s_hi = np.minimum(rr + rho, c * tau)
        good = s_hi > s_lo
        ss, ws, lo_gap, hi_gap = _sin2_panels(s_lo, s_hi, cfg.arc_order,
                                              with_gaps=True)
        # endpoint distances in cancellation-free form: to the inner
        # support sphere (exact when s_hi is the sphere itself) and to
        # the two roots of the arc Jacobian
        gap = np.maximum(c * tau - s_hi, 0.0)[..., None] + hi_gap
        gap_outer = np.maximum((rr + rho) - s_hi, 0.0)[..., None] + hi_gap
        ker = 2.0 * ss / np.sqrt(np.maximum(
            gap_outer * ((rr + rho)[..., None] + ss)
            * lo_gap * (s_lo[..., None] + ss), _TINY))
        d1 = (rr[..., None] ** 2 + ss**2 - (rho**2)[..., None]) \
            / np.maximum(2.0 * rr[..., None], _TINY)
        d2 = np.sqrt(np.maximum(ss**2 - d1**2, 0.0))
        omega = np.arctan2(d2, d1)
        tau3 = np.broadcast_to(tau[..., None], ss.shape)
        decay = np.exp(-lam * (T - tau)) * wt
        rho3 = np.maximum(rho[..., None], _TINY)
        for li, th in enumerate(th_targets):
            cth, sth = math.cos(th), math.sin(th)
            acc = 0.0
            for sgn in (1.0, -1.0):
                chi = law.density_from_axis_cos(
                    (cth * (rr[..., None] - d1) + sth * sgn * d2) / rho3)
                E = ladder.query(ss, th + sgn * omega, tau3,
                                 support_gap=gap)
                acc = acc + chi * E
            F = np.where(good, np.sum(ws * ker * acc, axis=-1), 0.0)
            out[regular, li] = lam * np.sum(decay * F, axis=-1)

    if np.any(~regular):
        # at the origin the cap window has width r/c -> 0; only the
        # full-sphere stretch contributes, as a plain angular average
        tau, wt = _sin2_panels(np.full(1, 0.5 * T), np.full(1, T),
                               cfg.time_order)
        tau, wt = tau[0], wt[0]
        rho = c * (T - tau)
        n_phi = 64
        phi = -np.pi + 2.0 * np.pi * np.arange(n_phi) / n_phi
        chi = law.density_from_axis_cos(-np.cos(phi))
        shape = (len(tau), n_phi)
        gap = np.broadcast_to((c * (2.0 * tau - T))[:, None], shape)
        E = ladder.query(np.broadcast_to(rho[:, None], shape),
                         np.broadcast_to(phi, shape),
                         np.broadcast_to(tau[:, None], shape),
                         support_gap=gap)
        F = (E * chi).sum(axis=1) * (2.0 * np.pi / n_phi)
        val = lam * float(np.sum(wt * np.exp(-lam * (T - tau)) * F))
        out[~regular, :] = val
    return out


def _log_primitive(s: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Primitive of log((a+s)/(a-s)) in s; finite at s = a."""
    lo = a - s
    return (a + s) * np.log(np.maximum(a + s, _TINY)) \
        + np.where(lo > 0, lo * np.log(np.maximum(lo, _TINY)), 0.0)


def _step_values_r3(params: FlightParams, ladder: _Ladder,
                    r_targets: np.ndarray, T: float,
                    cfg: StepConfig) -> np.ndarray:
    """One application of the recurrence at time T, dimension 3, uniform
    law.  The cap integral reduces to (1 / (2 rho r)) int s f(s) ds;
    while consuming the one-turn layer the inner integral has the exact
    primitive (a+s) log(a+s) + (a-s) log(a-s)."""
    lam, c = params.lam, params.c
    r_targets = np.asarray(r_targets, dtype=float)
    from_seed = ladder.n == 1
    grade = cfg.seed_grade if from_seed else None
    r_tiny = _R_TINY_REL * c * T
    out = np.zeros(len(r_targets))

    regular = r_targets >= r_tiny
    if np.any(regular):
        r = r_targets[regular]
        tau, wt = _time_panels(r, T, c, cfg.time_order, grade)
        rho = c * (T - tau)
        av = c * tau
        rr = r[:, None]
        s_lo = np.abs(rr - rho)
        s_hi = np.minimum(rr + rho, av)
        good = s_hi > s_lo
        if from_seed:
            B = lam * np.exp(-lam * tau) / (4.0 * math.pi * c**2 * tau)
            inner = B * (_log_primitive(s_hi, av) - _log_primitive(s_lo, av))
        else:
            ss, ws = _sin2_panels(s_lo, s_hi, cfg.arc_order)
            tau3 = np.broadcast_to(tau[..., None], ss.shape)
            E = ladder.query(ss, None, tau3)
            inner = np.sum(ws * ss * E, axis=-1)
        F = np.where(good, inner / np.maximum(2.0 * rho * rr, _TINY), 0.0)
        out[regular] = lam * np.sum(wt * np.exp(-lam * (T - tau)) * F, axis=-1)

    if np.any(~regular):
        tau, wt = _sin2_panels(np.full(1, 0.5 * T), np.full(1, T),
                               cfg.time_order)
        tau, wt = tau[0], wt[0]
        rho = c * (T - tau)
        if from_seed:
            E = np.array([
                ladder.evaluator(
                    np.array([min(rho_i, c * t_i * (1.0 - 1e-12))]), None,
                    t_i)[0]
                for rho_i, t_i in zip(rho, tau)])
        else:
            E = ladder.query(rho, None, tau)
        out[~regular] = lam * float(np.sum(wt * np.exp(-lam * (T - tau)) * E))
    return out


def _step_evaluator(params: FlightParams, law: DissipationLaw,
                    source: _Ladder, cfg: StepConfig):
    """Exact pointwise route of the stepped layer: reapply the
    recurrence to the source ladder at the requested points, instead of
    reading the (interpolated) tables of the stepped ladder."""

    def evaluate(r, theta, tt):
        r = np.asarray(r, dtype=float)
        if params.m == 3:
            return _step_values_r3(params, source, r, tt, cfg)
        if theta is None:
            return _step_values_planar(params, law, source, r,
                                       np.zeros(1), tt, cfg)[:, 0]
        theta = np.asarray(theta, dtype=float)
        out = np.empty(r.shape)
        for th in np.unique(theta):
            mask = theta == th
            out[mask] = _step_values_planar(params, law, source, r[mask],
                                            np.array([th]), tt, cfg)[:, 0]
        return out

    return evaluate


def _step_ladder(params: FlightParams, law: DissipationLaw, ladder: _Ladder,
                 cfg: StepConfig) -> _Ladder:
    """Full recurrence step: consume the ladder of layer n, produce the
    ladder of layer n+1 on the same time slots."""
    J = len(ladder.times) - 1
    sigma = _sigma_pattern(cfg.n_sigma, _SIGMA_CAP)
    thetas = ladder.thetas
    th_targets = np.zeros(1) if thetas is None else thetas
    n_th = len(th_targets) if params.m == 2 else 1
    tab = np.zeros((J + 1, cfg.n_sigma, n_th))
    for j in range(1, J + 1):
        Tj = float(ladder.times[j])
        r = sigma * params.radius(Tj)
        if params.m == 2:
            tab[j] = _step_values_planar(params, law, ladder, r, th_targets,
                                         Tj, cfg)
        else:
            tab[j] = _step_values_r3(params, ladder, r, Tj, cfg)[:, None]
    return _Ladder(ladder.n + 1, params, law, ladder.times.copy(), sigma,
                   thetas, tab, reg=None,
                   evaluator=_step_evaluator(params, law, ladder, cfg))


# --------------------------------------------------------------------------
# public layer operations
# --------------------------------------------------------------------------

def _public_layer(ladder: _Ladder, grid: RadialGrid | PolarGrid,
                  values: np.ndarray | None = None) -> DensityLayer:
    if values is None:
        if isinstance(grid, PolarGrid):
            values = np.stack(
                [ladder.top_values(grid.nodes, np.full(grid.n_r, th))
                 for th in grid.thetas], axis=1)
        else:
            values = ladder.top_values(grid.nodes)
    layer = DensityLayer(ladder.n, grid, np.maximum(values, 0.0), "joint")
    object.__setattr__(layer, "_ladder", ladder)
    return layer


def _check_grid(params: FlightParams, law: DissipationLaw, t: float,
                grid: RadialGrid | PolarGrid) -> None:
    if grid.nodes[-1] >= params.radius(t):
        raise DomainError("grid reaches the support boundary; keep a standoff")
    if abs(grid.t - t) > 1e-12 * t:
        raise DomainError("grid time does not match the requested time")
    if isinstance(law, CircularGaussianLaw) and not isinstance(grid, PolarGrid):
        raise DomainError("non-symmetric laws need a PolarGrid")


def seed_layer(params: FlightParams, law: DissipationLaw, t: float,
               grid: RadialGrid | PolarGrid,
               config: StepConfig | None = None) -> DensityLayer:
    """The one-turn joint layer (n = 1), the seed of the recurrence.

    For the isotropic law on a radial grid the node values are computed
    through the generic hypergeometric series; for the circular Gaussian
    law through the two-point reduction of the sphere-sphere convolution
    (see `_one_turn_reg_planar`).  Either way the layer carries its time
    ladder for consumption by :func:`next_layer`.
    """
    if params.m not in (2, 3):
        raise DomainError(
            "the convolution engine covers m in {2, 3}; higher symmetric "
            "dimensions need the cap-measure reduction derived for that m")
    cfg = config or _default_config(law)
    _check_grid(params, law, t, grid)
    ladder = _make_seed_ladder(params, law, t, cfg)
    if isinstance(law, UniformLaw) and isinstance(grid, RadialGrid):
        return _public_layer(ladder, grid,
                             _seed_profile_generic(params, grid.nodes, t))
    return _public_layer(ladder, grid)


def next_layer(params: FlightParams, law: DissipationLaw,
               layer: DensityLayer,
               grid: RadialGrid | PolarGrid | None = None,
               config: StepConfig | None = None) -> DensityLayer:
    """Apply the recurrence once: joint layer n -> joint layer n+1."""
    if layer.kind != "joint":
        raise DomainError("the recurrence consumes joint layers")
    ladder = getattr(layer, "_ladder", None)
    if ladder is None:
        raise DomainError(
            "layer lacks its time ladder; build it with seed_layer/next_layer")
    cfg = config or _default_config(law)
    out_grid = grid if grid is not None else layer.grid
    _check_grid(params, law, ladder.t, out_grid)
    return _public_layer(_step_ladder(params, law, ladder, cfg), out_grid)


def conditional_layer(layer: DensityLayer,
                      params: FlightParams) -> DensityLayer:
    """Joint layer divided by its Poisson weight: the position density
    given exactly n turns."""
    if layer.kind != "joint":
        raise DomainError("layer is already conditional")
    w = conditional_weight_or_raise(layer.n, params, layer.grid.t)
    out = DensityLayer(layer.n, layer.grid, layer.values / w, "conditional")
    ladder = getattr(layer, "_ladder", None)
    if ladder is not None:
        object.__setattr__(out, "_ladder", ladder)
    return out


def transition_density(params: FlightParams, law: DissipationLaw, t: float,
                       K: int, grid: RadialGrid | PolarGrid,
                       config: StepConfig | None = None) -> DensityField:
    """Assemble the transition density: singular layer, layers 1..K of
    the recurrence, and the Poisson tail of the truncation."""
    if K < 1:
        raise DomainError("need at least one layer (K >= 1)")
    cfg = config or _default_config(law)
    if params.m not in (2, 3):
        raise DomainError("the convolution engine covers m in {2, 3}")
    _check_grid(params, law, t, grid)
    sing = singular_layer(params, law, t)
    ladders = [_make_seed_ladder(params, law, t, cfg)]
    for _ in range(K - 1):
        ladders.append(_step_ladder(params, law, ladders[-1], cfg))
    layers = []
    for lad in ladders:
        if lad.n == 1 and isinstance(law, UniformLaw) \
                and isinstance(grid, RadialGrid):
            layers.append(_public_layer(
                lad, grid, _seed_profile_generic(params, grid.nodes, t)))
        else:
            layers.append(_public_layer(lad, grid))
    masses = tuple(lad.mass() for lad in ladders)
    return DensityField(params, t, sing, tuple(layers), masses,
                        tail_mass(K, params, t), law=law,
                        ladders=tuple(ladders))


def ac_profile(field_obj: DensityField, r, theta=None) -> np.ndarray:
    """Absolutely continuous density of an assembled field at radius
    (and angle, for non-symmetric laws); zero outside the support."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    R = field_obj.params.radius(field_obj.t)
    inside = r < R
    out = np.zeros(r.shape)
    if np.any(inside):
        th = None if theta is None \
            else np.atleast_1d(np.asarray(theta, dtype=float))[inside]
        acc = 0.0
        for lad in field_obj.ladders:
            acc = acc + lad.top_values(r[inside], th)
        out[inside] = acc
    return out


def residual_check(field_obj: DensityField,
                   config: StepConfig | None = None) -> float:
    """Sup-norm defect of the assembled field in the renewal-type
    integral equation p = p0 + lam * int (p0 * p) dtau.

    The right-hand side reapplies the singular-layer convolution
    operator to the field: the p0*p0 term is the one-turn layer and the
    operator applied to the truncated stack reproduces layers 2..K+1, so
    the residual is dominated by the first dropped layer plus quadrature
    noise.  Evaluated in sup norm over the epsilon-interior grid.
    """
    params = field_obj.params
    law = field_obj.law
    cfg = config or _default_config(law)
    t = field_obj.t
    grid = field_obj.layers[0].grid
    polar = isinstance(grid, PolarGrid)
    th_targets = grid.thetas if polar else np.zeros(1)

    def node_values(lad: _Ladder) -> np.ndarray:
        if polar:
            return np.stack([lad.top_values(grid.nodes, np.full(grid.n_r, th))
                             for th in th_targets], axis=1)
        return lad.top_values(grid.nodes)[:, None]

    lhs = 0.0
    for lad in field_obj.ladders:
        lhs = lhs + node_values(lad)

    seed_lad = field_obj.ladders[0]
    rhs = node_values(seed_lad)
    for lad in field_obj.ladders:
        if params.m == 2:
            rhs = rhs + _step_values_planar(params, law, lad, grid.nodes,
                                            th_targets, t, cfg)
        else:
            rhs = rhs + _step_values_r3(params, lad, grid.nodes, t,
                                        cfg)[:, None]
    return float(np.max(np.abs(lhs - rhs)))
