"""Best response of a mutant subpopulation to the fixed resident feedback.

The phase space (x_r, x_m, tau) is split by the resident's own surfaces
(``S_r``, ``S_r^sigma``) into three resident regimes.  In each regime the
mutant has a switching boundary in x_m:

* residents reproducing: ``S_m`` (tau <= ln 2) continued by the singular
  arc ``S_1^sigma``;
* residents feeding: ``S_m``, continued by ``S_2^sigma`` when that arc
  exists (small c);
* residents sliding on ``S_r^sigma``: the switching curve ``S_hat``
  continued by the singular arc ``S_hat^sigma`` from the junction point B.

Above a boundary the mutant reproduces, below it feeds, on a singular arc it
uses the intermediate control that keeps it there.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import resident as res
from .model import (
    LN2,
    ControlPair,
    EpsBoundViolatedError,
    ModelParams,
    NotExistentError,
    ReducedState,
    TauOutOfSeasonError,
    XOutOfRangeError,
    validate,
)
from .resident import ON_SURFACE_TOL, Region

_ODE_TOL = dict(rtol=1e-12, atol=1e-14)


class SurfaceId(enum.Enum):
    S_m = "S_m"
    S1_sigma = "S1_sigma"
    S_hat = "S_hat"
    S_hat_sigma = "S_hat_sigma"
    S2_sigma = "S2_sigma"
    S_r = "S_r"
    S_r_sigma = "S_r_sigma"


class MutantMode(enum.Enum):
    FEED = "feed"
    REPRO = "repro"
    SINGULAR = "singular"


# returned by singular_arc_S1_tau when eps = 0: the arc is the plane x_m = 1/2
# for every tau >= ln 2
S1_HYPERPLANE = "x_m=1/2 for all tau>=ln2"


def switching_surface_Sm(tau: float, T: float | None = None) -> float:
    if tau < 0.0 or (T is not None and tau > T):
        raise TauOutOfSeasonError(tau, T)
    return -math.expm1(-tau)


def singular_arc_S1_tau(x_m: float, eps: float, c: float):
    if not (0.0 < x_m <= 0.5):
        raise XOutOfRangeError(x_m, 0.0, 0.5)
    if eps == 0.0:
        return S1_HYPERPLANE
    ec = eps * c
    return -math.log(x_m) + 2.0 / (x_m * ec) - 4.0 / ec


def s1_residual(x_m, tau, eps, c):
    """eps*c times the S_1^sigma residual: positive below the arc, stays
    finite as eps -> 0 where it becomes 2 - 4 x_m."""
    ec = eps * c
    x = np.asarray(x_m, dtype=float)
    xlogx = np.where(x > 0.0, x * np.log(np.where(x > 0.0, x, 1.0)), 0.0)
    r = -ec * xlogx + 2.0 - x * (4.0 + ec * tau)
    return float(r) if r.ndim == 0 else r


def singular_control_S1(x_m: float, eps: float, c: float) -> float:
    if not (0.0 < x_m <= 0.5):
        raise XOutOfRangeError(x_m, 0.0, 0.5)
    return 2.0 * x_m / (2.0 + x_m * eps * c)


def sliding_resident_control(x_r: float, u_m: float, eps: float, c: float) -> float:
    """Equivalent (Filippov) resident control that holds x_r on S_r^sigma."""
    if eps >= 1.0 / c:
        raise EpsBoundViolatedError(eps, c)
    if not (0.0 < x_r <= 0.5):
        raise XOutOfRangeError(x_r, 0.0, 0.5)
    return _hat_u_r(x_r, u_m, eps, c)


def _hat_u_r(x_r, u_m, eps, c):
    d = 1.0 + (1.0 - eps) * x_r * c
    return 2.0 * x_r * (1.0 + x_r * c) / (d * (2.0 + x_r * c)) - x_r * eps * c * u_m / d


def hat_arc_xm(x_r: float, c: float) -> float:
    if not (0.0 < x_r <= 0.5):
        raise XOutOfRangeError(x_r, 0.0, 0.5)
    return (2.0 + x_r * c) / 4.0


def hat_singular_control(x_r: float, c: float) -> float:
    if not (0.0 < x_r <= 0.5):
        raise XOutOfRangeError(x_r, 0.0, 0.5)
    return 1.0 / (2.0 + x_r * c)


# -- S_2^sigma ---------------------------------------------------------------

def s2_exists(eps: float, c: float) -> bool:
    return 1.0 - c * (1.0 - eps) >= 0.0


def kelley_S2(x_m: float, eps: float, c: float) -> float:
    """Kelley quantity on S_2^sigma; must be >= 0."""
    return 2.0 - (1.0 - eps) * c + x_m * eps * c


def _um3(x_m, eps, c):
    return (2.0 * x_m - (1.0 - eps) * c * (1.0 + x_m)) / (2.0 - (1.0 - eps) * c + x_m * eps * c)


def singular_control_S2(x_m: float, eps: float, c: float) -> float | None:
    """Singular mutant control on S_2^sigma, or None where the arc cannot exist."""
    if not s2_exists(eps, c):
        return None
    if kelley_S2(x_m, eps, c) < 0.0:
        return None
    u = _um3(x_m, eps, c)
    if not (0.0 <= u <= 1.0):
        return None
    return u


def s2_tangency_point(eps: float, c: float) -> tuple[float, float]:
    """(x_m, tau) on S_m from which S_2^sigma is emitted."""
    denom = 2.0 - c * (1.0 - eps)
    if not s2_exists(eps, c) or denom <= 1.0:
        raise NotExistentError(f"S2_sigma does not exist for eps={eps}, c={c}")
    x = 1.0 / denom
    return x, -math.log1p(-x)


# -- motion inside S_r^sigma --------------------------------------------------

def arc_coefficients(x_r, eps, c):
    """Coefficients of the mutant's problem while residents slide on S_r^sigma.

    With u the mutant control and w = (1-eps) u_hat_r + eps u the total
    feeding rate, ``c w = (1 - alpha) + k u``.  ``rho = k'/k`` (backward
    time), finite even when eps = 0.  Works on complex input (used for
    complex-step derivatives).
    """
    d = 1.0 + (1.0 - eps) * x_r * c
    a = 2.0 * x_r * (1.0 + x_r * c) / (d * (2.0 + x_r * c))
    k = c * eps / d
    alpha = 1.0 - c * (1.0 - eps) * a
    dxr = -x_r * x_r * c / (2.0 + x_r * c)
    rho = -(1.0 - eps) * c * dxr / d
    return alpha, k, rho


def singular_costate(x_m, x_r, eps, c):
    """Costate lambda_m required by A_hat = A_hat' = 0 at (x_m, x_r)."""
    alpha, _, rho = arc_coefficients(x_r, eps, c)
    return (1.0 - x_m * (1.0 - rho)) / (alpha + rho)


def arc_singular_control(x_m: float, x_r: float, eps: float, c: float) -> float:
    """Mutant control keeping A_hat identically zero along S_hat^sigma.

    Reduces to 1/(2 + x_r c) when eps = 0.
    """
    alpha, k, rho = arc_coefficients(x_r, eps, c)
    lam = (1.0 - x_m * (1.0 - rho)) / (alpha + rho)
    dlam_dx = -(1.0 - rho) / (alpha + rho)
    h = 1e-30
    dlam_dxr = singular_costate(x_m, complex(x_r, h), eps, c).imag / h
    dlam_dtau = dlam_dxr * res.arc_velocity(x_r, c)
    num = 1.0 - lam - dlam_dx * alpha * x_m - dlam_dtau
    return num / (1.0 - dlam_dx * (1.0 + k * x_m))


class ArcStructure:
    """Mutant switching boundary on S_r^sigma as a function of tau.

    ``S_hat`` is traced from the u_m = 0 characteristics leaving the arc end
    (x_r = 1/2, tau = ln 2); along each of them x_m and the value scale
    linearly with the exit value, so one ODE solve gives the whole curve.
    The junction B is where the characteristic touches the singular locus,
    and ``S_hat^sigma`` is integrated from B with the singular control.
    """

    def __init__(self, eps: float, c: float, tau_max: float):
        self.eps = eps
        self.c = c
        self.tau_max = max(tau_max, LN2 + 1.0)
        self._build()

    def _coeffs(self, x_r):
        return arc_coefficients(x_r, self.eps, self.c)

    def _build(self):
        eps, c = self.eps, self.c

        def rhs(tau, y):
            x_r, log_e, g = y
            alpha, _, _ = self._coeffs(x_r)
            return [res.arc_velocity(x_r, c), alpha, -(1.0 - alpha) * g + math.exp(log_e)]

        sol = solve_ivp(rhs, (LN2, self.tau_max), [0.5, 0.0, 0.5], method="DOP853",
                        dense_output=True, **_ODE_TOL)
        self._exit_field = sol.sol

        taus = np.linspace(LN2, self.tau_max, 4001)
        gap = np.array([self._junction_gap(t) for t in taus])
        self.tau_B = math.inf
        idx = np.nonzero(np.sign(gap[1:]) != np.sign(gap[:-1]))[0]
        if idx.size:
            i = idx[0]
            self.tau_B = brentq(self._junction_gap, taus[i], taus[i + 1], xtol=1e-14)

        self._sigma = None
        if math.isfinite(self.tau_B):
            x_rB = self.x_r(self.tau_B)
            x_mB = self._s_hat(self.tau_B)
            u_B = self.value_exit_field(x_mB, self.tau_B)

            def rhs_sigma(tau, y):
                x_r, x_m, u_val = y
                alpha, k, _ = self._coeffs(x_r)
                us = arc_singular_control(x_m, x_r, eps, c)
                return [
                    res.arc_velocity(x_r, c),
                    alpha * x_m - us * (1.0 + k * x_m),
                    -(1.0 - alpha) * u_val - k * us * u_val + x_m * (1.0 - us),
                ]

            sig = solve_ivp(rhs_sigma, (self.tau_B, self.tau_max), [x_rB, x_mB, u_B],
                            method="DOP853", dense_output=True, **_ODE_TOL)
            self._sigma = sig.sol

    def x_r(self, tau: float) -> float:
        return float(self._exit_field(tau)[0])

    def _s_hat(self, tau: float) -> float:
        x_r, log_e, g = self._exit_field(tau)
        _, k, _ = self._coeffs(x_r)
        lam = -math.expm1(-tau)
        return lam / (1.0 + k * (g / math.exp(log_e) - lam))

    def value_exit_field(self, x_m: float, tau: float) -> float:
        """Mutant value on the u_m = 0 part of the arc (above S_hat)."""
        _, log_e, g = self._exit_field(tau)
        return x_m * g / math.exp(log_e)

    def _junction_gap(self, tau: float) -> float:
        x_m = self._s_hat(tau)
        return -math.expm1(-tau) - singular_costate(x_m, self.x_r(tau), self.eps, self.c)

    def gamma(self, tau: float) -> float:
        if tau <= self.tau_B:
            return self._s_hat(max(tau, LN2))
        return float(self._sigma(tau)[1])

    def sigma_value(self, tau: float) -> float:
        """Mutant value carried along S_hat^sigma."""
        return float(self._sigma(tau)[2])

    def u_star(self, x_m: float, x_r: float) -> float:
        return arc_singular_control(x_m, x_r, self.eps, self.c)


class ClosedFormArcStructure:
    """eps = 0: S_hat = S_m on the arc, S_hat^sigma: x_m = (2 + x_r c)/4."""

    def __init__(self, c: float, tau_max: float):
        self.eps = 0.0
        self.c = c
        self.tau_max = tau_max
        x_B = point_B(c)[0]
        self.tau_B = res.singular_arc_tau(x_B, c)

    def x_r(self, tau: float) -> float:
        return res.singular_arc_x(tau, self.c)

    def gamma(self, tau: float, x_r: float | None = None) -> float:
        if tau <= self.tau_B:
            return -math.expm1(-tau)
        if x_r is None:
            x_r = self.x_r(tau)
        return (2.0 + x_r * self.c) / 4.0

    def u_star(self, x_m: float, x_r: float) -> float:
        return 1.0 / (2.0 + x_r * self.c)


def point_B(c: float) -> tuple[float, float, float]:
    """Junction (x_r, x_m, tau) of S_hat and S_hat^sigma for eps = 0."""

    def f(x):
        return (2.0 + x * c) / 4.0 + math.expm1(-res.singular_arc_tau(x, c))

    xs = np.linspace(0.5, 1e-3, 2000)
    vals = [f(x) for x in xs]
    for i in range(len(xs) - 1):
        if vals[i] > 0.0 >= vals[i + 1]:
            x = brentq(f, xs[i + 1], xs[i], xtol=1e-16, rtol=1e-15)
            return x, (2.0 + x * c) / 4.0, res.singular_arc_tau(x, c)
    raise NotExistentError(f"junction point B not found for c={c}")


class S2Curve:
    """S_2^sigma traced from its tangency point by the singular control."""

    def __init__(self, eps: float, c: float, tau_max: float):
        self.eps, self.c = eps, c
        self.x_star, self.tau_star = s2_tangency_point(eps, c)
        self.tau_end = math.inf
        self._sol = None
        if eps > 0.0 and tau_max > self.tau_star:
            def rhs(tau, y):
                x = y[0]
                u = min(max(_um3(x, eps, c), 0.0), 1.0)
                return [x * (1.0 - c * (1.0 - eps) - c * eps * u) - u]

            sol = solve_ivp(rhs, (self.tau_star, tau_max), [self.x_star], method="DOP853",
                            dense_output=True, **_ODE_TOL)
            self._sol = sol.sol

    def x_m(self, tau: float) -> float:
        if self._sol is None:
            return self.x_star
        return float(self._sol(tau)[0])

    def u(self, x_m: float) -> float:
        return min(max(_um3(x_m, self.eps, self.c), 0.0), 1.0)


# -- hybrid segments consumed by the integrator --------------------------------

@dataclass
class EventSpec:
    """Segment ends when ``residual`` (positive inside the segment) reaches 0.

    ``surface`` may depend on tau when one residual covers two surfaces."""

    surface: SurfaceId | Callable[[float], SurfaceId]
    residual: Callable[[float, float, float], float]

    def surface_at(self, tau: float) -> SurfaceId:
        return self.surface if isinstance(self.surface, SurfaceId) else self.surface(tau)


@dataclass
class Segment:
    resident: Region
    mutant: MutantMode
    law: Callable[[float, float, float], tuple[float, float]]
    events: list[EventSpec] = field(default_factory=list)

    @property
    def sliding(self) -> bool:
        return self.resident is Region.SLIDE


def _resident_surface(tau):
    return SurfaceId.S_r if tau <= LN2 else SurfaceId.S_r_sigma


def _resident_events(region: Region, c: float) -> list[EventSpec]:
    if region is Region.FEED:
        def r(x_r, x_m, tau):
            if tau <= LN2:
                return -math.expm1(-tau) - x_r
            return res.arc_residual(x_r, tau, c)
        return [EventSpec(_resident_surface, r)]
    if region is Region.REPRO:
        def r(x_r, x_m, tau):
            if tau <= LN2:
                return 1.0
            return -res.arc_residual(x_r, tau, c)
        return [EventSpec(SurfaceId.S_r_sigma, r)]
    return [EventSpec(SurfaceId.S_r, lambda x_r, x_m, tau: tau - LN2)]


class MutantPolicy:
    """Feedback (u_r, u_m) for a resident population of total density c with
    mutant fraction eps < 1/c."""

    def __init__(self, params: ModelParams):
        validate(params)
        if not params.hierarchical_admissible:
            raise EpsBoundViolatedError(params.eps, params.c)
        self.params = params
        self.c = params.c
        self.eps = params.eps
        self.resident = res.ResidentPolicy(params.c, params.T)

    @cached_property
    def arc(self):
        tau_max = max(self.params.T, LN2) + 1.0
        if self.eps == 0.0:
            return ClosedFormArcStructure(self.c, tau_max)
        return ArcStructure(self.eps, self.c, tau_max)

    @cached_property
    def s2(self) -> S2Curve | None:
        if not s2_exists(self.eps, self.c):
            return None
        try:
            return S2Curve(self.eps, self.c, max(self.params.T, LN2) + 1.0)
        except NotExistentError:
            return None

    # boundaries ------------------------------------------------------------
    def _gamma_arc(self, tau, x_r):
        if isinstance(self.arc, ClosedFormArcStructure):
            return self.arc.gamma(tau, x_r)
        return self.arc.gamma(tau)

    def _mutant_residual(self, region: Region):
        """Residual that is positive below the mutant boundary of ``region``."""
        eps, c = self.eps, self.c
        if region is Region.REPRO:
            def r(x_r, x_m, tau):
                if tau <= LN2:
                    return -math.expm1(-tau) - x_m
                return s1_residual(x_m, tau, eps, c)
            return r, lambda tau: SurfaceId.S_m if tau <= LN2 else SurfaceId.S1_sigma
        if region is Region.FEED:
            s2 = self.s2

            def r(x_r, x_m, tau):
                if s2 is not None and tau > s2.tau_star:
                    return s2.x_m(tau) - x_m
                return -math.expm1(-tau) - x_m

            def surface(tau):
                if s2 is not None and tau > s2.tau_star:
                    return SurfaceId.S2_sigma
                return SurfaceId.S_m
            return r, surface

        def r(x_r, x_m, tau):
            return self._gamma_arc(tau, x_r) - x_m
        return r, lambda tau: SurfaceId.S_hat if tau <= self.arc.tau_B else SurfaceId.S_hat_sigma

    def _singular_span(self, region: Region) -> float:
        """Singular arc of ``region`` exists for tau above this value."""
        if region is Region.REPRO:
            return LN2
        if region is Region.FEED:
            return self.s2.tau_star if self.s2 is not None else math.inf
        return self.arc.tau_B

    def _singular_u(self, region: Region, x_r, x_m):
        if region is Region.REPRO:
            return 2.0 * x_m / (2.0 + x_m * self.eps * self.c)
        if region is Region.FEED:
            return self.s2.u(x_m)
        return self.arc.u_star(x_m, x_r)

    # classification ----------------------------------------------------------
    def classify(self, rs: ReducedState, tol: float = ON_SURFACE_TOL) -> tuple[Region, MutantMode]:
        region = res.classify(rs.x_r, rs.tau, self.c, tol, exit_tiebreak=True)
        if rs.tau <= tol:
            return Region.REPRO, MutantMode.REPRO
        resid, _ = self._mutant_residual(region)
        r = resid(rs.x_r, rs.x_m, rs.tau)
        if rs.tau > self._singular_span(region) + tol and abs(r) < tol * _residual_scale(region, rs):
            return region, MutantMode.SINGULAR
        # on a switching surface: region entered in forward time
        return region, (MutantMode.FEED if r > tol * _residual_scale(region, rs) else MutantMode.REPRO)

    def _law(self, region: Region, mode: MutantMode):
        eps, c = self.eps, self.c

        def u_m_of(x_r, x_m):
            if mode is MutantMode.FEED:
                return 1.0
            if mode is MutantMode.REPRO:
                return 0.0
            return min(max(self._singular_u(region, x_r, x_m), 0.0), 1.0)

        if region is Region.FEED:
            return lambda x_r, x_m, tau: (1.0, u_m_of(x_r, x_m))
        if region is Region.REPRO:
            return lambda x_r, x_m, tau: (0.0, u_m_of(x_r, x_m))

        def law(x_r, x_m, tau):
            u_m = u_m_of(x_r, x_m)
            return min(max(_hat_u_r(x_r, u_m, eps, c), 0.0), 1.0), u_m
        return law

    def control(self, rs: ReducedState) -> ControlPair:
        region, mode = self.classify(rs)
        u_r, u_m = self._law(region, mode)(rs.x_r, rs.x_m, rs.tau)
        return ControlPair(u_r, u_m)

    __call__ = control

    def segment(self, rs: ReducedState) -> Segment:
        region, mode = self.classify(rs)
        events = _resident_events(region, self.c)
        resid, surface = self._mutant_residual(region)
        if mode is MutantMode.FEED:
            events.append(EventSpec(surface, resid))
        elif mode is MutantMode.REPRO:
            events.append(EventSpec(surface, lambda x_r, x_m, tau: -resid(x_r, x_m, tau)))
        else:
            span = self._singular_span(region)
            end = SurfaceId.S_hat if region is Region.SLIDE else SurfaceId.S_m
            events.append(EventSpec(end, lambda x_r, x_m, tau: tau - span))
        return Segment(region, mode, self._law(region, mode), events)

    # drawing -----------------------------------------------------------------
    def surfaces(self, taus) -> dict[SurfaceId, np.ndarray]:
        """Polylines (tau, x) of every surface that exists, clipped to the season."""
        c, eps = self.c, self.eps
        taus = np.asarray(taus, dtype=float)
        out: dict[SurfaceId, np.ndarray] = {}
        lo = taus[taus <= LN2]
        hi = taus[taus > LN2]
        out[SurfaceId.S_r] = np.column_stack([lo, -np.expm1(-lo)])
        out[SurfaceId.S_m] = np.column_stack([taus, -np.expm1(-taus)])
        if hi.size:
            out[SurfaceId.S_r_sigma] = np.column_stack([hi, res.singular_arc_x_array(hi, c)])
            if eps == 0.0:
                x1 = np.full_like(hi, 0.5)
            else:
                x1 = res.singular_arc_x_array(hi, eps * c)
            out[SurfaceId.S1_sigma] = np.column_stack([hi, x1])
            tb = self.arc.tau_B
            a = hi[hi <= tb]
            b = hi[hi > tb]
            out[SurfaceId.S_hat] = np.column_stack([a, [self._gamma_arc(t, None) for t in a]])
            if b.size:
                out[SurfaceId.S_hat_sigma] = np.column_stack([b, [self._gamma_arc(t, None) for t in b]])
        if self.s2 is not None:
            t2 = taus[taus > self.s2.tau_star]
            if t2.size:
                out[SurfaceId.S2_sigma] = np.column_stack([t2, [self.s2.x_m(t) for t in t2]])
        return out


def _residual_scale(region: Region, rs: ReducedState) -> float:
    # s1_residual is scaled by roughly 4 relative to x_m
    return 4.0 if region is Region.REPRO and rs.tau > LN2 else 1.0


class MimicPolicy:
    """Mutants copy the residents' feedback (u_m = u_r)."""

    def __init__(self, params: ModelParams):
        validate(params)
        if not params.hierarchical_admissible:
            raise EpsBoundViolatedError(params.eps, params.c)
        self.params = params
        self.c, self.eps = params.c, params.eps
        self.resident = res.ResidentPolicy(params.c, params.T)

    def _law(self, region: Region):
        eps, c = self.eps, self.c
        if region is Region.FEED:
            return lambda x_r, x_m, tau: (1.0, 1.0)
        if region is Region.REPRO:
            return lambda x_r, x_m, tau: (0.0, 0.0)

        def law(x_r, x_m, tau):
            # u = a - b u  =>  u = a / (1 + b)
            d = 1.0 + (1.0 - eps) * x_r * c
            u = _hat_u_r(x_r, 0.0, eps, c) / (1.0 + x_r * eps * c / d)
            return u, u
        return law

    def control(self, rs: ReducedState) -> ControlPair:
        region = self.resident.region(rs)
        return ControlPair(*self._law(region)(rs.x_r, rs.x_m, rs.tau))

    __call__ = control

    def segment(self, rs: ReducedState) -> Segment:
        region = self.resident.region(rs, exit_tiebreak=True)
        mode = {Region.FEED: MutantMode.FEED, Region.REPRO: MutantMode.REPRO,
                Region.SLIDE: MutantMode.SINGULAR}[region]
        return Segment(region, mode, self._law(region), _resident_events(region, self.c))
