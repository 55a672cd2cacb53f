"""Collectively optimal feedback of the resident consumers.

Short seasons give a bang-bang pattern (feed, then reproduce after the
switching curve ``S: x = 1 - exp(-tau)``).  Long seasons add a singular arc
``S^sigma`` on which the residents mix feeding and reproduction.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import brentq

from .model import LN2, ModelError, ReducedState, TauOutOfSeasonError, XOutOfRangeError

# point queries only; trajectories use event detection instead
ON_SURFACE_TOL = 1e-9


class Region(enum.Enum):
    FEED = "feed"
    SLIDE = "slide"
    REPRO = "repro"


def switching_curve_S(tau: float, T: float | None = None) -> float:
    if tau < 0.0 or (T is not None and tau > T):
        raise TauOutOfSeasonError(tau, T)
    return -math.expm1(-tau)


def singular_arc_tau(x: float, c: float) -> float:
    """Backward time at which the singular arc passes through ratio ``x``."""
    if not (0.0 < x <= 0.5):
        raise XOutOfRangeError(x, 0.0, 0.5)
    return -math.log(x) + 2.0 / (x * c) - 4.0 / c


def arc_residual(x, tau, c):
    """``x * (arc_tau(x) - tau)``; positive below the arc, negative above.

    Smooth down to x = 0 (where it equals 2/c), which makes it usable as an
    event function from the season start.
    """
    x = np.asarray(x, dtype=float)
    xlogx = np.where(x > 0.0, x * np.log(np.where(x > 0.0, x, 1.0)), 0.0)
    r = -xlogx + 2.0 / c - x * (4.0 / c + tau)
    return float(r) if r.ndim == 0 else r


def singular_arc_x(tau: float, c: float) -> float:
    """Ratio on the singular arc at backward time ``tau >= ln 2``."""
    if tau < LN2 - 1e-14:
        raise TauOutOfSeasonError(tau)
    if tau <= LN2:
        return 0.5
    lo = 2.0 / (c * tau + 4.0)
    return brentq(lambda x: arc_residual(x, tau, c), lo, 0.5, xtol=1e-16, rtol=1e-15)


def singular_arc_x_array(tau, c):
    """Vectorised :func:`singular_arc_x`; ``tau`` below ln 2 is clamped to the arc end."""
    tau = np.maximum(np.asarray(tau, dtype=float), LN2)
    lo = 2.0 / (c * tau + 4.0)
    hi = np.full_like(tau, 0.5)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = arc_residual(mid, tau, c) > 0.0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def singular_control(x: float, c: float) -> float:
    if not (0.0 < x <= 0.5):
        raise XOutOfRangeError(x, 0.0, 0.5)
    return 2.0 * x / (2.0 + x * c)


def arc_velocity(x, c):
    """d x / d tau along the arc (backward time)."""
    return -x * x * c / (2.0 + x * c)


def season_threshold_T1(c: float) -> float:
    """Season length separating bang-bang from bang-singular-bang behaviour."""
    if not (c > 0.0):
        raise ModelError(f"c must be > 0, got {c!r}")
    h = c - 1.0
    if abs(h) < 1e-4:
        # removable 0/0 at c=1: Taylor series of the numerator
        return 0.5 + LN2 - h / 8.0 + h * h / 24.0
    return (math.log(c + 1.0) + (c - 2.0) * LN2) / h


def boundary_x(tau: float, c: float) -> float:
    """Upper edge of the feeding region: ``S`` for tau <= ln 2, the arc beyond."""
    if tau <= LN2:
        return -math.expm1(-tau)
    return singular_arc_x(tau, c)


def boundary_x_array(tau, c):
    tau = np.asarray(tau, dtype=float)
    return np.where(tau <= LN2, -np.expm1(-tau), singular_arc_x_array(tau, c))


def classify(x: float, tau: float, c: float, tol: float = ON_SURFACE_TOL,
             exit_tiebreak: bool = False) -> Region:
    """Region of (x, tau).  Ties on S go to the region entered in forward
    time.  The arc end (1/2, ln 2) counts as on the arc unless
    ``exit_tiebreak`` is set, which the integrator needs to leave the arc."""
    if tau <= tol:
        return Region.REPRO
    arc_from = LN2 + tol if exit_tiebreak else LN2 - tol
    if tau < arc_from:
        return Region.REPRO if x >= -math.expm1(-tau) - tol else Region.FEED
    xs = singular_arc_x(max(tau, LN2), c)
    if abs(x - xs) < tol:
        return Region.SLIDE
    return Region.REPRO if x > xs else Region.FEED


def resident_control(state: ReducedState, c: float) -> float:
    region = classify(state.x_r, state.tau, c)
    if region is Region.FEED:
        return 1.0
    if region is Region.REPRO:
        return 0.0
    return singular_control(min(state.x_r, 0.5), c)


@dataclass(frozen=True)
class ResidentPolicy:
    c: float
    T: float

    @cached_property
    def T1(self) -> float:
        return season_threshold_T1(self.c)

    @property
    def has_singular_phase(self) -> bool:
        return self.T > self.T1

    def region(self, rs: ReducedState, exit_tiebreak: bool = False) -> Region:
        return classify(rs.x_r, rs.tau, self.c, exit_tiebreak=exit_tiebreak)

    def control(self, rs: ReducedState) -> float:
        return resident_control(rs, self.c)

    def control_array(self, x, tau):
        """Bang-bang part of the feedback on arrays (arc points get 0/1 by side)."""
        return np.where(np.asarray(x) < boundary_x_array(tau, self.c), 1.0, 0.0)
