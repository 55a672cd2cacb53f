"""Closed-form season values for eps = 0, starting from p_r = p_m = 0.

All values are per unit of initial resource (multiply by n0).  Seasons
fall into three regimes:

A  (T <= T1)       residents never reach the singular arc; the mutant
                   mirrors them exactly.
B  (T1 < T <= T2)  residents slide on S_r^sigma; the mutant keeps feeding
                   and switches on S_hat.
C  (T > T2)        the mutant also uses its singular arc S_hat^sigma.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import resident as res
from .model import LN2, ModelError, feeding_ratio, feeding_time
from .mutant import point_B


class RootNotBracketed(ModelError):
    pass


class RegionTag(enum.Enum):
    A = "A"
    B = "B"
    C = "C"


@dataclass(frozen=True)
class Regions:
    c: float
    T1: float
    T2: float

    def tag(self, T: float) -> RegionTag:
        if T <= self.T1:
            return RegionTag.A
        if T <= self.T2:
            return RegionTag.B
        return RegionTag.C


def _root(f, a, b):
    try:
        fa, fb = f(a), f(b)
    except (ValueError, ModelError) as exc:
        raise RootNotBracketed(str(exc)) from exc
    if fa * fb > 0.0:
        raise RootNotBracketed(f"no sign change on [{a}, {b}] ({fa}, {fb})")
    return brentq(f, a, b, xtol=1e-15, rtol=1e-15, maxiter=500)


def _check(T, c):
    if not (T > 0.0):
        raise ModelError(f"T must be > 0, got {T!r}")
    if not (c > 0.0):
        raise ModelError(f"c must be > 0, got {c!r}")


def _arc_path_C1(x_r, tau, x_m, c):
    # on S_r^sigma with u_m = 1: x_m = C1 x_r^2 e^tau + x_r c + 1
    return (x_m - x_r * c - 1.0) / (x_r * x_r * math.exp(tau))


def _arc_path_xm(C1, tau, c):
    x_r = res.singular_arc_x(tau, c)
    return C1 * x_r * x_r * math.exp(tau) + x_r * c + 1.0, x_r


def arc_entry(T: float, c: float) -> tuple[float, float]:
    """(x_r2, tau2) where the feeding residents meet S_r^sigma (T > T1)."""
    def g(tau):
        return res.arc_residual(feeding_ratio(T - tau, c), tau, c)
    return _root_arc(g, T, c)


def _root_arc(g, T, c):
    # the arc lies below x = 1/2, so feeding longer than that overshoots it
    tau = _root(g, max(LN2, T - feeding_time(0.5, c)), T)
    return feeding_ratio(T - tau, c), tau


def switch_point_A(T: float, c: float) -> tuple[float, float]:
    """(x1, tau1) where feeding meets S: 1 - e^{-tau} = x(T - tau)."""
    _check(T, c)
    tau = _root(lambda s: -math.expm1(-s) - feeding_ratio(T - s, c), 0.0, T)
    return -math.expm1(-tau), tau


def compute_T2(c: float) -> float:
    x_B, _, tau_B = point_B(c)
    C1 = (x_B * c - 2.0) * (3.0 * x_B * c + 2.0) / (16.0 * x_B * x_B)

    # entry point on the arc whose u_m = 1 path runs into B; there x_m = x_r
    def g(tau):
        x_m, x_r = _arc_path_xm(C1, tau, c)
        return x_m - x_r

    hi = tau_B + 1.0
    while g(hi) * g(tau_B) > 0.0:
        hi = tau_B + 2.0 * (hi - tau_B)
        if hi > tau_B + 1e4:
            raise RootNotBracketed("T2 entry point not bracketed")
    tau_s = _root(g, tau_B, hi)
    x_s = res.singular_arc_x(tau_s, c)
    return tau_s + feeding_time(x_s, c)


def regions(c: float) -> Regions:
    return Regions(c, res.season_threshold_T1(c), compute_T2(c))


def resident_value(T: float, c: float) -> float:
    """U_r(T) for residents starting from x = 0."""
    _check(T, c)
    if T <= res.season_threshold_T1(c):
        x1, tau1 = switch_point_A(T, c)
        return x1 * x1 * math.exp(-c * (T - tau1))
    x2, tau2 = arc_entry(T, c)
    U2 = x2 * (1.0 - x2) + (1.0 - 2.0 * x2) / c
    return U2 * math.exp(-c * (T - tau2))


def value_region_A(T: float, c: float) -> tuple[float, float]:
    _check(T, c)
    T1 = res.season_threshold_T1(c)
    if T > T1:
        raise ModelError(f"T={T} outside region A (T1={T1})")
    u = resident_value(T, c)
    return u, u


def value_region_B(T: float, c: float) -> tuple[float, float]:
    _check(T, c)
    T1 = res.season_threshold_T1(c)
    if T <= T1:
        raise ModelError(f"T={T} outside region B (T1={T1})")
    x_r2, tau2 = arc_entry(T, c)
    C1 = _arc_path_C1(x_r2, tau2, x_r2, c)

    # mutant meets S_hat = S_m on the arc
    def g(tau):
        return _arc_path_xm(C1, tau, c)[0] + math.expm1(-tau)

    tau1 = _root(g, LN2, tau2)
    x_m1, x_r1 = _arc_path_xm(C1, tau1, c)
    decay = math.exp(-c * (T - tau2))
    U_r = (x_r2 * (1.0 - x_r2) + (1.0 - 2.0 * x_r2) / c) * decay
    U_m = x_m1 * x_m1 * (x_r2 / x_r1) ** 2 * decay
    return U_r, U_m


def _U_hat_sigma(x_r, c, C3):
    return C3 * x_r * x_r + (4.0 + 3.0 * x_r * c * (3.0 + 2.0 * x_r * c)) / (24.0 * x_r * c)


def value_region_C(T: float, c: float) -> tuple[float, float]:
    _check(T, c)
    x_B, x_mB, tau_B = point_B(c)
    x_r2, tau2 = arc_entry(T, c)
    if tau2 <= tau_B:
        raise ModelError(f"T={T} outside region C")
    C1 = _arc_path_C1(x_r2, tau2, x_r2, c)

    # mutant meets S_hat^sigma: x_m = (2 + x_r c)/4
    def g(tau):
        x_m, x_r = _arc_path_xm(C1, tau, c)
        return x_m - (2.0 + x_r * c) / 4.0

    tau_t = _root(g, tau_B, tau2)
    x_rt = res.singular_arc_x(tau_t, c)
    C3 = c * c / 16.0 - (4.0 + 3.0 * x_B * c) / (24.0 * x_B ** 3 * c)
    decay = math.exp(-c * (T - tau2))
    U_r = (x_r2 * (1.0 - x_r2) + (1.0 - 2.0 * x_r2) / c) * decay
    U_m = _U_hat_sigma(x_rt, c, C3) * (x_r2 / x_rt) ** 2 * decay
    return U_r, U_m


def season_values(T: float, c: float, reg: Regions | None = None) -> tuple[float, float, RegionTag]:
    reg = regions(c) if reg is None else reg
    tag = reg.tag(T)
    fn = {RegionTag.A: value_region_A, RegionTag.B: value_region_B, RegionTag.C: value_region_C}[tag]
    U_r, U_m = fn(T, c)
    return U_r, U_m, tag


def sweep(c: float, Ts) -> list[tuple[float, float, float, RegionTag]]:
    reg = regions(c)
    return [(float(T), *season_values(float(T), c, reg)) for T in np.asarray(Ts, dtype=float)]


def write_sweep_csv(rows, path_or_file) -> None:
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(("T", "U_r", "U_m", "region"))
        for T, U_r, U_m, tag in rows:
            w.writerow((repr(T), repr(U_r), repr(U_m), tag.value))
    finally:
        if own:
            fh.close()
