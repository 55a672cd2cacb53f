"""Cross-checks bundled for ``freerider validate``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import values as val
from .model import ModelParams
from .mutant import MutantPolicy, sliding_resident_control
from .oracle import GridSpec, dp_mutant_value, dp_resident_value, richardson
from .resident import season_threshold_T1
from .trajectory import integrate_season


@dataclass
class CheckResult:
    name: str
    value: float
    reference: float
    error: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tol)


def _abs(name, value, ref, tol):
    return CheckResult(name, value, ref, abs(value - ref), tol)


def _rel(name, value, ref, tol):
    return CheckResult(name, value, ref, abs(value - ref) / abs(ref), tol)


def analytic_vs_integrator(cs=(3.0,), per_region=2) -> list[CheckResult]:
    out = []
    for c in cs:
        reg = val.regions(c)
        Ts = [reg.T1 * f for f in np.linspace(0.4, 1.0, per_region)]
        Ts += list(np.linspace(reg.T1, reg.T2, per_region + 2)[1:-1])
        Ts += [reg.T2 + k for k in np.linspace(0.5, 2.0, per_region)]
        for T in Ts:
            U_r, U_m, tag = val.season_values(T, c, reg)
            p = ModelParams(T=T, c=c)
            o = integrate_season(p, MutantPolicy(p), 1.0)
            out.append(_abs(f"U_r c={c:g} T={T:.4f} ({tag.value})", o.U_r, U_r, 1e-8))
            out.append(_abs(f"U_m c={c:g} T={T:.4f} ({tag.value})", o.U_m, U_m, 1e-8))
    return out


def sliding_bound(c=3.0, samples=2000, seed=0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    xr = rng.uniform(1e-9, 0.5, samples)
    um = rng.uniform(0.0, 1.0, samples)
    eps = 0.9 / c
    u = np.array([sliding_resident_control(a, b, eps, c) for a, b in zip(xr, um)])
    outside = float(np.sum((u <= 0.0) | (u >= 1.0)))
    return [_abs(f"sliding control in (0,1), eps=0.9/c, c={c:g}", outside, 0.0, 0.0)]


def homogeneity(c=3.0, T=4.0, eps=0.1) -> list[CheckResult]:
    p = ModelParams(T=T, c=c, eps=eps)
    pol = MutantPolicy(p)
    base = integrate_season(p, pol, 1.0)
    out = []
    for k in (0.5, 2.0, 10.0):
        o = integrate_season(p, pol, k)
        for name in ("J_r", "J_m", "J_n"):
            out.append(_rel(f"{name}(k n0)/k, k={k:g}", getattr(o, name) / k, getattr(base, name), 1e-9))
    return out


def oracle_resident(c=3.0, Ts=(1.0, 2.0), grids=((128, 256), (256, 512), (512, 1024))) -> list[CheckResult]:
    out = []
    for T in Ts:
        dp = [dp_resident_value(c, T, GridSpec(nx, nt)).value(0.0) for nx, nt in grids]
        ext, _ = richardson(dp)
        out.append(_rel(f"DP resident c={c:g} T={T:g}", ext, val.resident_value(T, c), 1e-3))
    return out


def oracle_mutant(c=3.0, Ts=(1.0, 2.0), grids=((32, 128), (64, 256)), levels=5) -> list[CheckResult]:
    out = []
    for T in Ts:
        dp = [dp_mutant_value(c, 0.0, T, GridSpec(nx, nt, control_levels=levels, interp="cubic"),
                              slices=1).value(0.0, 0.0) for nx, nt in grids]
        ext, _ = richardson(dp, order=2.0)
        out.append(_rel(f"DP mutant c={c:g} T={T:g}", ext, val.season_values(T, c)[1], 1e-2))
    return out


def region_a_neutrality(c=3.0) -> list[CheckResult]:
    T = 0.9 * season_threshold_T1(c)
    U_r, U_m = val.value_region_A(T, c)
    p = ModelParams(T=T, c=c)
    o = integrate_season(p, MutantPolicy(p), 1.0)
    return [_abs("region A analytic gap", U_m - U_r, 0.0, 1e-8),
            _abs("region A integrated gap", o.U_m - o.U_r, 0.0, 1e-8)]


def run_suite(name: str) -> list[CheckResult]:
    if name == "quick":
        return region_a_neutrality() + analytic_vs_integrator(per_region=1) + sliding_bound(samples=500) \
            + homogeneity()
    if name == "values":
        return analytic_vs_integrator(cs=(1.5, 2.0, 3.0, 5.0), per_region=3)
    if name == "oracle":
        return oracle_resident() + oracle_mutant()
    if name == "all":
        return run_suite("quick") + run_suite("values") + run_suite("oracle")
    raise ValueError(f"unknown suite {name!r}")
