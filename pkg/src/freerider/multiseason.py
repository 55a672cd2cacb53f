"""Season-to-season map with a resident/mutant split of the consumers.

    c_r' = alpha J_r,   c_m' = alpha J_m,   n' = beta J_n

where J are the season payoffs of :mod:`freerider.trajectory` with
c = c_r + c_m and eps = c_m / c.  Without mutants the map is homogeneous of
degree one in n at fixed c, so its fixed point reduces to the scalar
equation beta V(c) = 1 followed by n = 1 / (alpha U_r(c)).
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .model import EpsBoundViolatedError, ModelError, ModelParams
from .mutant import MimicPolicy, MutantPolicy
from .trajectory import SeasonOutcome, integrate_season


class ExtinctPopulationError(ModelError):
    pass


class NoConvergence(ModelError):
    def __init__(self, regime: "Regime", detail: str = ""):
        super().__init__(f"no equilibrium: {regime.value} {detail}".strip())
        self.regime = regime


class Regime(enum.Enum):
    EQUILIBRIUM = "equilibrium"
    EXTINCTION = "extinction"
    BLOW_UP = "blow-up"
    CYCLE_SUSPECTED = "cycle-suspected"


@dataclass(frozen=True)
class Generation:
    c_r: float
    c_m: float
    n0: float
    i: int = 0

    @property
    def c(self) -> float:
        return self.c_r + self.c_m

    @property
    def eps(self) -> float:
        return self.c_m / self.c if self.c > 0.0 else 0.0


@dataclass
class SeasonRecord:
    U_r: float
    U_m: float
    V: float
    J_r: float
    J_m: float
    J_n: float


@dataclass
class GenerationSeries:
    generations: list[Generation] = field(default_factory=list)
    seasons: list[SeasonRecord] = field(default_factory=list)
    truncated: bool = False
    reason: str | None = None

    def eps_trace(self) -> np.ndarray:
        return np.array([g.eps for g in self.generations])

    def trace(self, name: str) -> np.ndarray:
        return np.array([getattr(g, name) for g in self.generations])

    def to_csv(self, path_or_file) -> None:
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh)
            w.writerow(("season", "c_r", "c_m", "eps", "n0", "U_r", "U_m", "V"))
            for g, s in zip(self.generations, self.seasons + [None] * len(self.generations)):
                vals = ("", "", "") if s is None else (repr(s.U_r), repr(s.U_m), repr(s.V))
                w.writerow((g.i, repr(g.c_r), repr(g.c_m), repr(g.eps), repr(g.n0), *vals))
            if self.truncated:
                fh.write(f"# truncated: {self.reason}\n")
        finally:
            if own:
                fh.close()


def season_outcome(g: Generation, params: ModelParams) -> SeasonOutcome:
    if not g.c > 0.0:
        raise ExtinctPopulationError(f"no consumers left at season {g.i}")
    p = params.with_(c=g.c, eps=g.eps)
    if not p.hierarchical_admissible:
        raise EpsBoundViolatedError(p.eps, p.c)
    return integrate_season(p, MutantPolicy(p), g.n0)


def step_season(g: Generation, params: ModelParams) -> tuple[Generation, SeasonRecord]:
    """One season; ``params.c`` and ``params.eps`` are taken from ``g``."""
    o = season_outcome(g, params)
    rec = SeasonRecord(o.U_r, o.U_m, o.V, o.J_r, o.J_m, o.J_n)
    nxt = Generation(params.alpha * o.J_r, params.alpha * o.J_m, params.beta * o.J_n, g.i + 1)
    return nxt, rec


def resident_map(c: float, n: float, params: ModelParams) -> tuple[float, float]:
    """Original resident-only map (c, n) -> (alpha J, beta J_n)."""
    p = params.with_(c=c, eps=0.0)
    o = integrate_season(p, MimicPolicy(p), n)
    return params.alpha * o.J_r, params.beta * o.J_n


def resident_returns(c: float, T: float) -> tuple[float, float]:
    """(U_r, V) per unit of initial resource for residents of density c."""
    p = ModelParams(T=T, c=c)
    o = integrate_season(p, MimicPolicy(p), 1.0)
    return o.U_r, o.V


@dataclass(frozen=True)
class Equilibrium:
    c: float
    n: float
    regime: Regime
    eigenvalues: tuple[complex, complex] | None = None

    @property
    def stable(self) -> bool:
        return self.eigenvalues is not None and max(abs(z) for z in self.eigenvalues) < 1.0


def _map_jacobian(c, n, params, h=1e-6):
    f0 = np.array(resident_map(c, n, params))
    jac = np.empty((2, 2))
    for j, (dc, dn) in enumerate(((h * c, 0.0), (0.0, h * n))):
        fp = np.array(resident_map(c + dc, n + dn, params))
        fm = np.array(resident_map(c - dc, n - dn, params))
        jac[:, j] = (fp - fm) / (2.0 * (dc + dn))
    return jac, f0


def find_resident_equilibrium(alpha: float = 2.0, beta: float = 0.5, T: float = 4.0,
                              c_lo: float = 1e-3, c_hi: float = 1e3) -> Equilibrium:
    """Fixed point of the resident-only map, or :class:`NoConvergence`.

    V(c) falls from T (no consumers) towards 0, so beta V(c) = 1 has a root
    iff beta T > 1; otherwise the resource dies out.
    """
    params = ModelParams(T=T, c=1.0, alpha=alpha, beta=beta)

    def g(logc):
        return beta * resident_returns(math.exp(logc), T)[1] - 1.0

    lo, hi = math.log(c_lo), math.log(c_hi)
    g_lo, g_hi = g(lo), g(hi)
    if g_lo <= 0.0:
        raise NoConvergence(Regime.EXTINCTION, f"(beta V <= 1 already at c={c_lo})")
    if g_hi >= 0.0:
        raise NoConvergence(Regime.BLOW_UP, f"(beta V >= 1 up to c={c_hi})")
    logc = brentq(g, lo, hi, xtol=1e-13, rtol=1e-14)
    c = math.exp(logc)
    U_r, _ = resident_returns(c, T)
    n = float(1.0 / (alpha * U_r))
    jac, _ = _map_jacobian(c, n, params)
    ev = np.linalg.eigvals(jac)
    regime = Regime.EQUILIBRIUM if max(abs(ev)) < 1.0 else Regime.CYCLE_SUSPECTED
    return Equilibrium(c, n, regime, (complex(ev[0]), complex(ev[1])))


def iterate_resident_map(c0: float, n0: float, seasons: int, params: ModelParams) -> np.ndarray:
    """Plain iteration; rows (c_i, n_i), stops early on extinction."""
    out = [(c0, n0)]
    c, n = c0, n0
    for _ in range(seasons):
        if not (c > 0.0 and n > 0.0 and math.isfinite(c) and math.isfinite(n)):
            break
        c, n = resident_map(c, n, params)
        out.append((c, n))
    return np.array(out)


def simulate_invasion(equilibrium: Equilibrium | tuple[float, float], c_m0: float, seasons: int,
                      params: ModelParams) -> GenerationSeries:
    """Mutants of density c_m0 appear on top of the resident equilibrium."""
    c_star, n_star = (equilibrium.c, equilibrium.n) if isinstance(equilibrium, Equilibrium) else equilibrium
    if c_m0 < 0.0:
        raise ModelError(f"c_m0 must be >= 0, got {c_m0!r}")
    g = Generation(c_star, c_m0, n_star, 0)
    series = GenerationSeries([g])
    for _ in range(seasons):
        if not g.c > 0.0:
            series.truncated, series.reason = True, f"consumers extinct at season {g.i}"
            break
        if g.eps >= 1.0 / g.c:
            series.truncated = True
            series.reason = f"eps={g.eps:.6g} >= 1/c={1.0 / g.c:.6g} at season {g.i}"
            break
        g, rec = step_season(g, params)
        series.generations.append(g)
        series.seasons.append(rec)
    return series
