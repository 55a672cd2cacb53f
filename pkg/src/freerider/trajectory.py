"""Event-driven integration of one season under a feedback policy.

Policies are either plain callables ``ReducedState -> ControlPair`` (one
smooth law, no events) or objects with a ``segment(ReducedState)`` method
returning a :class:`~freerider.mutant.Segment`: a control law valid until
one of its residuals reaches zero.  At every such event the state is
re-classified and a new segment starts.

Integration runs by default in reduced coordinates (x_r, x_m, ln n); the
payoff integrals ride along as extra components.  Because n only enters
through ln n, scaling n0 shifts one component and the step sequence is
unchanged.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import DOP853
from scipy.optimize import brentq

from .model import (
    ControlPair,
    FullState,
    ModelError,
    ModelParams,
    ReducedState,
    ZeroResourceError,
    validate,
)
from .mutant import EventSpec, MutantMode, Segment, SurfaceId
from .resident import Region

RTOL = 1e-10
ATOL = 1e-12
# residual may sit this far on the wrong side right after a re-classification
_START_SLACK = 1e-7


class EventLocalizationFailure(ModelError):
    pass


class NoSignChange(EventLocalizationFailure):
    pass


class StepUnderflow(ModelError):
    pass


def locate_event(f: Callable[[float], float], a: float, b: float,
                 fa: float | None = None, fb: float | None = None,
                 xtol: float = 1e-14) -> float:
    """Root of ``f`` in [a, b]; the endpoints must bracket a sign change."""
    fa = f(a) if fa is None else fa
    fb = f(b) if fb is None else fb
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        raise NoSignChange(f"no sign change on [{a}, {b}]: f(a)={fa}, f(b)={fb}")
    try:
        return brentq(f, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
    except (RuntimeError, ValueError) as exc:
        raise EventLocalizationFailure(str(exc)) from exc


def constant_policy(u_r: float, u_m: float):
    pair = ControlPair(u_r, u_m)
    return lambda rs: pair


@dataclass
class SegmentRecord:
    t0: float
    t1: float
    resident: Region | None
    mutant: MutantMode | None


@dataclass
class SeasonOutcome:
    params: ModelParams
    n0: float
    samples: list[tuple[float, FullState, ControlPair]]
    J_r: float
    J_m: float
    J_n: float
    U_r: float
    U_m: float
    V: float
    events: list[tuple[float, SurfaceId]] = field(default_factory=list)
    segments: list[SegmentRecord] = field(default_factory=list)

    @property
    def final(self) -> FullState:
        return self.samples[-1][1]

    def times(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples])

    def column(self, name: str) -> np.ndarray:
        out = []
        for t, st, u in self.samples:
            row = _row(t, st, u)
            out.append(row[name])
        return np.array(out)

    def to_csv(self, path_or_file) -> None:
        write_trajectory_csv(self, path_or_file)


def _row(t, st: FullState, u: ControlPair) -> dict:
    return dict(t=t, p_r=st.p_r, p_m=st.p_m, n=st.n, x_r=st.p_r / st.n,
                x_m=st.p_m / st.n, u_r=u.u_r, u_m=u.u_m)


CSV_COLUMNS = ("t", "p_r", "p_m", "n", "x_r", "x_m", "u_r", "u_m")


def write_trajectory_csv(outcome: SeasonOutcome, path_or_file) -> None:
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for t, st, u in outcome.samples:
            row = _row(t, st, u)
            w.writerow([repr(float(row[k])) for k in CSV_COLUMNS])
    finally:
        if own:
            fh.close()


class _Callable:
    """Adapter giving a plain feedback map the segment interface."""

    def __init__(self, fn):
        self.fn = fn

    def segment(self, rs: ReducedState) -> Segment:
        fn = self.fn

        def law(x_r, x_m, tau):
            u = fn(ReducedState(x_r, x_m, tau))
            return u.u_r, u.u_m
        return Segment(None, None, law, [])


class _Coords:
    def __init__(self, params: ModelParams, T: float, reduced: bool):
        self.c = params.c
        self.eps = params.eps
        self.T = T
        self.reduced = reduced

    def pack(self, st: FullState) -> np.ndarray:
        if self.reduced:
            if not st.n > 0.0:
                raise ZeroResourceError(st.n)
            return np.array([st.p_r / st.n, st.p_m / st.n, math.log(st.n), 0.0, 0.0, 0.0])
        return np.array([st.p_r, st.p_m, st.n, 0.0, 0.0, 0.0])

    def reduced_of(self, t, y) -> tuple[float, float, float]:
        if self.reduced:
            return y[0], y[1], self.T - t
        return y[0] / y[2], y[1] / y[2], self.T - t

    def full_of(self, t, y) -> FullState:
        if self.reduced:
            n = math.exp(y[2])
            return FullState(float(y[0] * n), float(y[1] * n), n, float(t))
        return FullState(float(y[0]), float(y[1]), float(y[2]), float(t))

    def rhs(self, seg: Segment):
        c, eps, T = self.c, self.eps, self.T
        law = seg.law
        sliding = seg.resident is Region.SLIDE
        if self.reduced:
            def f(t, y):
                x_r, x_m = y[0], y[1]
                u_r, u_m = law(x_r, x_m, T - t)
                cw = c * ((1.0 - eps) * u_r + eps * u_m)
                n = math.exp(y[2])
                if sliding:
                    dx_r = x_r * x_r * c / (2.0 + x_r * c)
                else:
                    dx_r = -x_r * (1.0 - cw) + u_r
                return np.array([
                    dx_r,
                    -x_m * (1.0 - cw) + u_m,
                    -cw,
                    (1.0 - u_r) * x_r * n,
                    (1.0 - u_m) * x_m * n,
                    n,
                ])
            return f

        def f(t, y):
            p_r, p_m, n = y[0], y[1], y[2]
            u_r, u_m = law(p_r / n, p_m / n, T - t)
            cw = c * ((1.0 - eps) * u_r + eps * u_m)
            return np.array([
                -p_r + n * u_r,
                -p_m + n * u_m,
                -n * cw,
                (1.0 - u_r) * p_r,
                (1.0 - u_m) * p_m,
                n,
            ])
        return f


def integrate(params: ModelParams, policy, state0: FullState, t1: float | None = None, *,
              T: float | None = None, coordinates: str = "reduced",
              rtol: float = RTOL, atol: float = ATOL, max_events: int = 1000) -> SeasonOutcome:
    """Integrate from ``state0`` (at time ``state0.t``) to ``t1`` inside a
    season of length ``T`` (default ``params.T``)."""
    validate(params)
    T = params.T if T is None else T
    t1 = T if t1 is None else t1
    if coordinates not in ("reduced", "full"):
        raise ValueError(f"unknown coordinates {coordinates!r}")
    if not hasattr(policy, "segment"):
        policy = _Callable(policy)
    co = _Coords(params, T, coordinates == "reduced")
    n0 = state0.n
    # payoff components scale with n0, state components are O(1) ratios
    atol_vec = np.array([atol, atol, atol, atol * n0, atol * n0, atol * n0])
    if not co.reduced:
        atol_vec[:3] *= n0

    t = state0.t
    y = co.pack(state0)
    samples: list[tuple[float, FullState, ControlPair]] = []
    events: list[tuple[float, SurfaceId]] = []
    segments: list[SegmentRecord] = []

    def sample(t_, y_, seg):
        x_r, x_m, tau = co.reduced_of(t_, y_)
        u_r, u_m = seg.law(x_r, x_m, tau)
        samples.append((t_, co.full_of(t_, y_), ControlPair(u_r, u_m)))

    while True:
        seg = policy.segment(ReducedState(*co.reduced_of(t, y)))
        sample(t, y, seg)
        if t >= t1:
            break
        rec = SegmentRecord(t, t1, seg.resident, seg.mutant)
        segments.append(rec)
        t, y, surface = _run_segment(co, seg, t, y, t1, rtol, atol_vec, sample)
        rec.t1 = t
        if surface is None:
            break
        events.append((t, surface))
        if len(events) > max_events:
            raise EventLocalizationFailure(f"more than {max_events} events; switching loop suspected")

    I_r, I_m, I_n = float(y[3]), float(y[4]), float(y[5])
    return SeasonOutcome(
        params=params, n0=n0, samples=samples,
        J_r=params.c_r * I_r, J_m=params.c_m * I_m, J_n=I_n,
        U_r=I_r / n0, U_m=I_m / n0, V=I_n / n0,
        events=events, segments=segments,
    )


def _run_segment(co: _Coords, seg: Segment, t0, y0, t1, rtol, atol_vec, sample):
    """Advance until t1 or the first event.  Returns (t, y, surface) with
    surface None when t1 was reached."""
    f = co.rhs(seg)
    solver = DOP853(f, t0, y0, t1, rtol=rtol, atol=atol_vec)

    def resid(ev: EventSpec, t_, y_):
        return ev.residual(*co.reduced_of(t_, y_))

    armed = []
    for ev in seg.events:
        r = resid(ev, t0, y0)
        armed.append(r > 0.0)
        if r < -_START_SLACK:
            raise EventLocalizationFailure(
                f"segment started on the wrong side of {ev.surface_at(co.T - t0).value} (residual {r:.3e})")

    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise StepUnderflow(msg or "integrator step failed")
        ta, tb = solver.t_old, solver.t
        dense = solver.dense_output()
        best = None
        if seg.events:
            grid = np.linspace(ta, tb, 5)
            ys = [dense(s) for s in grid[1:-1]] + [solver.y]
            for k, ev in enumerate(seg.events):
                prev_t, prev_r = ta, None
                for s, ys_ in zip(grid[1:], ys):
                    r = resid(ev, s, ys_)
                    if armed[k] and r <= 0.0:
                        if best is None or s < best[0]:
                            g = (lambda ev_: lambda q: resid(ev_, q, dense(q)))(ev)
                            lo = prev_t
                            best = (s, lo, g, ev)
                        break
                    if r > 0.0:
                        armed[k] = True
                    prev_t = s
        if best is not None:
            # earliest bracket end among events; localise each candidate there
            s_hi, lo, g, hit = best
            t_star = locate_event(g, lo, s_hi)
            # another event may lie before t_star inside [lo, t_star]
            for ev in seg.events:
                if ev is hit:
                    continue
                gg = (lambda ev_: lambda q: resid(ev_, q, dense(q)))(ev)
                if gg(lo) > 0.0 and gg(t_star) <= 0.0:
                    t_alt = locate_event(gg, lo, t_star)
                    if t_alt < t_star:
                        t_star, hit = t_alt, ev
            return t_star, dense(t_star), hit.surface_at(co.T - t_star)
        sample(tb, solver.y, seg)
    return solver.t, solver.y.copy(), None


def integrate_season(params: ModelParams, policy, n0: float = 1.0, **kw) -> SeasonOutcome:
    """Season from p_r = p_m = 0 with resource n0."""
    if not n0 > 0.0:
        raise ZeroResourceError(n0)
    return integrate(params, policy, FullState(0.0, 0.0, n0, 0.0), params.T, **kw)


def split_payoffs(params: ModelParams, policy, n0: float, t_split: float, **kw):
    """Payoffs of [0, t_split] and [t_split, T] integrated separately."""
    first = integrate(params, policy, FullState(0.0, 0.0, n0, 0.0), t_split, **kw)
    second = integrate(params, policy, first.final, params.T, **kw)
    return first, second


def sample_grid(outcome: SeasonOutcome, ts: Sequence[float]) -> np.ndarray:
    """Linear interpolation of (x_r, x_m) at the given times (for plotting)."""
    t = outcome.times()
    return np.column_stack([np.interp(ts, t, outcome.column("x_r")),
                            np.interp(ts, t, outcome.column("x_m"))])
