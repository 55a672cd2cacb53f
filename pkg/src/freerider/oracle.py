"""Brute-force dynamic programming on the reduced state.

Independent of the analytic surfaces: value iteration backward in tau over
a grid in x (resident) or (x_r, x_m) (mutant against the frozen resident
feedback), maximising over a finite control set that always contains 0
and 1.  Each step applies a constant control for dt and uses the exact flow

    X = x e^{k dt} + u (e^{k dt} - 1)/k,     k = c w - 1,

with resource discount e^{-c w dt} and the exact integral of the running
reward (1 - u) x n / n0 over the step.  Values are per unit of resource.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline
from scipy.ndimage import map_coordinates

from . import resident as res
from .model import LN2, ModelError


class ShapeMismatch(ModelError):
    pass


@dataclass(frozen=True)
class GridSpec:
    nx: int = 512
    nt: int = 1024
    x_max: float = 2.0
    control_levels: int = 11
    interp: str = "cubic"

    def __post_init__(self):
        if self.nx < 16 or self.nt < 16:
            raise ModelError("nx and nt must be >= 16")
        if self.x_max < 1.0:
            raise ModelError("x_max must be >= 1")
        if self.control_levels < 2:
            raise ModelError("need at least the two bang levels")
        if self.interp not in ("linear", "cubic"):
            raise ModelError(f"unknown interpolation {self.interp!r}")

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.nx * factor, self.nt * factor, self.x_max, self.control_levels, self.interp)

    @property
    def controls(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.control_levels)

    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.x_max, self.nx)


RESIDENT_GRID = GridSpec(512, 1024)
MUTANT_GRID = GridSpec(128, 512, control_levels=11)


def flow(x, u, cw, dt):
    """x after dt under constant own control u and total feeding rate cw."""
    k = cw - 1.0
    e = np.exp(k * dt)
    return x * e + u * _expm1_over(k, dt)


def _expm1_over(k, dt):
    # (e^{k dt} - 1)/k, finite at k = 0
    k = np.asarray(k, dtype=float)
    small = np.abs(k) < 1e-12
    ks = np.where(small, 1.0, k)
    return np.where(small, dt, np.expm1(ks * dt) / ks)


def step_reward(x, u, cw, dt):
    """Integral over the step of (1 - u) x(s) n(s)/n(0)."""
    a = -math.expm1(-dt)
    cw = np.asarray(cw, dtype=float)
    k = cw - 1.0
    # b = (1 - e^{-cw dt}) / cw
    b = np.where(cw > 1e-12, -np.expm1(-cw * dt) / np.where(cw > 1e-12, cw, 1.0), dt)
    near = np.abs(k) < 1e-8
    kk = np.where(near, 1.0, k)
    term = np.where(near, a - dt * math.exp(-dt), (a - b) / kk)
    return (1.0 - u) * (x * a + u * term)


@dataclass
class DPResult:
    x: np.ndarray
    tau: np.ndarray
    U: np.ndarray          # (nt+1, nx) or (nt+1, nx_r, nx_m)
    control: np.ndarray    # argmax control of the step ending at tau[k+1]
    clamped: bool = False
    grid: GridSpec | None = None

    def value(self, *xs) -> float:
        """Value at the final tau by interpolation (x or x_r, x_m)."""
        last = self.U[-1]
        if last.ndim == 1:
            return float(np.interp(xs[0], self.x, last))
        h = self.x[1] - self.x[0]
        coords = np.array([[xs[0] / h], [xs[1] / h]])
        return float(map_coordinates(last, coords, order=1, mode="nearest")[0])

    def dump(self, path) -> None:
        dump_table(self.U, path)


def _interp1(U, x, X, kind):
    if kind == "linear":
        return np.interp(X, x, U)
    return CubicSpline(x, U, bc_type="natural")(np.clip(X, x[0], x[-1]))


def dp_resident_value(c: float, T: float, grid: GridSpec = RESIDENT_GRID) -> DPResult:
    x = grid.x()
    dt = T / grid.nt
    us = grid.controls
    U = np.zeros((grid.nt + 1, grid.nx))
    ctrl = np.zeros((grid.nt, grid.nx))
    X = np.stack([flow(x, u, c * u, dt) for u in us])           # (L, nx)
    R = np.stack([step_reward(x, u, c * u, dt) for u in us])
    disc = np.exp(-c * us * dt)[:, None]
    clamped = False
    cols = np.arange(grid.nx)
    for j in range(grid.nt):
        cand = R + disc * _interp1(U[j], x, X, grid.interp)
        best = np.argmax(cand, axis=0)
        U[j + 1] = cand[best, cols]
        ctrl[j] = us[best]
        # only the optimal flow counts as hitting the cap
        clamped |= bool(np.any(X[best, cols] > grid.x_max))
    return DPResult(x, np.linspace(0.0, T, grid.nt + 1), U, ctrl, clamped, grid)


# -- frozen resident feedback over one step -----------------------------------

def _bisect(f, lo, hi, iters=60):
    """Vectorised bisection for increasing f on [lo, hi] (elementwise)."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pos = f(mid) > 0.0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    return 0.5 * (lo + hi)


def resident_step(x_r, tau0, dt, c, eps=0.0, u_m=0.0):
    """Constant resident control over [tau0 - dt, tau0] reproducing its feedback.

    Bang control unless the bang step crosses the resident boundary; then
    the constant control whose endpoint equals the true piecewise endpoint
    (landing on S^sigma, or switching on S and reproducing afterwards).
    """
    x_r = np.asarray(x_r, dtype=float)
    u_m = np.broadcast_to(np.asarray(u_m, dtype=float), x_r.shape)
    tau1 = tau0 - dt
    b0 = res.boundary_x(tau0, c) if tau0 > 0 else 0.0
    b1 = res.boundary_x(max(tau1, 0.0), c)

    def X(u, s=dt, xx=x_r, um=u_m):
        return flow(xx, u, c * ((1.0 - eps) * u + eps * um), s)

    below = x_r < b0
    u = np.where(below, 1.0, 0.0)
    end = X(u)
    if tau1 > LN2:
        cross = np.where(below, end > b1, end < b1)
        target = np.full_like(x_r, b1)
    else:
        # feeding crosses S: switch to reproduction at the hitting time
        cross = below & (end > -math.expm1(-tau1))
        target = np.zeros_like(x_r)
        if np.any(cross):
            xs, ums = x_r[cross], u_m[cross]
            if tau0 > LN2:
                # the step straddles ln 2; stay simple and land on the boundary
                target[cross] = b1
            else:
                s = _bisect(lambda q: X(1.0, q, xs, ums) + np.expm1(-(tau0 - q)),
                            np.zeros_like(xs), np.full_like(xs, dt))
                x_hit = X(1.0, s, xs, ums)
                target[cross] = flow(x_hit, 0.0, c * eps * ums, dt - s)
    if np.any(cross):
        xs, ums, tg = x_r[cross], u_m[cross], target[cross]
        # endpoint increases with u
        u[cross] = _bisect(lambda q: X(q, dt, xs, ums) - tg, np.zeros_like(xs), np.ones_like(xs))
    return u


def _rows_with_break(x, b):
    """Uniform rows plus the resident boundary b; returns (rows, break index)."""
    h = x[1] - x[0]
    if not (x[0] < b < x[-1]):
        return x, None
    i = int(np.searchsorted(x, b))
    if b - x[i - 1] < 1e-9 * h:
        return x, i - 1
    if x[i] - b < 1e-9 * h:
        return x, i
    return np.insert(x, i, b), i


class _SplitSpline:
    """Tensor cubic (or linear) interpolant with a kink allowed along x_r = b.

    The value inherits a kink in x_r where the resident switches; splitting
    the rows there keeps it out of the spline."""

    def __init__(self, rows, x, U, brk, kind):
        self.kind = kind
        self.b = rows[brk] if brk is not None else None
        parts = [(rows, U)] if brk is None else [(rows[: brk + 1], U[: brk + 1]), (rows[brk:], U[brk:])]
        self.parts = [self._fit(r, x, u) for r, u in parts]
        self.lo, self.hi = rows[0], rows[-1]
        self.x_hi = x[-1]

    def _fit(self, r, x, u):
        k = 3 if self.kind == "cubic" else 1
        return RectBivariateSpline(r, x, u, kx=min(k, len(r) - 1), ky=k, s=0)

    def __call__(self, xr, xm):
        xr = np.clip(xr, self.lo, self.hi)
        xm = np.clip(xm, 0.0, self.x_hi)
        if self.b is None:
            return self.parts[0].ev(xr, xm)
        low = xr <= self.b
        out = np.empty(xr.shape)
        out[low] = self.parts[0].ev(xr[low], xm[low])
        out[~low] = self.parts[1].ev(xr[~low], xm[~low])
        return out


def dp_mutant_value(c: float, eps: float, T: float, grid: GridSpec = MUTANT_GRID,
                    mimic: bool = False, slices: int = 64) -> DPResult:
    """Mutant best response on an (x_r, x_m) grid against the resident feedback.

    ``mimic=True`` restricts the mutant to the resident's own control.  The
    x_r rows of every level include the resident boundary at that tau.  At
    most ``slices + 1`` tau levels are kept (always the first and last).
    """
    x = grid.x()
    dt = T / grid.nt
    us = np.array([0.0]) if mimic else grid.controls
    stride = max(1, grid.nt // slices)
    kept = [0]
    U_keep = [np.zeros((grid.nx, grid.nx))]
    C_keep = []
    rows, brk = x, None
    Uj = np.zeros((grid.nx, grid.nx))
    clamped = False
    for j in range(grid.nt):
        tau0 = (j + 1) * dt
        interp = _SplitSpline(rows, x, Uj, brk, grid.interp)
        rows1, brk1 = _rows_with_break(x, res.boundary_x(tau0, c))
        XR, XM = np.meshgrid(rows1, x, indexing="ij")
        best_val = np.full(XR.shape, -np.inf)
        best_u = np.zeros(XR.shape)
        for um in us:
            if eps == 0.0 or mimic:
                ur = np.broadcast_to(resident_step(rows1, tau0, dt, c, eps, um)[:, None], XR.shape)
            else:
                ur = resident_step(XR.ravel(), tau0, dt, c, eps, um).reshape(XR.shape)
            u_own = ur if mimic else um
            cw = c * ((1.0 - eps) * ur + eps * u_own)
            Xr = flow(XR, ur, cw, dt)
            Xm = flow(XM, u_own, cw, dt)
            out = (Xm > grid.x_max) | (Xr > grid.x_max)
            val = step_reward(XM, u_own, cw, dt) + np.exp(-cw * dt) * interp(Xr, Xm)
            better = val > best_val
            best_val = np.where(better, val, best_val)
            best_u = np.where(better, u_own, best_u)
            best_out = out if um == us[0] else np.where(better, out, best_out)
        clamped |= bool(np.any(best_out))
        rows, brk, Uj = rows1, brk1, best_val
        if (j + 1) % stride == 0 or j + 1 == grid.nt:
            keep = np.ones(len(rows), bool)
            if len(rows) > grid.nx:
                keep[brk] = False
            kept.append(j + 1)
            U_keep.append(Uj[keep])
            C_keep.append(best_u[keep])
    taus = np.array(kept) * dt
    return DPResult(x, taus, np.array(U_keep), np.array(C_keep), clamped, grid)


# -- comparison and extrapolation ------------------------------------------------

def richardson(values, ratio: float = 2.0, order: float | None = None) -> tuple[float, float]:
    """Extrapolated limit and observed order from a refinement sequence.

    With three or more values and no ``order`` the order is estimated from
    the last three; otherwise first order is assumed.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ShapeMismatch("need at least two refinements")
    p = order
    if p is None:
        p = 1.0
        if v.size >= 3:
            d1, d2 = v[-2] - v[-3], v[-1] - v[-2]
            if d1 != 0.0 and d2 != 0.0 and d1 * d2 > 0.0:
                p = math.log(abs(d1 / d2)) / math.log(ratio)
    f = ratio ** p
    return float(v[-1] + (v[-1] - v[-2]) / (f - 1.0)), float(p)


@dataclass
class CompareReport:
    analytic: np.ndarray
    dp: np.ndarray
    extrapolated: np.ndarray
    abs_err: np.ndarray
    rel_err: np.ndarray
    tol: float
    orders: np.ndarray = field(default_factory=lambda: np.array([]))

    @property
    def passed(self) -> bool:
        return bool(np.all(self.rel_err < self.tol))


def compare(analytic, dp, tol: float = 1e-3, ratio: float = 2.0) -> CompareReport:
    """``analytic``: shape (m,); ``dp``: shape (refinements, m)."""
    a = np.atleast_1d(np.asarray(analytic, dtype=float))
    d = np.asarray(dp, dtype=float)
    if d.ndim == 1:
        d = d[:, None]
    if d.shape[1] != a.shape[0]:
        raise ShapeMismatch(f"analytic {a.shape} vs dp {d.shape}")
    ext, orders = [], []
    for k in range(a.size):
        if d.shape[0] >= 2:
            e, p = richardson(d[:, k], ratio)
        else:
            e, p = d[0, k], float("nan")
        ext.append(e)
        orders.append(p)
    ext = np.array(ext)
    abs_err = np.abs(ext - a)
    rel_err = abs_err / np.maximum(np.abs(a), 1e-300)
    return CompareReport(a, d, ext, abs_err, rel_err, tol, np.array(orders))


# -- binary tables -------------------------------------------------------------
# layout: b"FRDP", uint32 ndim, ndim x uint64 dims, then float64 row-major,
# everything little-endian

_MAGIC = b"FRDP"


def dump_table(arr, path) -> None:
    a = np.ascontiguousarray(arr, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", a.ndim))
        fh.write(struct.pack(f"<{a.ndim}Q", *a.shape))
        fh.write(a.tobytes(order="C"))


def load_table(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ShapeMismatch("not a value-table dump")
        (ndim,) = struct.unpack("<I", fh.read(4))
        dims = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != int(np.prod(dims)):
        raise ShapeMismatch("truncated value-table dump")
    return data.reshape(dims).astype(float)
