"""Core value types and the full <-> reduced state maps.

Within a season the consumer energies ``p_r``, ``p_m`` and the resource ``n``
obey

    p_r' = -p_r + n u_r
    p_m' = -p_m + n u_m
    n'   = -n c [(1 - eps) u_r + eps u_m]

and everything is homogeneous of degree one in ``(p_r, p_m, n)``, so the
policies live on the ratios ``x = p / n`` and backward time ``tau = T - t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

LN2 = math.log(2.0)

# reduction divides by n
RESOURCE_FLOOR = 1e-12


class ModelError(ValueError):
    """Base class for domain errors raised by this package."""


class NonPositiveError(ModelError):
    def __init__(self, field: str, value: float):
        super().__init__(f"{field} must be > 0, got {value!r}")
        self.field = field
        self.value = value


class EpsOutOfRangeError(ModelError):
    def __init__(self, eps: float):
        super().__init__(f"eps must satisfy 0 <= eps < 1, got {eps!r}")
        self.eps = eps


class EpsBoundViolatedError(ModelError):
    """Mutant fraction too large for a fixed a-priori resident strategy (eps >= 1/c)."""

    def __init__(self, eps: float, c: float):
        super().__init__(f"eps={eps!r} violates eps < 1/c = {1.0 / c!r}")
        self.eps = eps
        self.c = c


class ZeroResourceError(ModelError):
    def __init__(self, n: float):
        super().__init__(f"resource density n={n!r} is below the positivity floor {RESOURCE_FLOOR}")
        self.n = n


class TauOutOfSeasonError(ModelError):
    def __init__(self, tau: float, T: float | None = None):
        bound = "[0, inf)" if T is None else f"[0, {T}]"
        super().__init__(f"backward time tau={tau!r} outside {bound}")
        self.tau = tau


class XOutOfRangeError(ModelError):
    def __init__(self, x: float, lo: float, hi: float):
        super().__init__(f"ratio {x!r} outside ({lo}, {hi}]")
        self.x = x


class NotExistentError(ModelError):
    """A surface that does not exist for the given parameters was requested."""


@dataclass(frozen=True)
class ModelParams:
    """Season length ``T``, consumer density ``c``, mutant fraction ``eps``
    and the inter-season conversion factors ``alpha`` (consumers) and
    ``beta`` (resource)."""

    T: float
    c: float
    eps: float = 0.0
    alpha: float = 2.0
    beta: float = 0.5

    @property
    def hierarchical_admissible(self) -> bool:
        return self.eps < 1.0 / self.c

    @property
    def c_r(self) -> float:
        return (1.0 - self.eps) * self.c

    @property
    def c_m(self) -> float:
        return self.eps * self.c

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


def validate(params: ModelParams) -> ModelParams:
    for name in ("T", "c", "alpha", "beta"):
        value = getattr(params, name)
        if not (value > 0.0) or not math.isfinite(value):
            raise NonPositiveError(name, value)
    if not (0.0 <= params.eps < 1.0):
        raise EpsOutOfRangeError(params.eps)
    return params


@dataclass(frozen=True)
class FullState:
    p_r: float
    p_m: float
    n: float
    t: float


@dataclass(frozen=True)
class ReducedState:
    x_r: float
    x_m: float
    tau: float


@dataclass(frozen=True)
class ControlPair:
    """Feeding fractions; 1 = feed, 0 = reproduce."""

    u_r: float
    u_m: float

    def __post_init__(self):
        for name, u in (("u_r", self.u_r), ("u_m", self.u_m)):
            if not (-1e-12 <= u <= 1.0 + 1e-12):
                raise ModelError(f"{name}={u!r} outside [0, 1]")


def reduce(state: FullState, T: float) -> ReducedState:
    if not (state.n > RESOURCE_FLOOR):
        raise ZeroResourceError(state.n)
    return ReducedState(state.p_r / state.n, state.p_m / state.n, T - state.t)


def lift(rs: ReducedState, n: float, T: float) -> FullState:
    """Inverse of :func:`reduce` for a given resource level."""
    if not (n > RESOURCE_FLOOR):
        raise ZeroResourceError(n)
    return FullState(rs.x_r * n, rs.x_m * n, n, T - rs.tau)


def feeding_ratio(t, c):
    """x(t) from x(0)=0 under u=1: (e^{(c-1)t} - 1)/(c - 1), continuous at c=1."""
    k = c - 1.0
    if abs(k) < 1e-12:
        return t
    return math.expm1(k * t) / k


def feeding_time(x, c):
    """Inverse of :func:`feeding_ratio`."""
    k = c - 1.0
    if abs(k) < 1e-12:
        return x
    return math.log1p(k * x) / k
