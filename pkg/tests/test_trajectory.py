import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freerider import values as val
from freerider.model import FullState, ModelParams, feeding_ratio
from freerider.mutant import MimicPolicy, MutantPolicy, SurfaceId
from freerider.resident import Region, arc_residual, season_threshold_T1
from freerider.trajectory import (
    CSV_COLUMNS, NoSignChange, constant_policy, integrate, integrate_season, locate_event,
    split_payoffs,
)


def test_zero_control():
    p = ModelParams(T=2.5, c=3.0, eps=0.2)
    o = integrate_season(p, constant_policy(0.0, 0.0), n0=1.7)
    assert o.J_n == pytest.approx(1.7 * 2.5, rel=1e-12)
    assert o.J_r == 0.0 and o.J_m == 0.0
    assert o.final.p_r == 0.0 and o.final.n == pytest.approx(1.7)


def test_full_feeding_matches_closed_form():
    c, T, n0 = 3.0, 1.7, 2.0
    p = ModelParams(T=T, c=c, eps=0.1)
    o = integrate_season(p, constant_policy(1.0, 1.0), n0=n0)
    assert o.J_r == pytest.approx(0.0, abs=1e-15)
    assert o.J_m == pytest.approx(0.0, abs=1e-15)
    for t, s, _ in o.samples:
        assert s.n == pytest.approx(n0 * math.exp(-c * t), rel=1e-9)
        assert s.p_r == pytest.approx(n0 * math.exp(-c * t) * feeding_ratio(t, c), rel=1e-9, abs=1e-14)
    assert o.final.n == pytest.approx(n0 * math.exp(-c * T), rel=1e-9)


@pytest.mark.parametrize("T", [0.8, 2.0, 4.0])
def test_resident_optimal_matches_values(T):
    c = 3.0
    p = ModelParams(T=T, c=c)
    o = integrate_season(p, MimicPolicy(p), n0=1.3)
    assert o.J_r / p.c_r == pytest.approx(1.3 * val.resident_value(T, c), abs=1e-8)


def test_locate_event_examples():
    assert locate_event(lambda t: t - 1.0, 0.0, 2.0) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(NoSignChange):
        locate_event(lambda t: t + 1.0, 0.0, 2.0)


def test_switch_time_matches_tau1_equation():
    c = 3.0
    T = 0.9 * season_threshold_T1(c)
    p = ModelParams(T=T, c=c)
    o = integrate_season(p, MimicPolicy(p))
    _, tau1 = val.switch_point_A(T, c)
    (t_ev, sid), = o.events
    assert sid is SurfaceId.S_r
    assert t_ev == pytest.approx(T - tau1, abs=1e-8)


@pytest.mark.parametrize("c,eps,T", [(3.0, 0.0, 4.0), (3.0, 0.1, 3.0), (1.25, 0.35, 4.0)])
def test_split_additivity(c, eps, T):
    p = ModelParams(T=T, c=c, eps=eps)
    pol = MutantPolicy(p)
    whole = integrate_season(p, pol, 1.0)
    for ts in (0.37 * T, 0.81 * T):
        a, b = split_payoffs(p, pol, 1.0, ts)
        for name in ("J_r", "J_m", "J_n"):
            assert getattr(a, name) + getattr(b, name) == pytest.approx(getattr(whole, name), abs=1e-10)


@pytest.mark.parametrize("eps", [0.0, 0.1])
def test_reduced_and_full_coordinates_agree(eps):
    p = ModelParams(T=4.0, c=3.0, eps=eps)
    pol = MutantPolicy(p)
    a = integrate_season(p, pol, 1.0)
    b = integrate_season(p, pol, 1.0, coordinates="full")
    for name in ("J_r", "J_m", "J_n"):
        assert getattr(a, name) == pytest.approx(getattr(b, name), rel=1e-8)
    assert [s for _, s in a.events] == [s for _, s in b.events]


def test_sliding_stays_on_arc():
    c, T = 3.0, 4.0
    p = ModelParams(T=T, c=c)
    o = integrate_season(p, MutantPolicy(p))
    slide = [s for s in o.segments if s.resident is Region.SLIDE]
    assert slide
    checked = 0
    for t, st_, _ in o.samples:
        for s in slide:
            if s.t0 < t < s.t1:
                x = st_.p_r / st_.n
                # residual is x (arc_tau(x) - tau)
                assert abs(arc_residual(x, T - t, c)) / x < 1e-6
                checked += 1
    assert checked > 5


@given(st.floats(0.3, 5.0), st.floats(0.5, 5.0), st.floats(0.0, 0.95))
@settings(max_examples=15, deadline=None)
def test_resource_non_increasing(T, c, frac):
    p = ModelParams(T=T, c=c, eps=min(frac / c, 0.9))
    o = integrate_season(p, MutantPolicy(p))
    n = o.column("n")
    assert np.all(np.diff(n) <= 1e-14)
    assert min(o.J_r, o.J_m, o.J_n) >= 0.0
    assert o.times()[0] == 0.0 and o.times()[-1] == pytest.approx(T)


@given(st.floats(0.5, 5.0), st.floats(0.5, 5.0), st.floats(0.0, 0.9), st.sampled_from([0.5, 2.0, 10.0]))
@settings(max_examples=10, deadline=None)
def test_homogeneity(T, c, frac, k):
    p = ModelParams(T=T, c=c, eps=min(frac / c, 0.9))
    pol = MutantPolicy(p)
    a = integrate_season(p, pol, 1.0)
    b = integrate_season(p, pol, k)
    for name in ("J_r", "J_m", "J_n"):
        assert getattr(b, name) == pytest.approx(k * getattr(a, name), rel=1e-9, abs=1e-14)


def test_integrate_from_interior_state():
    p = ModelParams(T=3.0, c=3.0)
    pol = MutantPolicy(p)
    o = integrate(p, pol, FullState(0.2, 0.1, 0.5, 1.0))
    assert o.samples[0][0] == 1.0 and o.samples[-1][0] == pytest.approx(3.0)


def test_csv_export():
    p = ModelParams(T=2.0, c=3.0)
    o = integrate_season(p, MutantPolicy(p))
    buf = io.StringIO()
    o.to_csv(buf)
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == len(o.samples) + 1
    assert float(rows[-1][0]) == pytest.approx(2.0)
