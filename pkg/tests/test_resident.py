import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import solve_ivp

from freerider import resident as res
from freerider.model import LN2, ReducedState, TauOutOfSeasonError, XOutOfRangeError
from freerider.oracle import GridSpec, dp_resident_value


def test_switching_curve():
    assert res.switching_curve_S(0.0) == 0.0
    assert res.switching_curve_S(LN2) == pytest.approx(0.5, abs=1e-15)
    assert res.switching_curve_S(2.0) == pytest.approx(0.8646647167633873)
    with pytest.raises(TauOutOfSeasonError):
        res.switching_curve_S(3.0, T=2.0)


def test_singular_arc_tau():
    assert res.singular_arc_tau(0.5, 3.0) == pytest.approx(LN2, abs=1e-15)
    assert res.singular_arc_tau(0.25, 3.0) == pytest.approx(2.7196, abs=1e-4)
    assert res.singular_arc_tau(1e-6, 3.0) > 1e5
    with pytest.raises(XOutOfRangeError):
        res.singular_arc_tau(0.6, 3.0)


def test_singular_control():
    assert res.singular_control(0.5, 2.0) == pytest.approx(1 / 3)
    assert res.singular_control(0.5, 3.0) == pytest.approx(2 / 7)
    assert 0.0 < res.singular_control(1e-9, 3.0) < 1e-8


def test_T1():
    assert res.season_threshold_T1(3.0) == pytest.approx(1.5 * LN2, abs=1e-14)
    assert res.season_threshold_T1(2.0) == pytest.approx(math.log(3.0), abs=1e-14)
    lim = res.season_threshold_T1(1.0)
    for h in (1e-6, -1e-6):
        c = 1.0 + h
        raw = (math.log(c + 1.0) + (c - 2.0) * LN2) / (c - 1.0)
        assert lim == pytest.approx(raw, abs=1e-6)


@given(st.floats(0.05, 10.0))
def test_T1_above_ln2(c):
    assert res.season_threshold_T1(c) > LN2


def test_resident_control_examples():
    assert res.resident_control(ReducedState(0.7, 0.0, 0.0), 3.0) == 0.0
    assert res.resident_control(ReducedState(0.5, 0.0, LN2), 3.0) == pytest.approx(2 / 7)
    assert res.resident_control(ReducedState(0.1, 0.0, 3.0), 3.0) == 1.0


def test_tie_break_on_S():
    tau = 0.4
    x = res.switching_curve_S(tau)
    assert res.resident_control(ReducedState(x, 0.0, tau), 3.0) == 0.0


def test_arc_end_exit_tiebreak():
    assert res.classify(0.5, LN2, 3.0) is res.Region.SLIDE
    assert res.classify(0.5, LN2, 3.0, exit_tiebreak=True) is res.Region.REPRO


@given(st.floats(LN2, 8.0), st.floats(0.5, 6.0))
def test_arc_x_inverts_arc_tau(tau, c):
    x = res.singular_arc_x(tau, c)
    assert res.singular_arc_tau(x, c) == pytest.approx(tau, abs=1e-9)


@given(st.lists(st.floats(LN2, 6.0), min_size=1, max_size=20), st.floats(0.5, 6.0))
def test_arc_x_array_matches_scalar(taus, c):
    xs = res.singular_arc_x_array(np.array(taus), c)
    ref = [res.singular_arc_x(t, c) for t in taus]
    assert np.allclose(xs, ref, atol=1e-13)


@pytest.mark.parametrize("c", [1.5, 3.0, 5.0])
def test_arc_consistency_under_singular_control(c):
    # backward: dx/dtau = -(-x(1 - c u) + u) with u the singular control
    def f(tau, y):
        x = y[0]
        u = res.singular_control(x, c)
        return [x * (1.0 - c * u) - u]

    sol = solve_ivp(f, (LN2, 6.0), [0.5], rtol=1e-12, atol=1e-14, dense_output=True)
    for tau in np.linspace(LN2, 6.0, 200):
        x = sol.sol(tau)[0]
        assert abs(tau - res.singular_arc_tau(x, c)) < 1e-6


def test_policy_agrees_with_dp():
    c, T = 1.5, 2.0
    grid = GridSpec(256, 512, x_max=1.0, control_levels=2)
    dp = dp_resident_value(c, T, grid)
    x = dp.x
    h = x[1] - x[0]
    total = agree = 0
    for k in range(grid.nt):
        tau = dp.tau[k + 1]
        b = res.boundary_x(tau, c)
        away = np.abs(x - b) > 1.5 * h
        pol = np.where(x < b, 1.0, 0.0)
        total += away.sum()
        agree += (pol[away] == dp.control[k][away]).sum()
    assert agree / total >= 0.99


def test_policy_object():
    pol = res.ResidentPolicy(3.0, 2.0)
    assert pol.has_singular_phase
    assert not res.ResidentPolicy(3.0, 1.0).has_singular_phase
    u = pol.control_array(np.array([0.1, 0.9]), np.array([1.0, 1.0]))
    assert list(u) == [1.0, 0.0]
