import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freerider import values as val
from freerider.model import LN2, FullState, ModelError, ModelParams, ReducedState
from freerider.mutant import MutantMode, MutantPolicy
from freerider.oracle import (
    GridSpec, ShapeMismatch, compare, dp_mutant_value, dp_resident_value, dump_table, flow,
    load_table, richardson, step_reward,
)
from freerider.resident import Region, boundary_x, season_threshold_T1
from freerider.trajectory import constant_policy, integrate, integrate_season


def test_gridspec_validation():
    with pytest.raises(ModelError):
        GridSpec(8, 64)
    with pytest.raises(ModelError):
        GridSpec(64, 64, x_max=0.5)
    with pytest.raises(ModelError):
        GridSpec(64, 64, control_levels=1)
    g = GridSpec(64, 128, control_levels=5)
    assert g.controls[0] == 0.0 and g.controls[-1] == 1.0
    assert g.refined().nx == 128 and g.refined().nt == 256


@given(st.floats(0.0, 1.5), st.floats(0.0, 1.0), st.floats(0.2, 5.0), st.floats(1e-3, 0.3))
@settings(max_examples=25, deadline=None)
def test_step_kernels_match_integrator(x0, u, c, dt):
    p = ModelParams(T=1.0, c=c)
    o = integrate(p, constant_policy(u, u), FullState(x0, x0, 1.0, 0.0), dt)
    assert float(flow(x0, u, c * u, dt)) == pytest.approx(o.final.p_r / o.final.n, rel=1e-9, abs=1e-12)
    assert float(step_reward(x0, u, c * u, dt)) == pytest.approx(o.U_r, rel=1e-8, abs=1e-13)


def test_terminal_slice_zero():
    r = dp_resident_value(3.0, 1.0, GridSpec(32, 32))
    assert np.all(r.U[0] == 0.0)
    m = dp_mutant_value(3.0, 0.0, 1.0, GridSpec(32, 32), slices=4)
    assert np.all(m.U[0] == 0.0)


def test_resident_dp_matches_analytic():
    c, T = 3.0, 2.0
    vs = [dp_resident_value(c, T, GridSpec(n, 2 * n)).value(0.0) for n in (128, 256, 512)]
    ext, order = richardson(vs)
    assert abs(ext / val.resident_value(T, c) - 1.0) < 1e-3
    assert order == pytest.approx(2.0, abs=0.3)


def test_resident_dp_converges():
    vs = [dp_resident_value(3.0, 2.0, GridSpec(n, 2 * n)).value(0.0) for n in (64, 128, 256, 512)]
    d = np.abs(np.diff(vs))
    assert np.all(d[:-1] / d[1:] >= 1.5)


def test_dp_value_monotone_in_T():
    r = dp_resident_value(3.0, 4.0, GridSpec(128, 256))
    assert np.all(np.diff(r.U, axis=0) >= -1e-12)
    m = dp_mutant_value(3.0, 0.0, 4.0, GridSpec(32, 128), slices=32)
    assert np.all(np.diff(m.U[:, 0, 0]) >= -1e-12)


def test_mixed_controls_at_the_arc():
    c, T = 3.0, 3.0
    r = dp_resident_value(c, T, GridSpec(512, 1024, x_max=1.0, control_levels=11))
    h = r.x[1]
    mixed = 0
    slices = range(300, 1024, 50)
    for k in slices:
        tau = r.tau[k + 1]
        assert tau > LN2
        near = np.abs(r.x - boundary_x(tau, c)) < 2 * h
        u = r.control[k][near]
        mixed += np.any((u > 0.0) & (u < 1.0))
        far = np.abs(r.x - boundary_x(tau, c)) > 4 * h
        assert set(np.unique(r.control[k][far])) <= {0.0, 1.0}
    assert mixed == len(slices)


def test_mutant_dp_region_A_equal():
    c = 3.0
    T = 0.9 * season_threshold_T1(c)
    vs = [dp_mutant_value(c, 0.0, T, GridSpec(n, 4 * n, control_levels=5), slices=1).value(0.0, 0.0)
          for n in (32, 64)]
    ext, _ = richardson(vs, order=2.0)
    U_r = val.resident_value(T, c)
    assert abs(ext / U_r - 1.0) < 1e-3


def test_mutant_dp_positive_gap():
    c, T = 3.0, 4.0
    v = dp_mutant_value(c, 0.0, T, GridSpec(64, 256), slices=1).value(0.0, 0.0)
    assert v > val.resident_value(T, c) * 1.2


@pytest.mark.parametrize("c,eps,T,ref", [
    # integrator values of the best response, computed independently
    (3.0, 0.1, 3.0, 0.24699767656449811),
    (1.25, 0.35, 4.0, 0.42191736114927736),
])
def test_mutant_dp_eps_positive(c, eps, T, ref):
    p = ModelParams(T=T, c=c, eps=eps)
    assert integrate_season(p, MutantPolicy(p)).U_m == pytest.approx(ref, rel=1e-9)
    vs = [dp_mutant_value(c, eps, T, GridSpec(n, 4 * n), slices=1).value(0.0, 0.0) for n in (32, 64)]
    ext, _ = richardson(vs, order=2.0)
    assert abs(ext / ref - 1.0) < 2e-3


def test_hierarchical_consistency():
    c, T = 3.0, 2.0
    g = GridSpec(64, 256)
    mimic = dp_mutant_value(c, 0.0, T, g, mimic=True, slices=1).value(0.0, 0.0)
    resident = dp_resident_value(c, T, GridSpec(64, 256, control_levels=11)).value(0.0)
    assert mimic == pytest.approx(resident, rel=1e-3)


def test_no_jump_across_S_r():
    c = 3.0
    m = dp_mutant_value(c, 0.0, 0.6, GridSpec(128, 256, x_max=1.0, control_levels=2), slices=8)
    x, h = m.x, m.x[1]
    for k in range(2, len(m.tau)):
        S = -math.expm1(-m.tau[k])
        i = np.searchsorted(x, S)
        for xm in (0.7, 0.9):
            j = int(round(xm / h))
            U = m.U[k]
            left = (U[i - 2, j] - U[i - 3, j]) / h
            right = (U[i + 2, j] - U[i + 1, j]) / h
            # a costate jump would be O(slope) ~ 0.1
            assert abs(right - left) < 1e-4
            left_m = (U[i - 2, j + 1] - U[i - 2, j - 1]) / (2 * h)
            right_m = (U[i + 2, j + 1] - U[i + 2, j - 1]) / (2 * h)
            assert abs(right_m - left_m) < 1e-4


def test_policy_agrees_with_dp_argmax():
    c, T = 3.0, 4.0
    m = dp_mutant_value(c, 0.0, T, GridSpec(64, 256), slices=32)
    pol = MutantPolicy(ModelParams(T=T, c=c))
    x, h = m.x, m.x[1]
    rng = np.random.default_rng(0)
    agree = n = 0
    for _ in range(6000):
        k, i, j = rng.integers(1, len(m.tau)), rng.integers(0, len(x)), rng.integers(0, len(x))
        tau = m.tau[k]
        if abs(x[i] - boundary_x(tau, c)) <= h:
            continue
        region, mode = pol.classify(rs := _rs(x[i], x[j], tau))
        if mode is MutantMode.SINGULAR:
            continue
        resid, _ = pol._mutant_residual(region)
        scale = 4.0 if region is Region.REPRO and tau > LN2 else 1.0
        if abs(resid(rs.x_r, rs.x_m, tau)) / scale <= h:
            continue
        n += 1
        agree += (mode is MutantMode.FEED) == (m.control[k - 1][i, j] >= 0.5)
    assert agree / n >= 0.98


def _rs(x_r, x_m, tau):
    return ReducedState(float(x_r), float(x_m), float(tau))


def test_clamp_flag():
    # optimal resident paths leave the top of the box downwards
    assert not dp_resident_value(3.0, 3.0, GridSpec(32, 64, x_max=1.0)).clamped
    # feeding residents push x_m up whatever the mutant does
    assert dp_mutant_value(3.0, 0.0, 3.0, GridSpec(32, 64, x_max=1.0), slices=2).clamped


def test_compare_harness():
    a = np.array([0.2, 0.3])
    rep = compare(a, np.vstack([a, a, a]))
    assert rep.passed and np.all(rep.abs_err == 0.0)
    bad = compare(a * 1.05, np.vstack([a, a]))
    assert not bad.passed
    with pytest.raises(ShapeMismatch):
        compare(a, np.ones((2, 3)))
    with pytest.raises(ShapeMismatch):
        richardson([1.0])


def test_richardson_exact_for_power_law():
    vs = [1.0 + 0.3 * 2.0 ** (-2 * k) for k in range(3)]
    ext, p = richardson(vs)
    assert ext == pytest.approx(1.0, abs=1e-14)
    assert p == pytest.approx(2.0, abs=1e-12)


def test_dump_round_trip(tmp_path):
    a = np.arange(24, dtype=float).reshape(2, 3, 4) / 7.0
    path = tmp_path / "t.bin"
    dump_table(a, path)
    raw = path.read_bytes()
    assert raw[:4] == b"FRDP"
    assert struct.unpack("<I", raw[4:8]) == (3,)
    assert struct.unpack("<3Q", raw[8:32]) == (2, 3, 4)
    assert len(raw) == 32 + 8 * a.size
    assert np.array_equal(load_table(path), a)
    path.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ShapeMismatch):
        load_table(path)
