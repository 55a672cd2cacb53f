import math

import pytest
from hypothesis import given, settings, strategies as st

from freerider.model import (
    ControlPair, FullState, ModelError, ModelParams, NonPositiveError, ReducedState,
    ZeroResourceError, feeding_ratio, feeding_time, lift, reduce, validate,
)


def test_validate_examples():
    p = validate(ModelParams(T=2.0, c=1.5))
    assert p.hierarchical_admissible
    q = validate(ModelParams(T=4.0, c=3.0, eps=0.5))
    assert not q.hierarchical_admissible
    with pytest.raises(NonPositiveError):
        validate(ModelParams(T=0.0, c=1.0))


def test_validate_rejects_bad_eps():
    with pytest.raises(ModelError):
        validate(ModelParams(T=1.0, c=1.0, eps=1.0))
    with pytest.raises(ModelError):
        validate(ModelParams(T=1.0, c=1.0, eps=-0.1))


def test_split_densities():
    p = ModelParams(T=1.0, c=2.0, eps=0.25)
    assert p.c_r == pytest.approx(1.5)
    assert p.c_m == pytest.approx(0.5)


def test_reduce_examples():
    assert reduce(FullState(1.0, 2.0, 2.0, 0.5), 2.0) == ReducedState(0.5, 1.0, 1.5)
    assert reduce(FullState(0.0, 0.0, 1.0, 0.0), 4.0) == ReducedState(0.0, 0.0, 4.0)
    with pytest.raises(ZeroResourceError):
        reduce(FullState(3.0, 3.0, 1e-12, 1.0), 2.0)


@given(st.floats(0, 5), st.floats(0, 5), st.floats(1e-6, 1e3), st.floats(0, 2))
def test_lift_inverts_reduce(p_r, p_m, n, t):
    fs = FullState(p_r, p_m, n, t)
    back = lift(reduce(fs, 2.0), n, 2.0)
    assert back.p_r == pytest.approx(p_r, rel=1e-12, abs=1e-300)
    assert back.p_m == pytest.approx(p_m, rel=1e-12, abs=1e-300)
    assert back.t == pytest.approx(t, abs=1e-12)


def test_control_pair_range():
    ControlPair(0.0, 1.0)
    with pytest.raises(ModelError):
        ControlPair(1.5, 0.0)


def test_feeding_ratio_continuous_at_one():
    assert feeding_ratio(0.7, 1.0) == 0.7
    assert feeding_ratio(0.7, 1.0 + 1e-9) == pytest.approx(0.7, rel=1e-8)
    assert feeding_ratio(0.7, 3.0) == pytest.approx((math.exp(1.4) - 1.0) / 2.0)


@given(st.floats(0.01, 4.0), st.floats(0.1, 6.0))
def test_feeding_time_inverse(t, c):
    assert feeding_time(feeding_ratio(t, c), c) == pytest.approx(t, rel=1e-9)
