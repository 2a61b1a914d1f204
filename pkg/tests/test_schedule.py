import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adpnav.errors import InvalidParams
from adpnav.schedule import (
    ActionBounds,
    FidelitySchedule,
    ScheduleKind,
    ScheduleParams,
    blended_schedule,
    ddp_schedule,
    decode_action,
    encode_params,
    fixed_schedule,
    incremental_schedule,
    unconstrained_schedule,
)
from oracles import ddp_intervals_decimal

params_st = st.builds(
    ScheduleParams,
    T=st.floats(0.1, 10.0),
    N=st.integers(1, 60),
    p=st.floats(1.0, 4.0),
    alpha=st.floats(0.0, 1.0),
)


def test_ddp_against_extended_precision():
    s = ddp_schedule(2.0, 20, 1.7)
    ref = [float(d) for d in ddp_intervals_decimal(2, 20, "1.7")]
    assert s.kind == ScheduleKind.DECREMENTAL
    assert np.allclose(s.intervals, ref, rtol=0, atol=1e-12)
    assert s.intervals[0] == pytest.approx(0.01228, abs=1e-5)
    assert s.intervals[-1] == pytest.approx(0.16701, abs=1e-5)
    assert abs(s.total - 2.0) < 1e-9


def test_ddp_degenerate_cases():
    assert np.allclose(ddp_schedule(2.0, 20, 1.0).intervals, 0.1, atol=1e-15)
    one = ddp_schedule(1.5, 1, 2.5)
    assert one.n == 1 and one.intervals[0] == 1.5


@pytest.mark.parametrize("bad", [(0.0, 20, 1.7), (2.0, 0, 1.7), (2.0, 20, 0.5), (2.0, 2.5, 1.7)])
def test_ddp_rejects_bad_params(bad):
    with pytest.raises(InvalidParams):
        ddp_schedule(*bad)


def test_blended_collapse_identities():
    for p in (1.0, 1.7, 2.9):
        assert np.array_equal(blended_schedule(ScheduleParams(2.0, 20, p, 0.0)).intervals,
                              ddp_schedule(2.0, 20, p).intervals)
        assert np.array_equal(blended_schedule(ScheduleParams(2.0, 20, p, 1.0)).intervals,
                              fixed_schedule(2.0, 20).intervals)
    assert np.allclose(fixed_schedule(2.0, 20).intervals, 0.1, atol=1e-15)


def test_blended_hand_example():
    s = blended_schedule(ScheduleParams(2.0, 2, 2.0, 0.5))
    assert s.kind == ScheduleKind.BLENDED
    assert np.allclose(s.intervals, [0.75, 1.25], atol=1e-15)


def test_incremental_reverses():
    s = incremental_schedule(ScheduleParams(2.0, 2, 2.0, 0.5))
    assert s.kind == ScheduleKind.INCREMENTAL
    assert np.allclose(s.intervals, [1.25, 0.75], atol=1e-15)
    assert s.total == pytest.approx(2.0, abs=1e-12)
    uni = incremental_schedule(ScheduleParams(2.0, 20, 1.7, 1.0))
    assert np.allclose(uni.intervals, 0.1, atol=1e-15)


def test_invalid_alpha_rejected():
    with pytest.raises(InvalidParams):
        blended_schedule(ScheduleParams(2.0, 20, 1.7, 1.5))


def test_schedule_rejects_nonpositive_interval():
    with pytest.raises(InvalidParams):
        FidelitySchedule(np.array([0.1, 0.0]), ScheduleKind.FIXED)
    with pytest.raises(InvalidParams):
        FidelitySchedule(np.array([]), ScheduleKind.FIXED)


@settings(max_examples=200, deadline=None)
@given(params_st)
def test_schedule_invariants(params):
    s = blended_schedule(params)
    assert s.n == params.N
    assert np.all(s.intervals > 0)
    assert abs(s.total - params.T) <= 1e-9 * max(1.0, params.T)
    inc = incremental_schedule(params)
    assert np.array_equal(inc.intervals, s.intervals[::-1])


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.1, 10.0),
    st.integers(2, 60),
    st.floats(1.05, 4.0),
    st.floats(0.0, 0.95),
)
def test_monotonicity(T, N, p, alpha):
    s = blended_schedule(ScheduleParams(T, N, p, alpha))
    assert np.all(np.diff(s.intervals) > 0)
    assert np.all(np.diff(incremental_schedule(ScheduleParams(T, N, p, alpha)).intervals) < 0)


@settings(max_examples=100, deadline=None)
@given(params_st, st.floats(-0.05, 0.05))
def test_alpha_lipschitz(params, da):
    a2 = min(1.0, max(0.0, params.alpha + da))
    s1 = blended_schedule(params)
    s2 = blended_schedule(ScheduleParams(params.T, params.N, params.p, a2))
    frac = np.arange(params.N + 1) / params.N
    # each interval is a difference of two boundary times, so the bound doubles
    bound = 2 * params.T * abs(a2 - params.alpha) * np.max(np.abs(frac - frac**params.p))
    assert np.max(np.abs(s1.intervals - s2.intervals)) <= bound + 1e-12


def test_decode_endpoints_and_midpoint():
    lo = decode_action([-1, -1, -1, -1])
    hi = decode_action([1, 1, 1, 1])
    mid = decode_action([0, 0, 0, 0])
    assert (lo.T, lo.N, lo.p, lo.alpha) == (1.0, 5, 1.0, 0.0)
    assert (hi.T, hi.N, hi.p, hi.alpha) == (3.0, 30, 3.0, 1.0)
    assert (mid.T, mid.N, mid.p, mid.alpha) == (2.0, 18, 2.0, 0.5)


def test_decode_saturates():
    assert decode_action([5, -5, 2, -2]) == decode_action([1, -1, 1, -1])


def test_encode_round_trip():
    b = ActionBounds()
    raw = encode_params(ScheduleParams(2.0, 20, 1.7, 0.0), b)
    back = decode_action(raw, b)
    assert back.N == 20
    assert back.T == pytest.approx(2.0) and back.p == pytest.approx(1.7) and back.alpha == pytest.approx(0.0)


def test_unconstrained_schedule():
    s = unconstrained_schedule(np.zeros(20), 2.0)
    assert s.kind == ScheduleKind.UNCONSTRAINED
    assert np.allclose(s.intervals, 0.1)
    r = np.random.default_rng(0).uniform(-1, 1, 20)
    s = unconstrained_schedule(r, 2.0)
    assert s.n == 20 and np.all(s.intervals > 0) and abs(s.total - 2.0) < 1e-12
