import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from powersched.core import (
    Assign,
    EnergyParams,
    Idle,
    Job,
    ProtocolViolation,
    ScheduleTrace,
    State,
    TraceBuilder,
    TraceError,
    TurnOff,
    TurnOn,
    awaken_intervals,
    break_even,
    energy_of_trace,
    jobs_from_json,
    jobs_to_json,
    simulate,
    trace_from_schedule,
    validate_trace,
)
from powersched.harness import generate_feasible
from powersched.policies import policy_S


def test_job_validation():
    assert Job(1, 0, 3, 3).urgent
    assert not Job(1, 0, 4, 3).urgent
    assert Job(1, 2, 9, 3).latest_start == 6
    with pytest.raises(ValueError):
        Job(1, 0, 2, 3)
    with pytest.raises(ValueError):
        Job(1, 0, 2, 0)
    with pytest.raises(ValueError):
        Job(1, -1, 2, 1)
    with pytest.raises(TypeError):
        Job(1, 0.5, 2, 1)


def test_energy_params():
    p = EnergyParams("7/2", 2, "1/2")
    assert p.break_even == 7 == break_even(p)
    assert isinstance(p.wake_energy, Fraction)
    with pytest.raises(ValueError):
        EnergyParams(1, 1, 2)
    with pytest.raises(ValueError):
        EnergyParams(0, 1, 1)


def test_validate_examples():
    job = Job(1, 0, 10, 2)
    full = trace_from_schedule(10, [[(0, 2)]], {(0, 0): 1, (0, 1): 1})
    assert validate_trace(full, [job]).feasible
    half = trace_from_schedule(10, [[(0, 1)]], {(0, 0): 1})
    rep = validate_trace(half, [job])
    assert not rep.feasible and rep.deficits == {1: 1}


def test_parallel_self_execution_rejected():
    job = Job(1, 0, 4, 2)
    tr = trace_from_schedule(4, [[(0, 1)], [(0, 1)]], {(0, 0): 1, (1, 0): 1})
    rep = validate_trace(tr, [job])
    assert not rep.feasible and rep.violations


def test_execution_outside_window():
    tr = trace_from_schedule(5, [[(0, 2)]], {(0, 0): 1, (0, 1): 1})
    rep = validate_trace(tr, [Job(1, 1, 5, 2)])
    assert not rep.feasible


def test_energy_breakdown_and_window():
    p = EnergyParams(5, 2, 1)
    tr = trace_from_schedule(12, [[(0, 4), (8, 10)]], {(0, 0): 1, (0, 9): 2})
    e = energy_of_trace(tr, p)
    assert (e.wake, e.busy, e.standby) == (10, 4, 4)
    assert e.total == 18 and e.wake_standby == 14 and e.busy_standby == 8
    assert energy_of_trace(tr, p, 4, 12).total == 5 + 2 + 1


def test_builder_handles_back_to_back_periods():
    tr = trace_from_schedule(6, [[(0, 3), (3, 5)]], {})
    assert tr.wakes == [(0, 0)]
    assert [s.state for s in tr.segments[0]] == [State.STANDBY, State.OFF]


def test_trace_check_rejects_bad_wakes():
    tr = trace_from_schedule(4, [[(1, 2)]], {})
    bad = ScheduleTrace(tr.segments, [])
    with pytest.raises(TraceError):
        bad.check()


def test_json_roundtrips(tmp_path):
    jobs = [Job(1, 0, 4, 2, stream=0), Job(2, 1, 5, 1)]
    assert jobs_from_json(json.loads(json.dumps(jobs_to_json(jobs)))) == jobs
    with pytest.raises(ValueError):
        jobs_from_json({"jobs": [jobs_to_json(jobs)["jobs"][0]] * 2})
    tr = trace_from_schedule(6, [[(0, 3)], [(2, 4)]], {(0, 0): 1, (1, 2): 2})
    again = ScheduleTrace.from_json(json.loads(json.dumps(tr.to_json())))
    assert again.segments == tr.segments and sorted(again.wakes) == sorted(tr.wakes)


class _Scripted:
    def __init__(self, script):
        self.script = script

    def decide(self, view):
        return self.script.get(view.t, [])


def test_engine_runs_and_accounts():
    p = EnergyParams(5, 1, 1)
    pol = _Scripted({0: [TurnOn(0), Assign(0, 1)], 2: [Idle(0)], 10: [TurnOff(0)]})
    tr, rep = simulate(pol, [Job(1, 0, 10, 2)], p, 12)
    assert rep.feasible
    e = energy_of_trace(tr, p)
    assert (e.wake, e.busy, e.standby) == (5, 2, 8)


def test_engine_reports_miss():
    tr, rep = simulate(_Scripted({}), [Job(1, 1, 2, 1)], EnergyParams(1, 1, 1), 4)
    assert rep.misses == [(1, 2)]
    assert not rep.feasible


@pytest.mark.parametrize(
    "script",
    [
        {0: [TurnOn(0), TurnOn(0)]},
        {0: [TurnOff(0)]},
        {0: [Assign(0, 1)]},
        {0: [TurnOn(0), TurnOn(1), Assign(0, 1), Assign(1, 1)]},
        {0: [TurnOn(0), Assign(0, 99)]},
    ],
)
def test_engine_protocol_violations(script):
    with pytest.raises(ProtocolViolation):
        simulate(_Scripted(script), [Job(1, 0, 4, 2)], EnergyParams(1, 1, 1), 4)


@st.composite
def _random_trace(draw):
    procs = draw(st.integers(1, 3))
    end = draw(st.integers(1, 20))
    b = TraceBuilder(procs)
    for p in range(procs):
        for t in range(end):
            state = draw(st.sampled_from(list(State)))
            b.set(p, t, state, 1 if state is State.BUSY else None)
    return b.build(end)


@given(_random_trace(), st.integers(1, 9), st.integers(1, 3), st.integers(1, 3))
def test_energy_conservation(tr, ew, pb, ps):
    if ps > pb:
        pb, ps = ps, pb
    p = EnergyParams(ew, pb, ps)
    e = energy_of_trace(tr, p)
    busy = sum(s.length for segs in tr.segments for s in segs if s.state is State.BUSY)
    idle = sum(s.length for segs in tr.segments for s in segs if s.state is State.STANDBY)
    assert e.total == e.wake + e.busy + e.standby
    assert e.total == ew * len(tr.wakes) + pb * busy + ps * idle


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 12), st.integers(1, 15))
def test_window_additivity_and_disjoint_intervals(seed, n, ew):
    jobs, _ = generate_feasible(n, 60, Fraction(1, 5), seed=seed)
    p = EnergyParams(ew, 2, 1)
    tr, _ = simulate(policy_S(p), jobs, p)
    ivs = awaken_intervals(tr)
    for a, b in zip(ivs, ivs[1:]):
        assert a.right < b.left
    assert all(iv.wake_count >= 1 for iv in ivs)
    whole = energy_of_trace(tr, p).wake_standby
    assert whole == sum(energy_of_trace(tr, p, iv.left, iv.right).wake_standby for iv in ivs)
