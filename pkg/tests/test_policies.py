from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from powersched.adversary import gen_J_edf, gen_J_six
from powersched.core import EnergyParams, Job, JobRuntime, State, energy_of_trace, simulate
from powersched.exact import LAMBDA_UNIT
from powersched.harness import assign_streams, generate_feasible
from powersched.invariants import check_anchor_policy, check_processor_budget
from powersched.policies import (
    ConfigurationError,
    FeasibilityAssertion,
    MultiStreamPolicy,
    anchor,
    overload_check,
    partition_streams,
    policy_L,
    policy_MS,
    policy_S,
    policy_S_dagger,
    urgency_check,
)

ONE = Fraction(1)


def _busy(trace, p):
    return [(s.start, s.end, s.job) for s in trace.segments[p] if s.state is State.BUSY]


def _rt(d, rem, i=0):
    return JobRuntime(Job(i, 0, d, rem), rem)


def test_anchor_examples():
    assert anchor(Job(1, 0, 25, 3), ONE, 10) == 15
    assert anchor(Job(1, 20, 25, 1), ONE, 10) == 20
    assert anchor(Job(1, 0, 100, 1), LAMBDA_UNIT, 100) == 16


def test_urgency_examples():
    assert urgency_check([_rt(5, 3, 1), _rt(4, 2, 2)], 0) == 5
    assert urgency_check([], 0) is None
    assert urgency_check([_rt(10, 1)], 0) is None
    assert overload_check([_rt(5, 3, 1), _rt(4, 2, 2)], 0) is None
    assert overload_check([_rt(5, 3, 1), _rt(4, 2, 2)], 1) == 5


def test_S_single_job_waits_for_anchor():
    p = EnergyParams(10, 1, 1)
    pol = policy_S(p)
    tr, rep = simulate(pol, [Job(1, 0, 30, 1)], p)
    assert rep.feasible
    assert tr.wakes == [(0, 20)]
    assert _busy(tr, 0) == [(20, 21, 1)]
    assert [(s.start, s.end) for s in tr.segments[0] if s.state is State.STANDBY] == [(21, 30)]
    assert energy_of_trace(tr, p).wake_standby == 10 + 9


def test_S_zero_slack_arrival_keeps_one_processor():
    p = EnergyParams(10, 1, 1)
    pol = policy_S(p)
    tr, rep = simulate(pol, [Job(1, 0, 12, 1), Job(2, 2, 4, 2)], p)
    assert rep.feasible and tr.processor_count == 1
    assert _busy(tr, 0) == [(2, 4, 2), (4, 5, 1)]
    assert not any(kind == "urgency-enter" for _, kind in pol.events)


def test_S_overload_uses_second_processor():
    p = EnergyParams(4, 1, 1)
    pol = policy_S(p)
    tr, rep = simulate(pol, [Job(1, 0, 10, 3), Job(2, 7, 10, 3)], p)
    assert rep.feasible
    assert pol.events == [(6, "wake"), (7, "urgency-enter"), (9, "urgency-exit"), (10, "off")]
    assert _busy(tr, 0) == [(6, 9, 1)] and _busy(tr, 1) == [(7, 10, 2)]
    (iv,) = __import__("powersched").awaken_intervals(tr)
    assert (iv.left, iv.right, iv.wake_count) == (6, 10, 2)
    assert check_anchor_policy(tr, [Job(1, 0, 10, 3), Job(2, 7, 10, 3)], ONE, p) == []


def test_S_raises_on_miss():
    p = EnergyParams(4, 1, 1)
    bad = [Job(1, 0, 2, 2), Job(2, 0, 2, 2), Job(3, 0, 2, 2)]
    with pytest.raises(FeasibilityAssertion):
        simulate(policy_S(p), bad, p)


def test_S_dagger_runs_two_old_jobs_together():
    p = EnergyParams(4, 1, 1)
    jobs = [Job(i, 0, 10, 1) for i in range(1, 5)] + [Job(5, 7, 10, 1)]
    sd = policy_S_dagger(p, ONE)
    tr, rep = simulate(sd, jobs, p)
    assert rep.feasible
    at8 = [s.job for segs in tr.segments for s in segs if s.state is State.BUSY and s.start <= 8 < s.end]
    assert len(at8) == 2 and all(j <= 4 for j in at8)
    s_tr, _ = simulate(policy_S(p), jobs, p)
    at8 = [s.job for segs in s_tr.segments for s in segs if s.state is State.BUSY and s.start <= 8 < s.end]
    assert len(at8) == 1


def test_S_dagger_matches_S_without_urgency():
    p = EnergyParams(10, 1, 1)
    jobs = [Job(1, 0, 40, 1)]
    a, _ = simulate(policy_S_dagger(p), jobs, p)
    b, _ = simulate(policy_S(p, LAMBDA_UNIT), jobs, p)
    assert a.segments == b.segments and a.wakes == b.wakes


def test_S_dagger_rejects_non_unit():
    p = EnergyParams(10, 1, 1)
    with pytest.raises(ConfigurationError):
        simulate(policy_S_dagger(p), [Job(1, 0, 10, 2)], p)


def test_lambda_range():
    with pytest.raises(ConfigurationError):
        policy_S(EnergyParams(1, 1, 1), Fraction(3, 2))


def test_L_single_job():
    p = EnergyParams(10, 1, 1)
    tr, rep = simulate(policy_L(p), [Job(1, 0, 15, 1)], p)
    assert rep.feasible
    assert tr.wakes == [(0, 14)]
    assert [(s.start, s.end, s.state) for s in tr.segments[0]][1:3] == [
        (14, 15, State.BUSY), (15, 25, State.STANDBY)
    ]


def test_L_on_J_edf_needs_k_processors():
    p = EnergyParams(10, 1, 1)
    pol = policy_L(p)
    tr, rep = simulate(pol, gen_J_edf(10), p)
    assert rep.feasible
    assert tr.max_concurrent_on() >= 10 and pol.processors_used >= 10


def test_L_on_J_six_closed_form():
    p = EnergyParams(1000, 1, 1)
    tr, rep = simulate(policy_L(p), gen_J_six(40, 1000), p)
    assert rep.feasible
    assert energy_of_trace(tr, p).total == 20 * (3000 + 3 + 3000) >= 120000


def test_MS_configuration():
    p = EnergyParams(5, 1, 1)
    with pytest.raises(ConfigurationError):
        policy_MS(p, 3, 3)
    assert policy_MS(p, 3, 4).factor == 12
    assert policy_MS(p, 2, 4).factor == 4
    assert partition_streams(5, 7) == [[0, 1, 2], [3, 4]]
    assert policy_MS(p, 5, 7).processor_budget == 7


def test_MS_single_stream_equals_S():
    p = EnergyParams(6, 2, 1)
    jobs, _ = generate_feasible(12, 80, Fraction(1, 5), seed=3)
    jobs = [Job(j.id, j.arrival, j.deadline, j.exec, 0) for j in jobs]
    a, _ = simulate(policy_MS(p, 1, 2), jobs, p)
    b, _ = simulate(policy_S(p), jobs, p)
    assert a.segments == b.segments


def test_MS_requires_stream_labels():
    p = EnergyParams(5, 1, 1)
    with pytest.raises(ConfigurationError):
        simulate(policy_MS(p, 3, 4), [Job(1, 0, 5, 1)], p)


def test_MS_shared_processor_absorbs_light_stream():
    p = EnergyParams(10, 1, 1)
    jobs = [Job(1, 0, 30, 1, 0), Job(2, 0, 30, 1, 1), Job(3, 0, 30, 1, 2)]
    pol = policy_MS(p, 3, 4)
    tr, rep = simulate(pol, jobs, p)
    assert rep.feasible
    assert tr.max_concurrent_on() == 1  # everything fits on the shared processor


_seeds = st.integers(0, 2**32)


@settings(max_examples=150, deadline=None)
@given(_seeds, st.integers(1, 40), st.sampled_from([0, 0.1, 0.5]), st.integers(1, 30),
       st.sampled_from([Fraction(1), Fraction(1, 2), Fraction(2, 3)]))
def test_S_feasible_and_invariants(seed, n, slack, ew, psi_s):
    jobs, _ = generate_feasible(n, 4 * n + 10, slack, seed=seed)
    p = EnergyParams(ew, 2, psi_s)
    pol = policy_S(p)
    tr, rep = simulate(pol, jobs, p)
    assert rep.feasible and not rep.misses
    assert check_anchor_policy(tr, jobs, ONE, p) == []
    _check_urgency_exits(pol, tr, jobs)


@settings(max_examples=150, deadline=None)
@given(_seeds, st.integers(1, 40), st.sampled_from([0, 0.1, 0.5]), st.integers(1, 30))
def test_S_dagger_feasible_and_invariants(seed, n, slack, ew):
    jobs, _ = generate_feasible(n, 2 * n + 5, slack, unit=True, seed=seed)
    p = EnergyParams(ew, 1, 1)
    pol = policy_S_dagger(p)
    tr, rep = simulate(pol, jobs, p)
    assert rep.feasible
    assert check_anchor_policy(tr, jobs, LAMBDA_UNIT, p, unit=True) == []


@settings(max_examples=60, deadline=None)
@given(_seeds, st.integers(3, 30), st.integers(1, 20), st.sampled_from([(3, 4), (3, 5), (2, 4), (4, 5)]))
def test_MS_feasible_within_budget(seed, n, ew, kh):
    import random

    k, h = kh
    rng = random.Random(seed)
    jobs, _ = generate_feasible(n, 3 * n, Fraction(1, 5), seed=rng)
    jobs = assign_streams(jobs, k, rng)
    p = EnergyParams(ew, 1, 1)
    tr, rep = simulate(policy_MS(p, k, h), jobs, p)
    assert rep.feasible
    assert check_processor_budget(tr, h) == []


def _check_urgency_exits(pol, tr, jobs):
    t_star = None
    last = {}
    for segs in tr.segments:
        for s in segs:
            if s.state is State.BUSY:
                last[s.job] = max(last.get(s.job, 0), s.end)
    for t, kind in pol.events:
        if kind == "urgency-enter":
            t_star = t
        elif kind == "urgency-exit":
            assert all(last[j.id] <= t for j in jobs if j.arrival < t_star)
