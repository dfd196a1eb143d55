"""Offline single-processor optimum for small instances, plus cheap bounds."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

from .core import EnergyParams, Job, ScheduleTrace, TraceBuilder, State, energy_of_trace
from .feasibility import InfeasibleJobSet, condition_edf, edf_schedule


@dataclass(frozen=True)
class OracleLimits:
    max_jobs: int = 8
    max_horizon: int = 40


class OracleRefused(ValueError):
    """Instance lies outside the oracle's limits."""


OFF, IDLE = -2, -1  # action codes; job actions use the job's index


def _check_limits(jobs: list[Job], limits: OracleLimits) -> None:
    if len(jobs) > limits.max_jobs:
        raise OracleRefused(f"{len(jobs)} jobs exceed the limit of {limits.max_jobs}")
    span = max(j.deadline for j in jobs) - min(j.arrival for j in jobs)
    if span > limits.max_horizon:
        raise OracleRefused(f"horizon span {span} exceeds the limit of {limits.max_horizon}")


def _dominated(layer: dict) -> dict:
    """Drop states whose remaining work and cost are both no better than a peer's
    in the same power state."""
    keep = {}
    for on in (False, True):
        items = sorted(
            ((k, v) for k, v in layer.items() if k[1] == on),
            key=lambda kv: (kv[1][0], sum(kv[0][0]), kv[0][0]),
        )
        kept: list = []
        for key, val in items:
            rem, cost = key[0], val[0]
            if any(all(a <= b for a, b in zip(r2, rem)) and c2 <= cost for r2, c2 in kept):
                continue
            kept.append((rem, cost))
            keep[key] = val
    return keep


def opt_energy_exact(
    jobs: Iterable[Job],
    params: EnergyParams,
    limits: OracleLimits = OracleLimits(),
    prune: bool = True,
) -> tuple[Fraction, ScheduleTrace]:
    """Minimum-energy feasible single-processor schedule by forward DP.

    State after each tick: (remaining work per job, processor on?).  Per tick
    the processor is off, idles on, or runs one released job.  Ties keep the
    first candidate in the order off, idle, lowest job index.
    """
    jobs = sorted(jobs, key=lambda j: j.id)
    if not jobs:
        return Fraction(0), TraceBuilder(1).build(0)
    _check_limits(jobs, limits)
    ok, witness = condition_edf(jobs)
    if not ok:
        raise InfeasibleJobSet(witness)

    Ew, pb, ps = params.wake_energy, params.busy_power, params.standby_power
    t0 = min(j.arrival for j in jobs)
    t_end = max(j.deadline for j in jobs)
    start = (tuple(j.exec for j in jobs), False)
    layer = {start: (Fraction(0), None, None)}  # state -> (cost, prev state, action)
    history: list[dict] = []

    for t in range(t0, t_end):
        nxt: dict = {}
        for state in sorted(layer, key=lambda s: (s[0], s[1])):
            cost = layer[state][0]
            rem, on = state
            wake = Fraction(0) if on else Ew
            options = [(OFF, rem, False, cost), (IDLE, rem, True, cost + ps + wake)]
            for i, j in enumerate(jobs):
                if rem[i] and j.arrival <= t:
                    r = rem[:i] + (rem[i] - 1,) + rem[i + 1:]
                    options.append((i, r, True, cost + pb + wake))
            for action, r, on2, c in options:
                if any(r[i] and r[i] > j.deadline - max(t + 1, j.arrival) for i, j in enumerate(jobs)):
                    continue
                key = (r, on2)
                if key not in nxt or c < nxt[key][0]:
                    nxt[key] = (c, state, action)
        if prune:
            nxt = _dominated(nxt)
        history.append(layer)
        layer = nxt

    done = tuple(0 for _ in jobs)
    finals = [(layer[(done, on)][0], on) for on in (False, True) if (done, on) in layer]
    if not finals:
        raise RuntimeError("no feasible schedule found for a feasible job set")
    best_cost, best_on = min(finals, key=lambda x: (x[0], x[1]))

    actions: list[int] = []
    state = (done, best_on)
    for layer_t in reversed(history + [layer]):
        cost, prev, action = layer_t[state]
        if prev is None:
            break
        actions.append(action)
        state = prev
    actions.reverse()

    b = TraceBuilder(1)
    for k, action in enumerate(actions):
        t = t0 + k
        if action == OFF:
            b.set(0, t, State.OFF)
        elif action == IDLE:
            b.set(0, t, State.STANDBY)
        else:
            b.set(0, t, State.BUSY, jobs[action].id)
    b.set(0, t_end, State.OFF)
    trace = b.build(t_end)
    energy = energy_of_trace(trace, params).total
    if energy != best_cost:
        raise RuntimeError("oracle trace energy disagrees with its DP value")
    return best_cost, trace


def opt_lower_bound(jobs: Iterable[Job], params: EnergyParams) -> Fraction:
    """All work at busy power plus one wake; 0 for an empty set."""
    work = sum(j.exec for j in jobs)
    if not work:
        return Fraction(0)
    return params.busy_power * work + params.wake_energy


def opt_upper_bound(jobs: Iterable[Job], params: EnergyParams) -> tuple[Fraction, ScheduleTrace]:
    """EDF busy pattern, each idle gap bridged in standby only when that is
    cheaper than a fresh wake.  Feasible, so its energy bounds OPT from above."""
    jobs = list(jobs)
    if not jobs:
        return Fraction(0), TraceBuilder(1).build(0)
    edf = edf_schedule(jobs)
    busy = [s for s in edf.segments[0] if s.state is State.BUSY]
    b = TraceBuilder(1)
    prev_end: Optional[int] = None
    for s in busy:
        if prev_end is not None and s.start > prev_end:
            gap = s.start - prev_end
            state = State.STANDBY if gap * params.standby_power <= params.wake_energy else State.OFF
            b.set(0, prev_end, state)
        b.set(0, s.start, State.BUSY, s.job)
        prev_end = s.end
    b.set(0, prev_end, State.OFF)
    trace = b.build(prev_end)
    return energy_of_trace(trace, params).total, trace
