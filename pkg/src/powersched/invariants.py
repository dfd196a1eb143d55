"""Per-interval invariant checks for traces produced by S, S-dagger and MS.

Each check returns a list of human-readable violation strings; an empty list
means the trace passed.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable

from .core import EnergyParams, Job, ScheduleTrace, awaken_intervals, energy_of_trace
from .exact import Exact, Surd


def _tick_slack(params: EnergyParams, lam: Exact = Fraction(1)):
    # Anchors and off-times are whole ticks.  When B or lam*B is fractional a
    # single standby tick of rounding can appear; otherwise bounds are exact.
    B = params.break_even
    lb = lam * B
    exact = B.denominator == 1 and not isinstance(lb, Surd) and Fraction(lb).denominator == 1
    return Fraction(0) if exact else params.standby_power


def check_interval_count(trace: ScheduleTrace, jobs: Iterable[Job], lam: Exact, params: EnergyParams) -> list[str]:
    """At most two wakes per awaken interval; two wakes only with workload >= lam*B."""
    size = {j.id: j.exec for j in jobs}
    B = params.break_even
    out = []
    for iv in awaken_intervals(trace):
        if iv.wake_count > 2:
            out.append(f"interval {iv.index} [{iv.left},{iv.right}): {iv.wake_count} wakes")
        if iv.wake_count == 2:
            work = sum(size[j] for j in iv.executed_jobs)
            if work < lam * B:
                out.append(f"interval {iv.index} [{iv.left},{iv.right}): two wakes but workload {work} < {lam}*{B}")
    return out


def check_interval_energy(trace: ScheduleTrace, jobs: Iterable[Job], lam: Exact, params: EnergyParams) -> list[str]:
    """Wake+standby energy per interval is at most psi_s*work + (3-lam)E_w, and at most 2E_w with one wake."""
    size = {j.id: j.exec for j in jobs}
    slack = _tick_slack(params, lam)
    out = []
    for iv in awaken_intervals(trace):
        e = energy_of_trace(trace, params, iv.left, iv.right).wake_standby
        work = sum(size[j] for j in iv.executed_jobs)
        cap = params.standby_power * work + (3 - lam) * params.wake_energy + slack
        if e > cap:
            out.append(f"interval {iv.index}: wake+standby {e} exceeds {cap}")
        if iv.wake_count == 1 and e > 2 * params.wake_energy + slack:
            out.append(f"interval {iv.index}: single wake but wake+standby {e} > 2*E_w")
    return out


def check_unit_interval_energy(trace: ScheduleTrace, lam: Exact, params: EnergyParams) -> list[str]:
    """Unit-job variant: wake+standby per interval at most (3 - lam/2) E_w."""
    slack = _tick_slack(params, lam)
    out = []
    for iv in awaken_intervals(trace):
        e = energy_of_trace(trace, params, iv.left, iv.right).wake_standby
        cap = (3 - lam / 2) * params.wake_energy + slack
        if e > cap:
            out.append(f"interval {iv.index}: wake+standby {e} exceeds (3 - lambda/2)*E_w")
    return out


def check_min_awaken_length(trace: ScheduleTrace, params: EnergyParams) -> list[str]:
    """Every awaken interval that ends before the trace does lasts at least B."""
    B = params.break_even
    out = []
    for iv in awaken_intervals(trace):
        if iv.right < trace.end and iv.right - iv.left < B:
            out.append(f"interval {iv.index} [{iv.left},{iv.right}) shorter than B={B}")
    return out


def check_processor_budget(trace: ScheduleTrace, budget: int) -> list[str]:
    n = trace.max_concurrent_on()
    return [] if n <= budget else [f"{n} processors on at once, budget {budget}"]


def check_anchor_policy(trace, jobs, lam, params, *, unit: bool = False) -> list[str]:
    """All checks that apply to an S (or S-dagger, with ``unit``) trace."""
    jobs = list(jobs)
    out = check_processor_budget(trace, 2)
    out += check_interval_count(trace, jobs, lam, params)
    out += check_interval_energy(trace, jobs, lam, params)
    out += check_min_awaken_length(trace, params)
    if unit:
        out += check_unit_interval_energy(trace, lam, params)
    return out
