"""Interactive lower-bound adversary, its offline baselines, and the bad
instances for the procrastinating policy L."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

from .core import (
    EnergyParams,
    History,
    Job,
    ScheduleTrace,
    TraceError,
    energy_of_trace,
    simulate,
    trace_from_schedule,
    validate_trace,
)
from .exact import fmt, parse_rational


def _round(x: Fraction) -> int:
    """Nearest integer, halves rounded up."""
    return int((x + Fraction(1, 2)) // 1)


@dataclass(frozen=True)
class AdversaryParams:
    k: int = 10_000
    x: Fraction = Fraction("0.1218")
    eta: Fraction = Fraction("0.2206")
    chi: Fraction = Fraction("0.4852")

    def __post_init__(self):
        for name in ("x", "eta", "chi"):
            object.__setattr__(self, name, parse_rational(getattr(self, name)))
        if self.k < 10:
            raise ValueError("k must be at least 10")
        if min(self.x, self.eta, self.chi) < 0 or self.x > Fraction(2, 5):
            raise ValueError("need x, eta, chi >= 0 and x <= 2/5")

    @property
    def B(self) -> int:
        return self.k

    @property
    def energy(self) -> EnergyParams:
        return EnergyParams(self.k, 1, 1)

    @property
    def t1(self) -> int:
        return _round((Fraction(1, 2) - self.x) * self.B)

    @property
    def case1_end(self) -> int:
        return _round(Fraction(3, 2) * self.B)

    @property
    def t2(self) -> int:
        return _round((Fraction(3, 2) + self.eta) * self.B)

    @property
    def t3(self) -> int:
        return _round((Fraction(3, 2) + self.eta + self.chi) * self.B)

    @property
    def horizon(self) -> int:
        return self.t3 + self.B + 5


class Phase(str, Enum):
    WAITING = "waiting-first-exec"
    CASE1 = "case1-monitor"
    CASE2_M1 = "case2-monitor1"
    CASE2_M2 = "case2-monitor2"
    DONE = "done"


def monitor_step(observed_all_off_at: Optional[int], window: tuple[int, int], job_id: int = 0) -> Optional[Job]:
    """Urgent unit job right after an all-off tick inside the (inclusive) window."""
    t0, t1 = window
    if t0 > t1:
        raise ValueError("empty monitor window")
    if observed_all_off_at is None or not t0 <= observed_all_off_at <= t1:
        return None
    t = observed_all_off_at
    return Job(job_id, t + 1, t + 2, 1)


@dataclass
class AdversarySource:
    """Reactive job source.  It sees only end-of-tick processor states and
    the first execution tick of each job."""

    params: AdversaryParams
    phase: Phase = Phase.WAITING
    case: Optional[int] = None
    first_exec: Optional[int] = None
    window: Optional[tuple[int, int]] = None
    released: list[Job] = field(default_factory=list)
    m1: int = 0
    m2: int = 0

    @property
    def m(self) -> int:
        return len(self.released)

    def _emit(self, job: Job) -> list[Job]:
        self.released.append(job)
        return [job]

    def _next_id(self) -> int:
        return len(self.released) + 1

    def _monitor(self, t: int, history: History) -> Optional[Job]:
        tau = t - 1
        if not history.was_all_off(tau):
            return None
        return monitor_step(tau, self.window, self._next_id())

    def release(self, t: int, history: History) -> list[Job]:
        P = self.params
        if t == 0:
            return self._emit(Job(1, 0, P.B, 1))

        if self.phase is Phase.WAITING:
            s = history.first_exec.get(1)
            if s is not None and s <= P.t1:
                self.case, self.first_exec = 1, s
                self.phase, self.window = Phase.CASE1, (s, P.case1_end)
            elif t == P.t1 + 1:
                self.case = 2
                self.phase, self.window = Phase.CASE2_M1, (P.B, P.t2)
                out = []
                for _ in range(P.B - P.t1 - 1):
                    out += self._emit(Job(self._next_id(), t, P.B, 1))
                return out
            else:
                return []

        if self.phase is Phase.CASE2_M1 and t - 1 > P.t2:
            if self.m1 == 0:
                self.phase = Phase.DONE
            else:
                self.phase, self.window = Phase.CASE2_M2, (P.t2 + 1, P.t3)
        if self.phase is Phase.CASE1 and t - 1 > P.case1_end:
            self.phase = Phase.DONE
        if self.phase is Phase.CASE2_M2 and t - 1 > P.t3:
            self.phase = Phase.DONE
        if self.phase is Phase.DONE:
            return []

        job = self._monitor(t, history)
        if job is None:
            return []
        if self.phase is Phase.CASE2_M1:
            self.m1 += 1
        elif self.phase is Phase.CASE2_M2:
            self.m2 += 1
        return self._emit(job)

    def summary(self) -> dict:
        d = {"case": self.case, "released": self.m}
        if self.case == 1:
            d["m"] = self.m
            d["first_exec"] = self.first_exec
        elif self.case == 2:
            d["m1"], d["m2"] = self.m1, self.m2
        return d


def adversary_source(params: AdversaryParams) -> AdversarySource:
    return AdversarySource(params)


# ---------------------------------------------------------------------------
# offline baselines (single processor, feasible, upper bounds on OPT)
# ---------------------------------------------------------------------------


def _single(end: int, periods: list[tuple[int, int]], slots: dict[int, int]) -> ScheduleTrace:
    return trace_from_schedule(end, [periods], {(0, t): j for t, j in slots.items()})


def baseline_case1(released: list[Job], params: AdversaryParams, first_exec: int, end: Optional[int] = None) -> ScheduleTrace:
    B = params.B
    if not released or released[0] != Job(1, 0, B, 1):
        raise TraceError("log does not start with the first adversary job")
    urgent = released[1:]
    if any(not j.urgent or j.exec != 1 for j in urgent):
        raise TraceError("case 1 log may only contain urgent unit jobs after the first")
    last = max(j.deadline for j in released)
    end = max(last, params.horizon) if end is None else end
    m = len(released)
    if m == 1:
        return _single(end, [(0, 1)], {0: 1})
    a2 = urgent[0].arrival
    if a2 <= B:
        first_part, slots = [(a2 - 1, a2 + 1)], {a2 - 1: 1, a2: urgent[0].id}
    else:
        first_part, slots = [(B - 1, a2 + 1)], {B - 1: 1, a2: urgent[0].id}
    if m == 2:
        return _single(end, first_part, slots)
    if m == 3:
        a3 = urgent[1].arrival
        slots[a3] = urgent[1].id
        if a3 - a2 > B:
            return _single(end, first_part + [(a3, a3 + 1)], slots)
        return _single(end, [(first_part[0][0], a3 + 1)], slots)
    slots = {first_exec: 1}
    slots.update({j.arrival: j.id for j in urgent})
    return _single(end, [(first_exec, last)], slots)


def baseline_case2(released: list[Job], params: AdversaryParams, m1: int, m2: int, end: Optional[int] = None) -> ScheduleTrace:
    B, T1 = params.B, params.t1
    if not released or released[0] != Job(1, 0, B, 1):
        raise TraceError("log does not start with the first adversary job")
    batch = [j for j in released[1:] if j.arrival == T1 + 1 and j.deadline == B]
    if len(batch) != B - T1 - 1:
        raise TraceError("case 2 log lacks the overload batch")
    urgent = released[1 + len(batch):]
    if len(urgent) != m1 + m2 or any(not j.urgent for j in urgent):
        raise TraceError("case 2 monitor jobs inconsistent with the counts")
    off = B if m1 == 0 else (params.t2 if m2 == 0 else params.t3)
    off = max([off] + [j.deadline for j in urgent])
    end = max(off, params.horizon) if end is None else end
    slots = {T1: 1}
    slots.update({T1 + 1 + i: j.id for i, j in enumerate(batch)})
    slots.update({j.arrival: j.id for j in urgent})
    return _single(end, [(T1, off)], slots)


@dataclass
class DuelResult:
    policy: str
    case: int
    counts: dict
    policy_energy: Fraction
    baseline_energy: Fraction
    processors: int
    misses: int
    policy_trace: ScheduleTrace
    baseline_trace: ScheduleTrace
    jobs: list[Job]

    @property
    def ratio(self) -> Fraction:
        return self.policy_energy / self.baseline_energy

    def to_json(self) -> dict:
        d = {"policy": self.policy, "case": self.case}
        d.update({k: v for k, v in self.counts.items() if k in ("m", "m1", "m2")})
        d.update(
            policy_energy=fmt(self.policy_energy),
            baseline_energy=fmt(self.baseline_energy),
            ratio=float(self.ratio),
            processors=self.processors,
            misses=self.misses,
        )
        return d


def duel(policy, params: AdversaryParams, name: Optional[str] = None) -> DuelResult:
    """Run ``policy`` against the adversary and price the matching baseline."""
    src = adversary_source(params)
    energy = params.energy
    trace, report = simulate(policy, src, energy, params.horizon)
    jobs = list(src.released)
    if src.case == 1:
        base = baseline_case1(jobs, params, src.first_exec, trace.end)
    elif src.case == 2:
        base = baseline_case2(jobs, params, src.m1, src.m2, trace.end)
    else:
        raise RuntimeError("adversary never decided a case")
    check = validate_trace(base, jobs)
    if not check.feasible:
        raise RuntimeError(f"baseline infeasible: {check.violations or check.deficits}")
    return DuelResult(
        name or getattr(policy, "name", type(policy).__name__),
        src.case,
        src.summary(),
        energy_of_trace(trace, energy).total,
        energy_of_trace(base, energy).total,
        trace.max_concurrent_on(),
        len(report.misses),
        trace,
        base,
        jobs,
    )


def lower_bound_constant(x=Fraction("0.1218"), eta=Fraction("0.2206"), chi=Fraction("0.4852")) -> Fraction:
    """Worst of the adversary's four outcome ratios in the large-k limit."""
    x, eta, chi = (parse_rational(v) for v in (x, eta, chi))
    return min(
        (4 + x) / 2,
        (3 + x + eta) / (Fraction(3, 2) + x),
        (4 + x + eta + chi) / (2 + x + eta),
        (5 + x + eta + chi) / (2 + x + eta + chi),
    )


# ---------------------------------------------------------------------------
# bad instances for L
# ---------------------------------------------------------------------------


def gen_J_edf(k: int) -> list[Job]:
    """One long job plus ``k - 1`` unit jobs that all hit zero slack together under L."""
    if k < 2:
        raise ValueError("k must be at least 2")
    return [Job(1, 0, 4 * k, 3 * k)] + [Job(i + 1, k, 4 * k - 1, 1) for i in range(1, k)]


def gen_J_six(n: int, B: int) -> list[Job]:
    if n < 2 or n % 2:
        raise ValueError("n must be even and at least 2")
    if B < 6:
        raise ValueError("B must be at least 6")
    jobs = [Job(i, (i - 1) * B + 2 * i, i * B + 2 * i + 1, 1) for i in range(1, n + 1)]
    jobs += [Job(n + k, 2 * k * B + 4 * k, 2 * k * B + 4 * k + 1, 1) for k in range(1, n // 2 + 1)]
    return jobs


def baseline_F(n: int, B: int, params: Optional[EnergyParams] = None, end: Optional[int] = None) -> ScheduleTrace:
    """Single-processor witness: one short on-period per pair of j-jobs."""
    jobs = {j.id: j for j in gen_J_six(n, B)}
    if params is not None and params.break_even != B:
        raise ValueError("energy parameters do not match B")
    periods, slots = [], {}
    for k in range(1, n // 2 + 2):
        lo = max(0, (2 * k - 2) * B + 4 * k - 5)
        hi = (2 * k - 2) * B + 4 * k - 1
        periods.append((lo, hi))
    for k in range(1, n // 2 + 1):
        odd, even = jobs[2 * k - 1], jobs[2 * k]
        slots[odd.arrival] = odd.id
        slots[2 * k * B + 4 * k - 1] = even.id
        slots[2 * k * B + 4 * k] = n + k
    last = max(hi for _, hi in periods)
    return _single(end if end is not None else last, periods, slots)


def report_json(result: DuelResult) -> str:
    return json.dumps(result.to_json(), indent=2)
