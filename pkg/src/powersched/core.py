"""Domain types, trace analysis and the tick-level simulation engine.

Time is measured in integer ticks; tick ``t`` covers ``[t, t+1)``.  Energy
values are exact Fractions.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Optional, Protocol, Sequence

from .exact import fmt, parse_rational


class TraceError(ValueError):
    """A schedule trace violates one of its structural invariants."""


class ProtocolViolation(RuntimeError):
    """A policy issued a command the engine cannot honour."""


# ---------------------------------------------------------------------------
# jobs and energy parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Job:
    id: int
    arrival: int
    deadline: int
    exec: int
    stream: Optional[int] = None

    def __post_init__(self):
        for name in ("id", "arrival", "deadline", "exec"):
            if not isinstance(getattr(self, name), int):
                raise TypeError(f"job {name} must be an integer tick")
        if self.arrival < 0:
            raise ValueError(f"job {self.id}: negative arrival")
        if self.exec < 1:
            raise ValueError(f"job {self.id}: exec must be >= 1")
        if self.arrival + self.exec > self.deadline:
            raise ValueError(f"job {self.id}: window too short for its execution time")

    @property
    def urgent(self) -> bool:
        return self.exec == self.deadline - self.arrival

    @property
    def latest_start(self) -> int:
        return self.deadline - self.exec


@dataclass
class JobRuntime:
    job: Job
    remaining: int

    @classmethod
    def fresh(cls, job: Job) -> "JobRuntime":
        return cls(job, job.exec)

    @property
    def id(self) -> int:
        return self.job.id

    @property
    def deadline(self) -> int:
        return self.job.deadline


@dataclass(frozen=True)
class EnergyParams:
    wake_energy: Fraction
    busy_power: Fraction
    standby_power: Fraction

    def __post_init__(self):
        for name in ("wake_energy", "busy_power", "standby_power"):
            object.__setattr__(self, name, parse_rational(getattr(self, name)))
        if min(self.wake_energy, self.busy_power, self.standby_power) <= 0:
            raise ValueError("energy parameters must be positive")
        if self.standby_power > self.busy_power:
            raise ValueError("standby power must not exceed busy power")

    @property
    def break_even(self) -> Fraction:
        return self.wake_energy / self.standby_power


def break_even(params: EnergyParams) -> Fraction:
    """Standby duration whose energy equals one wake-up, ``E_w / psi_sigma``."""
    return params.wake_energy / params.standby_power


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------


class State(str, Enum):
    OFF = "off"
    STANDBY = "standby"
    BUSY = "busy"


@dataclass(frozen=True)
class Segment:
    start: int
    end: int
    state: State
    job: Optional[int] = None

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass
class ScheduleTrace:
    """Per-processor timelines of off/standby/busy segments plus wake events.

    Every processor's segments tile ``[0, end)``.  Wake events sit exactly at
    the off -> on boundaries (a processor that is on at tick 0 woke at 0).
    """

    segments: list[list[Segment]]
    wakes: list[tuple[int, int]] = field(default_factory=list)

    @property
    def processor_count(self) -> int:
        return len(self.segments)

    @property
    def end(self) -> int:
        return max((segs[-1].end for segs in self.segments if segs), default=0)

    def check(self) -> None:
        """Raise :class:`TraceError` naming the first violated invariant."""
        end = self.end
        expected_wakes = []
        for p, segs in enumerate(self.segments):
            cursor = 0
            prev = State.OFF
            for seg in segs:
                if seg.start >= seg.end:
                    raise TraceError(f"processor {p}: empty or reversed segment at {seg.start}")
                if seg.start != cursor:
                    raise TraceError(f"processor {p}: segments not contiguous at {cursor}")
                if (seg.state is State.BUSY) != (seg.job is not None):
                    raise TraceError(f"processor {p}: job id only allowed on busy segments ({seg.start})")
                if prev is State.OFF and seg.state is not State.OFF:
                    expected_wakes.append((p, seg.start))
                prev = seg.state
                cursor = seg.end
            if cursor != end:
                raise TraceError(f"processor {p}: timeline ends at {cursor}, trace ends at {end}")
        if sorted(expected_wakes) != sorted(self.wakes):
            raise TraceError("wake events do not match off->on boundaries")

    def busy_ticks(self) -> int:
        return sum(s.length for segs in self.segments for s in segs if s.state is State.BUSY)

    def max_concurrent_on(self) -> int:
        events = []
        for segs in self.segments:
            for s in segs:
                if s.state is not State.OFF:
                    events.append((s.start, 1))
                    events.append((s.end, -1))
        best = cur = 0
        for _, d in sorted(events):
            cur += d
            best = max(best, cur)
        return best

    # -- serialization --------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "processors": self.processor_count,
            "segments": [
                [
                    {"start": s.start, "end": s.end, "state": s.state.value}
                    | ({"job": s.job} if s.job is not None else {})
                    for s in segs
                ]
                for segs in self.segments
            ],
            "wakes": [{"proc": p, "t": t} for p, t in sorted(self.wakes, key=lambda w: (w[1], w[0]))],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ScheduleTrace":
        segs = [
            [Segment(int(s["start"]), int(s["end"]), State(s["state"]), s.get("job")) for s in proc]
            for proc in data["segments"]
        ]
        if len(segs) != int(data["processors"]):
            raise TraceError("processor count does not match segment lists")
        wakes = [(int(w["proc"]), int(w["t"])) for w in data["wakes"]]
        trace = cls(segs, wakes)
        trace.check()
        return trace


class TraceBuilder:
    """Run-length recorder used by the engine and the constructive baselines.

    States persist until changed; ``set`` only needs calling on transitions.
    """

    def __init__(self, processors: int = 0):
        self._segments: list[list[Segment]] = []
        self._current: list[tuple[State, Optional[int], int]] = []
        self.wakes: list[tuple[int, int]] = []
        self.ensure(processors)

    def ensure(self, processors: int) -> None:
        while len(self._current) < processors:
            self._segments.append([])
            self._current.append((State.OFF, None, 0))

    def state(self, p: int) -> State:
        return self._current[p][0]

    def set(self, p: int, t: int, state: State, job: Optional[int] = None) -> None:
        self.ensure(p + 1)
        cur_state, cur_job, start = self._current[p]
        if cur_state is state and cur_job == job:
            return
        if t < start:
            raise TraceError(f"processor {p}: state change at {t} before {start}")
        segs = self._segments[p]
        if t == start:
            # the current run never lasted a tick: replace it
            prev = segs[-1].state if segs else State.OFF
            if prev is State.OFF and cur_state is not State.OFF:
                self._drop_wake(p, t)
            if prev is State.OFF and state is not State.OFF:
                self.wakes.append((p, t))
            if segs and segs[-1].state is state and segs[-1].job == job and segs[-1].end == t:
                last = segs.pop()
                self._current[p] = (state, job, last.start)
            else:
                self._current[p] = (state, job, t)
            return
        if cur_state is State.OFF and state is not State.OFF:
            self.wakes.append((p, t))
        segs.append(Segment(start, t, cur_state, cur_job))
        self._current[p] = (state, job, t)

    def _drop_wake(self, p: int, t: int) -> None:
        for i in range(len(self.wakes) - 1, -1, -1):
            if self.wakes[i] == (p, t):
                del self.wakes[i]
                return

    def build(self, end: int) -> ScheduleTrace:
        segs = []
        for p, (state, job, start) in enumerate(self._current):
            out = list(self._segments[p])
            if end > start:
                out.append(Segment(start, end, state, job))
            segs.append(_merge(out))
        wakes = [(p, t) for p, t in self.wakes if t < end]
        trace = ScheduleTrace(segs, wakes)
        trace.check()
        return trace


def _merge(segs: list[Segment]) -> list[Segment]:
    out: list[Segment] = []
    for s in segs:
        if out and out[-1].state is s.state and out[-1].job == s.job and out[-1].end == s.start:
            out[-1] = Segment(out[-1].start, s.end, s.state, s.job)
        else:
            out.append(s)
    return out


def trace_from_schedule(
    end: int,
    on_periods: Sequence[Sequence[tuple[int, int]]],
    execution: dict[tuple[int, int], int],
) -> ScheduleTrace:
    """Build a trace from explicit on-periods and ``(proc, tick) -> job id`` slots."""
    b = TraceBuilder(len(on_periods))
    for p, periods in enumerate(on_periods):
        for lo, hi in sorted(periods):
            for t in range(lo, hi):
                job = execution.get((p, t))
                b.set(p, t, State.BUSY if job is not None else State.STANDBY, job)
            b.set(p, hi, State.OFF)
    for (p, t), _ in execution.items():
        if not any(lo <= t < hi for lo, hi in on_periods[p]):
            raise TraceError(f"execution at tick {t} on processor {p} outside every on-period")
    return b.build(end)


# ---------------------------------------------------------------------------
# energy accounting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyBreakdown:
    wake: Fraction
    busy: Fraction
    standby: Fraction

    @property
    def total(self) -> Fraction:
        return self.wake + self.busy + self.standby

    @property
    def wake_standby(self) -> Fraction:
        return self.wake + self.standby

    @property
    def busy_standby(self) -> Fraction:
        return self.busy + self.standby

    def to_json(self) -> dict:
        return {
            "wake": fmt(self.wake),
            "busy": fmt(self.busy),
            "standby": fmt(self.standby),
            "total": fmt(self.total),
        }


def energy_of_trace(
    trace: ScheduleTrace,
    params: EnergyParams,
    start: int = 0,
    end: Optional[int] = None,
) -> EnergyBreakdown:
    """Integrate the three-state energy model over ``[start, end)``.

    Busy ticks charge the busy power, on-but-idle ticks the standby power, and
    every wake event inside the window charges one wake-up energy.
    """
    trace.check()
    hi = trace.end if end is None else end
    busy = standby = 0
    for segs in trace.segments:
        for s in segs:
            overlap = min(s.end, hi) - max(s.start, start)
            if overlap <= 0:
                continue
            if s.state is State.BUSY:
                busy += overlap
            elif s.state is State.STANDBY:
                standby += overlap
    wakes = sum(1 for _, t in trace.wakes if start <= t < hi)
    return EnergyBreakdown(
        params.wake_energy * wakes,
        params.busy_power * busy,
        params.standby_power * standby,
    )


# ---------------------------------------------------------------------------
# awaken intervals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AwakenInterval:
    index: int
    left: int
    right: int
    wake_count: int
    executed_jobs: frozenset

    @property
    def length(self) -> int:
        return self.right - self.left


def awaken_intervals(trace: ScheduleTrace) -> list[AwakenInterval]:
    """Maximal periods in which at least one processor is not off."""
    spans = sorted(
        (s.start, s.end) for segs in trace.segments for s in segs if s.state is not State.OFF
    )
    merged: list[list[int]] = []
    for lo, hi in spans:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    out = []
    for i, (lo, hi) in enumerate(merged, start=1):
        wakes = sum(1 for _, t in trace.wakes if lo <= t < hi)
        jobs = frozenset(
            s.job
            for segs in trace.segments
            for s in segs
            if s.state is State.BUSY and s.start < hi and s.end > lo
        )
        out.append(AwakenInterval(i, lo, hi, wakes, jobs))
    return out


# ---------------------------------------------------------------------------
# feasibility validation
# ---------------------------------------------------------------------------


@dataclass
class FeasibilityReport:
    allocated: dict[int, int]
    deficits: dict[int, int]
    misses: list[tuple[int, int]]
    violations: list[str]
    jobs: list[Job] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.deficits and not self.violations

    def to_json(self) -> dict:
        return {
            "feasible": self.feasible,
            "misses": [{"job": j, "deadline": d} for j, d in self.misses],
            "deficits": {str(k): v for k, v in sorted(self.deficits.items())},
            "violations": list(self.violations),
        }


def validate_trace(trace: ScheduleTrace, jobs: Iterable[Job]) -> FeasibilityReport:
    jobs = sorted(jobs, key=lambda j: j.id)
    by_id = {j.id: j for j in jobs}
    violations: list[str] = []
    try:
        trace.check()
    except TraceError as exc:
        violations.append(f"malformed trace: {exc}")
    allocated = {j.id: 0 for j in jobs}
    runs: dict[int, list[tuple[int, int]]] = {}
    for p, segs in enumerate(trace.segments):
        for s in segs:
            if s.state is not State.BUSY:
                continue
            job = by_id.get(s.job)
            if job is None:
                violations.append(f"processor {p} runs unknown job {s.job} at {s.start}")
                continue
            runs.setdefault(job.id, []).append((s.start, s.end))
            inside = min(s.end, job.deadline) - max(s.start, job.arrival)
            if s.start < job.arrival or s.end > job.deadline:
                violations.append(f"job {job.id} executes outside [{job.arrival}, {job.deadline}) on processor {p}")
            allocated[job.id] += max(0, inside)
    for jid, spans in runs.items():
        spans.sort()
        for (a0, a1), (b0, _) in zip(spans, spans[1:]):
            if b0 < a1:
                violations.append(f"job {jid} runs on two processors at tick {b0}")
                break
    deficits = {j.id: j.exec - allocated[j.id] for j in jobs if allocated[j.id] < j.exec}
    misses = sorted(((jid, by_id[jid].deadline) for jid in deficits), key=lambda m: (m[1], m[0]))
    return FeasibilityReport(allocated, deficits, misses, violations, jobs)


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TurnOn:
    proc: int


@dataclass(frozen=True)
class TurnOff:
    proc: int


@dataclass(frozen=True)
class Assign:
    proc: int
    job: int


@dataclass(frozen=True)
class Idle:
    proc: int


Command = TurnOn | TurnOff | Assign | Idle


@dataclass
class TickView:
    """What a policy sees at the start of tick ``t``."""

    t: int
    arrivals: list[Job]
    pending: dict[int, JobRuntime]
    missed: list[int]
    params: EnergyParams


class Policy(Protocol):
    def decide(self, view: TickView) -> list[Command]: ...


class History:
    """End-of-tick observations available to a reactive job source."""

    def __init__(self):
        self.all_off: list[bool] = []
        self.first_exec: dict[int, int] = {}

    def was_all_off(self, tick: int) -> bool:
        return 0 <= tick < len(self.all_off) and self.all_off[tick]


class JobSource(Protocol):
    def release(self, t: int, history: History) -> list[Job]: ...


class StaticSource:
    """Releases a fixed job set at the jobs' arrival ticks."""

    def __init__(self, jobs: Iterable[Job]):
        self.jobs = sorted(jobs, key=lambda j: (j.arrival, j.id))
        self._by_tick: dict[int, list[Job]] = {}
        for j in self.jobs:
            self._by_tick.setdefault(j.arrival, []).append(j)

    def release(self, t: int, history: History) -> list[Job]:
        return self._by_tick.get(t, [])

    @property
    def horizon_hint(self) -> int:
        return max((j.deadline for j in self.jobs), default=0)


def default_horizon(jobs: Iterable[Job], params: EnergyParams) -> int:
    """Long enough for every job and one full break-even of trailing standby."""
    last = max((j.deadline for j in jobs), default=0)
    return last + math.ceil(params.break_even) + 2


def simulate(
    policy: Policy,
    source,
    params: EnergyParams,
    horizon: Optional[int] = None,
) -> tuple[ScheduleTrace, FeasibilityReport]:
    """Run ``policy`` against ``source`` for ticks ``0 .. horizon-1``.

    Per tick: arrivals are delivered, the policy issues commands, each busy
    processor does one unit of work, then any job whose deadline has been
    reached with work left is recorded as a miss and dropped.
    """
    if not hasattr(source, "release"):
        source = StaticSource(source)
    if horizon is None:
        if not hasattr(source, "horizon_hint"):
            raise ValueError("horizon required for reactive sources")
        horizon = default_horizon(source.jobs, params)

    builder = TraceBuilder()
    history = History()
    pending: dict[int, JobRuntime] = {}
    released: dict[int, Job] = {}
    by_deadline: list[tuple[int, int]] = []
    on: list[bool] = []
    on_count = 0
    running: dict[int, int] = {}  # proc -> job id
    busy_last: set[int] = set()
    misses: list[tuple[int, int]] = []
    missed_last: list[int] = []

    for t in range(horizon):
        arrivals = list(source.release(t, history))
        for job in arrivals:
            if job.id in released:
                raise ProtocolViolation(f"job id {job.id} released twice")
            if job.arrival != t:
                raise ProtocolViolation(f"job {job.id} released at {t} but arrives at {job.arrival}")
            released[job.id] = job
            pending[job.id] = JobRuntime.fresh(job)
            heapq.heappush(by_deadline, (job.deadline, job.id))

        view = TickView(t, arrivals, pending, missed_last, params)
        commands = policy.decide(view) or []
        powered: set[int] = set()
        for cmd in commands:
            p = cmd.proc
            if p < 0:
                raise ProtocolViolation(f"negative processor index in {cmd}")
            while len(on) <= p:
                on.append(False)
            if isinstance(cmd, TurnOn):
                if on[p] or p in powered:
                    raise ProtocolViolation(f"tick {t}: TurnOn on processor {p} which is already on")
                on[p] = True
                on_count += 1
                powered.add(p)
                builder.set(p, t, State.STANDBY)
            elif isinstance(cmd, TurnOff):
                if not on[p] or p in powered:
                    raise ProtocolViolation(f"tick {t}: TurnOff on processor {p} which is off")
                on[p] = False
                on_count -= 1
                powered.add(p)
                running.pop(p, None)
                builder.set(p, t, State.OFF)
            elif isinstance(cmd, Assign):
                if not on[p]:
                    raise ProtocolViolation(f"tick {t}: Assign on processor {p} which is off")
                if cmd.job not in pending:
                    raise ProtocolViolation(f"tick {t}: job {cmd.job} is finished, missed or not yet arrived")
                running[p] = cmd.job
            elif isinstance(cmd, Idle):
                if not on[p]:
                    raise ProtocolViolation(f"tick {t}: Idle on processor {p} which is off")
                running.pop(p, None)
            else:
                raise ProtocolViolation(f"unknown command {cmd!r}")

        if len(set(running.values())) != len(running):
            raise ProtocolViolation(f"tick {t}: a job is assigned to two processors")

        for p, jid in running.items():
            builder.set(p, t, State.BUSY, jid)
        for p in busy_last.difference(running):
            if on[p]:
                builder.set(p, t, State.STANDBY)
        busy_last = set(running)
        history.all_off.append(on_count == 0)

        done = []
        for p, jid in running.items():
            rt = pending[jid]
            rt.remaining -= 1
            history.first_exec.setdefault(jid, t)
            if rt.remaining == 0:
                done.append(p)
                del pending[jid]
        for p in done:
            del running[p]

        missed_last = []
        while by_deadline and by_deadline[0][0] <= t + 1:
            d, jid = heapq.heappop(by_deadline)
            if jid in pending:
                misses.append((jid, d))
                missed_last.append(jid)
                del pending[jid]
        if missed_last:
            for p in [p for p, j in running.items() if j in missed_last]:
                del running[p]

    trace = builder.build(horizon)
    report = validate_trace(trace, released.values())
    # misses seen by the engine are authoritative; validation adds structure checks
    report.misses = sorted(set(report.misses) | set(misses), key=lambda m: (m[1], m[0]))
    return trace, report


# ---------------------------------------------------------------------------
# JSON helpers
# ---------------------------------------------------------------------------


def jobs_to_json(jobs: Iterable[Job]) -> dict:
    out = []
    for j in sorted(jobs, key=lambda j: j.id):
        d = {"id": j.id, "arrival": j.arrival, "deadline": j.deadline, "exec": j.exec}
        if j.stream is not None:
            d["stream"] = j.stream
        out.append(d)
    return {"jobs": out}


def jobs_from_json(data: dict) -> list[Job]:
    jobs = [
        Job(int(d["id"]), int(d["arrival"]), int(d["deadline"]), int(d["exec"]),
            None if d.get("stream") is None else int(d["stream"]))
        for d in data["jobs"]
    ]
    if len({j.id for j in jobs}) != len(jobs):
        raise ValueError("duplicate job ids")
    return jobs


def load_jobs(path) -> list[Job]:
    with open(path) as fh:
        return jobs_from_json(json.load(fh))


def save_jobs(jobs: Iterable[Job], path) -> None:
    with open(path, "w") as fh:
        json.dump(jobs_to_json(jobs), fh, indent=2)
