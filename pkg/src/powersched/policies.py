"""Online power-down policies behind the engine's per-tick command contract.

* :class:`ProcrastinatingPolicy` (L) starts every job at its latest start time
  and lets an idle processor stand by for one break-even time before
  powering off.
* :class:`AnchorPolicy` (S, and S-dagger with ``unit=True``) delays jobs until
  their energy-efficient anchor and splits work over a second processor only
  when one processor provably cannot keep up.
* :class:`MultiStreamPolicy` (MS) serves ``k`` streams with ``h > k``
  processors by sharing one procrastinating processor per subset of streams.
"""

from __future__ import annotations

import heapq
import math
from fractions import Fraction
from typing import Iterable, Optional

from .core import (
    Assign,
    EnergyParams,
    Idle,
    Job,
    JobRuntime,
    TickView,
    TurnOff,
    TurnOn,
)
from .exact import LAMBDA_UNIT, Exact


class FeasibilityAssertion(AssertionError):
    """A policy that guarantees feasibility observed a deadline miss."""


class ConfigurationError(ValueError):
    pass


def anchor(job: Job, lam: Exact, B: Exact) -> int:
    """Energy-efficient anchor ``max(a_j, floor(d_j - lam * B))``."""
    return max(job.arrival, math.floor(job.deadline - lam * B))


def _demand_points(queue: Iterable[JobRuntime], t: int):
    """Yield ``(t_dagger, W(t, t_dagger))`` at each queued deadline after ``t``."""
    items = sorted((rt.job.deadline, rt.remaining) for rt in queue)
    w = 0
    for i, (d, rem) in enumerate(items):
        w += rem
        if i + 1 < len(items) and items[i + 1][0] == d:
            continue
        if d > t:
            yield d, w


def urgency_check(queue: Iterable[JobRuntime], t: int) -> Optional[int]:
    """Smallest ``t_dagger > t`` with ``W(t, t_dagger) >= t_dagger - t``, else None."""
    for d, w in _demand_points(queue, t):
        if w >= d - t:
            return d
    return None


def overload_check(queue: Iterable[JobRuntime], t: int) -> Optional[int]:
    """Smallest ``t_dagger > t`` with ``W(t, t_dagger) > t_dagger - t``, else None.

    Strict overload means one processor cannot finish the queued work in time.
    """
    for d, w in _demand_points(queue, t):
        if w > d - t:
            return d
    return None


def _edf(queue: Iterable[JobRuntime]) -> list[JobRuntime]:
    return sorted(queue, key=lambda rt: (rt.job.deadline, rt.job.id))


# ---------------------------------------------------------------------------
# L: procrastinate to the latest start, ski-rental standby
# ---------------------------------------------------------------------------


class ProcrastinatingPolicy:
    """Start each job when its slack reaches zero; idle processors stand by
    for ``ceil(B)`` ticks and then power off.

    Every zero-slack job gets its own processor, so the processor count is
    unbounded.  Bookkeeping is heap based because adversarial inputs release
    thousands of jobs with a common deadline.
    """

    name = "L"

    def __init__(self, params: EnergyParams):
        self.timeout = math.ceil(params.break_even)
        self._waiting: list[tuple[int, int, int]] = []
        self.running: dict[int, int] = {}
        self._idle: list[int] = []
        self._idle_since: dict[int, int] = {}
        self._expiry: list[tuple[int, int, int]] = []
        self._off: list[int] = []
        self._next_proc = 0
        self.processors_used = 0

    def _mark_idle(self, p: int, t: int) -> None:
        self._idle_since[p] = t
        heapq.heappush(self._idle, p)
        heapq.heappush(self._expiry, (t + self.timeout, p, t))

    def _claim(self, t: int, cmds: list) -> int:
        while self._idle:
            p = heapq.heappop(self._idle)
            if p in self._idle_since:
                del self._idle_since[p]
                return p
        if self._off:
            p = heapq.heappop(self._off)
        else:
            p = self._next_proc
            self._next_proc += 1
            self.processors_used = self._next_proc
        cmds.append(TurnOn(p))
        return p

    def decide(self, view: TickView) -> list:
        t, pending = view.t, view.pending
        cmds: list = []
        for p, jid in list(self.running.items()):
            if jid not in pending:
                del self.running[p]
                self._mark_idle(p, t)
        for job in view.arrivals:
            heapq.heappush(self._waiting, (job.latest_start, job.deadline, job.id))
        while self._waiting and self._waiting[0][0] <= t:
            _, _, jid = heapq.heappop(self._waiting)
            if jid not in pending:
                continue
            p = self._claim(t, cmds)
            self.running[p] = jid
            cmds.append(Assign(p, jid))
        while self._expiry and self._expiry[0][0] <= t:
            _, p, since = heapq.heappop(self._expiry)
            if self._idle_since.get(p) == since:
                del self._idle_since[p]
                heapq.heappush(self._off, p)
                cmds.append(TurnOff(p))
        return cmds


def policy_L(params: EnergyParams) -> ProcrastinatingPolicy:
    return ProcrastinatingPolicy(params)


# ---------------------------------------------------------------------------
# S and S-dagger
# ---------------------------------------------------------------------------


class AnchorPolicy:
    """Two-processor anchor policy for one stream satisfying the demand criterion.

    Per tick, in order:

    1. leave urgency (turn off M1) once every job that arrived before the
       urgency start has finished;
    2. if the system is off, wake M1 when some queued job's anchor is met or
       the queue has zero slack;
    3. if not in urgency and the queue is strictly overloaded, wake M2 and
       enter urgency: older jobs stay on M1, jobs from the urgency start on
       go to M2;
    4. run EDF on the processors that are on;
    5. outside urgency, power off once the queue is empty and at least ``B``
       ticks have passed since the awaken interval began.

    With ``unit=True`` (S-dagger) M2 helps with the older jobs whenever it has
    nothing of its own, so two unit jobs run side by side.
    """

    def __init__(self, params: EnergyParams, lam: Exact = Fraction(1), *, unit: bool = False, strict: bool = True):
        if not 0 <= lam <= 1:
            raise ConfigurationError("lambda must lie in [0, 1]")
        self.params = params
        self.B = params.break_even
        self.lam = lam
        self.unit = unit
        self.strict = strict
        self.name = "Sdagger" if unit else "S"
        self.anchors: dict[int, int] = {}
        self.urgent = False
        self.t_star: Optional[int] = None
        self.interval_start: Optional[int] = None
        self.m1: Optional[int] = None
        self.m2: Optional[int] = None
        self.events: list[tuple[int, str]] = []

    @property
    def system_off(self) -> bool:
        return self.m1 is None

    def decide(self, view: TickView) -> list:
        if view.missed and self.strict:
            raise FeasibilityAssertion(f"tick {view.t}: deadline miss for jobs {view.missed}")
        return self.step(view.t, view.pending, view.arrivals)

    def step(self, t: int, pending: dict[int, JobRuntime], arrivals: Iterable[Job]) -> list:
        for job in arrivals:
            if self.unit and job.exec != 1:
                raise ConfigurationError(f"job {job.id} is not a unit job")
            self.anchors[job.id] = anchor(job, self.lam, self.B)
        queue = list(pending.values())
        cmds: list = []
        exited = False

        if self.urgent and not any(rt.job.arrival < self.t_star for rt in queue):
            cmds.append(TurnOff(self.m1))
            self.events.append((t, "urgency-exit"))
            self.m1, self.m2 = self.m2, None
            self.urgent = False
            self.t_star = None
            exited = True

        if self.system_off and queue:
            anchor_met = any(t >= self.anchors[rt.id] for rt in queue)
            if anchor_met or urgency_check(queue, t) is not None:
                self.m1 = 0
                self.interval_start = t
                cmds.append(TurnOn(0))
                self.events.append((t, "wake" if anchor_met else "wake-zero-slack"))

        # re-entry in the exit tick only happens on inputs violating the criterion
        if not (self.urgent or exited or self.system_off) and overload_check(queue, t) is not None:
            self.m2 = 1 - self.m1
            cmds.append(TurnOn(self.m2))
            self.urgent = True
            self.t_star = t
            self.events.append((t, "urgency-enter"))

        if self.urgent:
            proc = _edf(rt for rt in queue if rt.job.arrival < self.t_star)
            forth = _edf(rt for rt in queue if rt.job.arrival >= self.t_star)
            # proc is never empty on a stream meeting the demand criterion
            cmds.append(Assign(self.m1, proc[0].id) if proc else Idle(self.m1))
            if forth:
                cmds.append(Assign(self.m2, forth[0].id))
            elif self.unit and len(proc) > 1:
                cmds.append(Assign(self.m2, proc[1].id))
            else:
                cmds.append(Idle(self.m2))
        elif not self.system_off:
            if queue:
                cmds.append(Assign(self.m1, _edf(queue)[0].id))
            elif t - self.interval_start >= self.B:
                cmds.append(TurnOff(self.m1))
                self.events.append((t, "off"))
                self.m1 = None
                self.interval_start = None
            else:
                cmds.append(Idle(self.m1))
        return cmds


def policy_S(params: EnergyParams, lam: Exact = Fraction(1)) -> AnchorPolicy:
    return AnchorPolicy(params, lam)


def policy_S_dagger(params: EnergyParams, lam: Exact = LAMBDA_UNIT) -> AnchorPolicy:
    return AnchorPolicy(params, lam, unit=True)


# ---------------------------------------------------------------------------
# MS: k streams on h > k processors
# ---------------------------------------------------------------------------


class _SharedGroup:
    """Streams sharing one procrastinating processor M0 (local index 0);
    stream ``streams[i-1]`` owns local processor ``i``."""

    def __init__(self, params: EnergyParams, streams: list[int]):
        self.B = params.break_even
        self.streams = streams
        self.local = {s: i + 1 for i, s in enumerate(streams)}
        self.queues: list[set[int]] = [set() for _ in range(len(streams) + 1)]
        self.on = [False] * (len(streams) + 1)
        self.on_since0: Optional[int] = None

    @property
    def processors(self) -> int:
        return len(self.streams) + 1

    @staticmethod
    def admits(q0: list[JobRuntime], job: Job, t: int) -> bool:
        """``W0(t, t') + c_j <= t' - t`` at every deadline ``t' >= d_j``."""
        points = sorted({job.deadline} | {rt.job.deadline for rt in q0 if rt.job.deadline >= job.deadline})
        for td in points:
            w = sum(rt.remaining for rt in q0 if rt.job.deadline <= td)
            if w + job.exec > td - t:
                return False
        return True

    def step(self, t: int, pending: dict[int, JobRuntime], arrivals: list[Job]) -> list:
        cmds: list = []
        for q in self.queues:
            q.intersection_update(pending)

        def wake(p):
            self.on[p] = True
            cmds.append(TurnOn(p))
            if p == 0:
                self.on_since0 = t

        for job in sorted(arrivals, key=lambda j: j.id):
            i = self.local[job.stream]
            if self.on[i]:
                self.queues[i].add(job.id)
            elif self.admits([pending[x] for x in self.queues[0]], job, t):
                self.queues[0].add(job.id)
            else:
                self.queues[i].add(job.id)
                wake(i)
                if not self.on[0]:
                    wake(0)

        q0 = [pending[x] for x in self.queues[0]]
        if not self.on[0] and q0:
            if any(t >= anchor(rt.job, 1, self.B) for rt in q0) or urgency_check(q0, t) is not None:
                wake(0)

        if self.on[0] and not q0 and t - self.on_since0 >= self.B:
            self.on[0] = False
            self.on_since0 = None
            cmds.append(TurnOff(0))
        for i in range(1, self.processors):
            if self.on[i] and not self.queues[i] and not self.on[0]:
                self.on[i] = False
                cmds.append(TurnOff(i))

        for p in range(self.processors):
            if not self.on[p]:
                continue
            q = [pending[x] for x in self.queues[p]]
            cmds.append(Assign(p, _edf(q)[0].id) if q else Idle(p))
        return cmds


def partition_streams(k: int, h: int) -> list[list[int]]:
    """Split streams ``0..k-1`` into ``h - k`` balanced subsets (``k < h < 2k``)."""
    g = h - k
    base, extra = divmod(k, g)
    out, s = [], 0
    for i in range(g):
        size = base + (1 if i < extra else 0)
        out.append(list(range(s, s + size)))
        s += size
    return out


class MultiStreamPolicy:
    """``k`` prescribed streams, at most ``h`` processors (``h > k``).

    With ``h >= 2k`` each stream runs its own S instance on a private pair of
    processors.  Otherwise the streams are split into ``h - k`` subsets, each
    handled by a :class:`_SharedGroup`.
    """

    name = "MS"

    def __init__(self, params: EnergyParams, streams: int, procs: int):
        if procs <= streams:
            raise ConfigurationError("MS needs more processors than streams")
        if streams < 1:
            raise ConfigurationError("MS needs at least one stream")
        self.k, self.h = streams, procs
        self.groups: list[tuple[object, list[int], int]] = []
        offset = 0
        if procs >= 2 * streams:
            for s in range(streams):
                self.groups.append((AnchorPolicy(params, Fraction(1)), [s], offset))
                offset += 2
        else:
            for subset in partition_streams(streams, procs):
                g = _SharedGroup(params, subset)
                self.groups.append((g, subset, offset))
                offset += g.processors
        self.processor_budget = offset
        self._group_of = {s: gi for gi, (_, subset, _) in enumerate(self.groups) for s in subset}

    @property
    def factor(self) -> int:
        return 4 * max(math.ceil(self.k / (self.h - self.k)), 1)

    def decide(self, view: TickView) -> list:
        if view.missed:
            raise FeasibilityAssertion(f"tick {view.t}: deadline miss for jobs {view.missed}")
        pend: list[dict] = [{} for _ in self.groups]
        arr: list[list] = [[] for _ in self.groups]
        for jid, rt in view.pending.items():
            pend[self._group_index(rt.job)][jid] = rt
        for job in view.arrivals:
            arr[self._group_index(job)].append(job)
        cmds = []
        for gi, (group, _, offset) in enumerate(self.groups):
            for c in group.step(view.t, pend[gi], arr[gi]):
                cmds.append(_shift(c, offset))
        return cmds

    def _group_index(self, job: Job) -> int:
        if job.stream is None or job.stream not in self._group_of:
            raise ConfigurationError(f"job {job.id} has no valid stream index")
        return self._group_of[job.stream]


def _shift(cmd, offset: int):
    if isinstance(cmd, Assign):
        return Assign(cmd.proc + offset, cmd.job)
    return type(cmd)(cmd.proc + offset)


def policy_MS(params: EnergyParams, streams: int, procs: int) -> MultiStreamPolicy:
    return MultiStreamPolicy(params, streams, procs)


def competitive_bound(name: str, lam: Exact = Fraction(1), streams: int = 1, procs: int = 2):
    """Guaranteed factor for a policy, or None when there is none (L)."""
    if name == "S":
        return 5 - lam
    if name == "Sdagger":
        return 4 - lam / 2
    if name == "MS":
        return 4 * max(math.ceil(streams / (procs - streams)), 1)
    return None


def make_policy(name: str, params: EnergyParams, lam: Optional[Exact] = None, streams: int = 1, procs: int = 2):
    if name == "L":
        return policy_L(params)
    if name == "S":
        return policy_S(params, Fraction(1) if lam is None else lam)
    if name in ("Sdagger", "S†", "Sdag"):
        return policy_S_dagger(params, LAMBDA_UNIT if lam is None else lam)
    if name == "MS":
        return policy_MS(params, streams, procs)
    raise ConfigurationError(f"unknown policy {name!r}")
