"""Single-processor schedulability: the interval demand criterion and EDF."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, Optional

from .core import Job, ScheduleTrace, State, TraceBuilder


@dataclass(frozen=True)
class ConditionWitness:
    left: int
    right: int
    demand: int

    @property
    def excess(self) -> int:
        return self.demand - (self.right - self.left)

    @property
    def satisfied(self) -> bool:
        return self.excess <= 0

    def to_json(self) -> dict:
        return {
            "left": self.left,
            "right": self.right,
            "demand": self.demand,
            "verdict": "satisfied" if self.satisfied else "violated",
        }


class InfeasibleJobSet(ValueError):
    def __init__(self, witness: ConditionWitness):
        super().__init__(
            f"demand {witness.demand} in ({witness.left}, {witness.right}) exceeds its length"
        )
        self.witness = witness


def condition_edf(jobs: Iterable[Job]) -> tuple[bool, Optional[ConditionWitness]]:
    """Check that every interval's contained demand fits in the interval.

    Only intervals from an arrival to a deadline matter, since the contained
    demand is a step function of both endpoints.  Returns the verdict and the
    interval with the largest excess (``None`` for an empty set).
    """
    jobs = list(jobs)
    if not jobs:
        return True, None
    by_deadline = sorted(jobs, key=lambda j: j.deadline)
    best: Optional[ConditionWitness] = None
    for left in sorted({j.arrival for j in jobs}):
        demand = 0
        for j in by_deadline:
            if j.arrival < left:
                continue
            demand += j.exec
            w = ConditionWitness(left, j.deadline, demand)
            if best is None or w.excess > best.excess:
                best = w
    return best.satisfied, best


def edf_order_key(job: Job):
    return (job.deadline, job.id)


def edf_schedule(jobs: Iterable[Job]) -> ScheduleTrace:
    """Work-conserving single-processor EDF, on for the whole busy hull.

    The processor wakes at the first arrival and stays on (idling in standby
    across gaps) until the last completion.  Ties go to the smaller id.
    """
    jobs = sorted(jobs, key=lambda j: (j.arrival, j.id))
    ok, witness = condition_edf(jobs)
    if not ok:
        raise InfeasibleJobSet(witness)
    builder = TraceBuilder(1)
    if not jobs:
        return builder.build(0)
    remaining = {j.id: j.exec for j in jobs}
    ready: list = []
    i = 0
    t = jobs[0].arrival
    builder.set(0, t, State.STANDBY)
    while i < len(jobs) or ready:
        while i < len(jobs) and jobs[i].arrival <= t:
            heapq.heappush(ready, (edf_order_key(jobs[i]), jobs[i]))
            i += 1
        if not ready:
            builder.set(0, t, State.STANDBY)
            t = jobs[i].arrival
            continue
        _, job = ready[0]
        builder.set(0, t, State.BUSY, job.id)
        remaining[job.id] -= 1
        if remaining[job.id] == 0:
            heapq.heappop(ready)
        t += 1
    builder.set(0, t, State.OFF)
    return builder.build(t)
