"""Workload generation and ratio campaigns."""

from __future__ import annotations

import csv
import dataclasses
import io
import os
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .core import (
    EnergyParams,
    Job,
    ScheduleTrace,
    default_horizon,
    energy_of_trace,
    simulate,
    trace_from_schedule,
    validate_trace,
)
from .exact import LAMBDA_UNIT, Exact, Surd, fmt
from .invariants import check_anchor_policy, check_processor_budget
from .oracle import OracleLimits, opt_energy_exact, opt_lower_bound, opt_upper_bound
from .policies import competitive_bound, make_policy

SEED_ENV = "POWERSCHED_SEED"


class PackingError(ValueError):
    pass


def generate_feasible(
    n: int,
    horizon: int,
    slack: Fraction | float = 0,
    unit: bool = False,
    seed=0,
    max_exec: Optional[int] = None,
) -> tuple[list[Job], ScheduleTrace]:
    """Random job set with a built-in single-processor witness.

    Execution slots are laid out back to back with random gaps, then each
    window is widened on both sides by up to ``slack * horizon`` ticks.
    """
    if n < 1:
        raise ValueError("need at least one job")
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    if max_exec is None:
        max_exec = max(1, horizon // (2 * n))
    sizes = [1 if unit else rng.randint(1, max_exec) for _ in range(n)]
    free = horizon - sum(sizes)
    if free < 0:
        raise PackingError(f"{sum(sizes)} ticks of work do not fit in horizon {horizon}")
    # stars and bars: n cuts among free + n positions give n + 1 gaps
    cuts = sorted(rng.sample(range(free + n), n))
    gaps = [cuts[0]] + [cuts[i] - cuts[i - 1] - 1 for i in range(1, n)]
    widen = int(Fraction(slack) * horizon)
    jobs, slots, t = [], {}, 0
    for i, (gap, c) in enumerate(zip(gaps, sizes), start=1):
        t += gap
        a = max(0, t - rng.randint(0, widen))
        d = min(horizon, t + c + rng.randint(0, widen))
        jobs.append(Job(i, a, d, c))
        slots.update({(0, s): i for s in range(t, t + c)})
        t += c
    periods = sorted({(s, s + 1) for (_, s) in slots})
    witness = trace_from_schedule(horizon, [_coalesce(periods)], slots)
    return jobs, witness


def _coalesce(periods):
    out = []
    for lo, hi in periods:
        if out and out[-1][1] == lo:
            out[-1] = (out[-1][0], hi)
        else:
            out.append((lo, hi))
    return out


def assign_streams(jobs: Sequence[Job], k: int, rng: random.Random) -> list[Job]:
    return [dataclasses.replace(j, stream=rng.randrange(k)) for j in jobs]


def independent_streams(k: int, n: int, horizon: int, slack, unit: bool, rng: random.Random) -> list[Job]:
    """``k`` separately feasible streams with disjoint ids."""
    out = []
    for s in range(k):
        jobs, _ = generate_feasible(n, horizon, slack, unit, rng)
        out += [dataclasses.replace(j, id=s * n + j.id, stream=s) for j in jobs]
    return out


# ---------------------------------------------------------------------------
# campaigns
# ---------------------------------------------------------------------------

CSV_COLUMNS = [
    "instance", "policy", "n_jobs", "ew", "psi_b", "psi_s", "break_even",
    "policy_energy", "ref_energy", "ref_mode", "ratio", "bound", "within_bound",
    "misses", "violations", "error",
]


@dataclass
class ExperimentConfig:
    policy: str = "S"
    lam: Optional[Exact] = None
    streams: int = 1
    procs: int = 2
    instances: int = 100
    n_jobs: int = 6
    horizon: int = 30
    slacks: tuple = (Fraction(0), Fraction(1, 5), Fraction(1, 2), Fraction(1))
    unit: bool = False
    max_exec: Optional[int] = None
    ew_range: tuple[int, int] = (1, 20)
    psi_b_choices: tuple = (1, 2, 3)
    psi_s: Fraction = Fraction(1)
    oracle: str = "exact"  # exact | baseline | lower_bound | none
    ms_reference: str = "union"  # union | streams
    limits: OracleLimits = field(default_factory=OracleLimits)
    seed: int = 0
    workers: int = 1
    at_time: Optional[int] = None
    keep_traces: bool = False

    def effective_seed(self) -> int:
        env = os.environ.get(SEED_ENV)
        return int(env) if env not in (None, "") else self.seed

    @property
    def lam_value(self) -> Exact:
        if self.lam is not None:
            return self.lam
        return LAMBDA_UNIT if self.policy == "Sdagger" else Fraction(1)


@dataclass
class InstanceResult:
    instance: int
    row: dict
    jobs: list[Job]
    trace: Optional[ScheduleTrace] = None
    params: Optional[EnergyParams] = None
    violations: list[str] = field(default_factory=list)
    ratio: Optional[Fraction] = None
    bound: Optional[object] = None
    processors: int = 0


def make_instance(cfg: ExperimentConfig, i: int) -> tuple[list[Job], EnergyParams]:
    rng = random.Random(f"{cfg.effective_seed()}-{i}")
    params = EnergyParams(rng.randint(*cfg.ew_range), rng.choice(cfg.psi_b_choices), cfg.psi_s)
    n = rng.randint(1, cfg.n_jobs)
    horizon = rng.randint(max(n, cfg.horizon // 2), cfg.horizon)
    slack = rng.choice(cfg.slacks)
    if cfg.policy == "MS" and cfg.ms_reference == "streams":
        per = max(1, n // cfg.streams)
        return independent_streams(cfg.streams, per, horizon, slack, cfg.unit, rng), params
    jobs, _ = generate_feasible(n, horizon, slack, cfg.unit, rng, cfg.max_exec)
    if cfg.policy == "MS":
        jobs = assign_streams(jobs, cfg.streams, rng)
    return jobs, params


def reference_energy(jobs: list[Job], params: EnergyParams, cfg: ExperimentConfig) -> Optional[Fraction]:
    if cfg.oracle == "none":
        return None
    groups = [jobs]
    if cfg.policy == "MS" and cfg.ms_reference == "streams":
        groups = [[j for j in jobs if j.stream == s] for s in range(cfg.streams)]
    total = Fraction(0)
    for g in groups:
        if not g:
            continue
        if cfg.oracle == "exact":
            total += opt_energy_exact(g, params, cfg.limits)[0]
        elif cfg.oracle == "baseline":
            total += opt_upper_bound(g, params)[0]
        elif cfg.oracle == "lower_bound":
            total += opt_lower_bound(g, params)
        else:
            raise ValueError(f"unknown oracle mode {cfg.oracle!r}")
    return total


def bound_for(cfg: ExperimentConfig, params: EnergyParams):
    """Guaranteed factor, plus ``2/B`` when anchors are floored from an irrational point."""
    lam = cfg.lam_value
    b = competitive_bound(cfg.policy, lam, cfg.streams, cfg.procs)
    if b is None:
        return None
    if cfg.policy in ("S", "Sdagger"):
        lb = lam * params.break_even
        if isinstance(lb, Surd) or Fraction(lb).denominator != 1:
            b = b + Fraction(2) / params.break_even
    return b


def _fmt_bound(b) -> str:
    if b is None:
        return ""
    return fmt(b) if isinstance(b, Fraction) else f"{str(b)} (~{float(b):.6f})"


def run_instance(cfg: ExperimentConfig, i: int) -> InstanceResult:
    row = dict.fromkeys(CSV_COLUMNS, "")
    row.update(instance=i, policy=cfg.policy, ref_mode=cfg.oracle)
    res = InstanceResult(i, row, [])
    try:
        jobs, params = make_instance(cfg, i)
        res.jobs, res.params = jobs, params
        row.update(
            n_jobs=len(jobs), ew=fmt(params.wake_energy), psi_b=fmt(params.busy_power),
            psi_s=fmt(params.standby_power), break_even=fmt(params.break_even),
        )
        policy = make_policy(cfg.policy, params, cfg.lam, cfg.streams, cfg.procs)
        trace, report = simulate(policy, jobs, params, default_horizon(jobs, params))
        if not report.feasible or report.misses:
            raise AssertionError(f"infeasible trace: misses {report.misses}")
        violations = _violations(cfg, trace, jobs, params)
        end = cfg.at_time
        scope = jobs if end is None else [j for j in jobs if j.arrival < end]
        e_pol = energy_of_trace(trace, params, 0, end).total
        ref = reference_energy(scope, params, cfg)
        res.ratio = e_pol / ref if ref else None
        res.bound = bound_for(cfg, params)
        res.violations = violations
        res.processors = trace.max_concurrent_on()
        if cfg.keep_traces:
            res.trace = trace
        row.update(
            policy_energy=fmt(e_pol), ref_energy="" if ref is None else fmt(ref),
            ratio="" if res.ratio is None else f"{float(res.ratio):.6f}",
            bound=_fmt_bound(res.bound),
            within_bound=_within(cfg, res),
            misses=len(report.misses), violations="; ".join(violations),
        )
    except Exception as exc:  # recorded per row, the campaign goes on
        row["error"] = f"{type(exc).__name__}: {exc}"
    return res


def _within(cfg: ExperimentConfig, res: InstanceResult) -> str:
    # only an exact optimum makes the ratio comparable with the factor
    if cfg.oracle != "exact" or res.bound is None or res.ratio is None:
        return ""
    return str(res.ratio <= res.bound).lower()


def _violations(cfg, trace, jobs, params) -> list[str]:
    if cfg.policy in ("S", "Sdagger"):
        return check_anchor_policy(trace, jobs, cfg.lam_value, params, unit=cfg.policy == "Sdagger")
    if cfg.policy == "MS":
        return check_processor_budget(trace, cfg.procs)
    return []


def run_ratio_experiment(cfg: ExperimentConfig) -> list[InstanceResult]:
    ids = range(cfg.instances)
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(lambda i: run_instance(cfg, i), ids))
    else:
        results = [run_instance(cfg, i) for i in ids]
    return sorted(results, key=lambda r: r.instance)


def rows_to_csv(results: Sequence[InstanceResult]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in results:
        w.writerow(r.row)
    return buf.getvalue()


def write_csv(results: Sequence[InstanceResult], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(results))


def check_witness(jobs: Sequence[Job], witness: ScheduleTrace) -> bool:
    return validate_trace(witness, jobs).feasible
