"""Command-line entry point: ``powersched <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from fractions import Fraction

from .adversary import AdversaryParams, duel
from .core import EnergyParams, default_horizon, energy_of_trace, load_jobs, save_jobs, simulate
from .exact import fmt, parse_exact, parse_rational
from .feasibility import condition_edf
from .harness import (
    SEED_ENV,
    ExperimentConfig,
    assign_streams,
    generate_feasible,
    rows_to_csv,
    run_ratio_experiment,
)
from .invariants import check_anchor_policy, check_processor_budget
from .oracle import OracleLimits, OracleRefused, opt_energy_exact
from .policies import ConfigurationError, FeasibilityAssertion, make_policy

POLICIES = ["L", "S", "Sdagger", "MS"]


def _energy_args(p):
    p.add_argument("--ew", type=parse_rational, default=Fraction(10), help="wake-up energy")
    p.add_argument("--psi-b", type=parse_rational, default=Fraction(1), help="busy power per tick")
    p.add_argument("--psi-s", type=parse_rational, default=Fraction(1), help="standby power per tick")


def _params(args) -> EnergyParams:
    return EnergyParams(args.ew, args.psi_b, args.psi_s)


def _policy_args(p, default="S"):
    p.add_argument("--policy", choices=POLICIES, default=default)
    p.add_argument("--lambda", dest="lam", type=parse_exact, default=None,
                   help='e.g. "1", "9/10" or "4-sqrt(10)"')
    p.add_argument("--streams", type=int, default=1)
    p.add_argument("--procs", type=int, default=2)


def _seed(args) -> int:
    env = os.environ.get(SEED_ENV)
    return int(env) if env else args.seed


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def cmd_check(args) -> int:
    jobs = load_jobs(args.jobs)
    ok, witness = condition_edf(jobs)
    out = {"feasible": ok}
    if witness is not None:
        out["witness"] = witness.to_json()
    _emit(out)
    return 0 if ok else 1


def cmd_simulate(args) -> int:
    jobs = load_jobs(args.jobs)
    params = _params(args)
    policy = make_policy(args.policy, params, args.lam, args.streams, args.procs)
    horizon = args.horizon or default_horizon(jobs, params)
    try:
        trace, report = simulate(policy, jobs, params, horizon)
    except FeasibilityAssertion as exc:
        _emit({"error": str(exc)})
        return 2
    energy = energy_of_trace(trace, params)
    if args.policy in ("S", "Sdagger"):
        lam = getattr(policy, "lam")
        violations = check_anchor_policy(trace, jobs, lam, params, unit=args.policy == "Sdagger")
    elif args.policy == "MS":
        violations = check_processor_budget(trace, args.procs)
    else:
        violations = []
    if args.trace_out:
        with open(args.trace_out, "w") as fh:
            json.dump(trace.to_json(), fh, indent=2)
    if args.csv_out:
        with open(args.csv_out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["policy", "wake", "busy", "standby", "total", "processors", "misses"])
            e = energy.to_json()
            w.writerow([args.policy, e["wake"], e["busy"], e["standby"], e["total"],
                        trace.max_concurrent_on(), len(report.misses)])
    _emit({
        "policy": args.policy,
        "energy": energy.to_json(),
        "processors": trace.max_concurrent_on(),
        "feasibility": report.to_json(),
        "violations": violations,
    })
    return 0 if report.feasible and not report.misses else 1


def cmd_adversary(args) -> int:
    P = AdversaryParams(args.k, args.x, args.eta, args.chi)
    policy = make_policy(args.policy, P.energy, args.lam, args.streams, args.procs)
    result = duel(policy, P, args.policy)
    _emit(result.to_json())
    return 0


def cmd_opt(args) -> int:
    jobs = load_jobs(args.jobs)
    try:
        energy, trace = opt_energy_exact(jobs, _params(args), OracleLimits(args.max_jobs, args.max_horizon))
    except OracleRefused as exc:
        _emit({"error": str(exc)})
        return 2
    _emit({"energy": fmt(energy), "trace": trace.to_json()})
    return 0


def cmd_generate(args) -> int:
    import random

    seed = _seed(args)
    rng = random.Random(seed)
    jobs, _ = generate_feasible(args.n, args.horizon, parse_rational(args.slack), args.unit, rng, args.max_exec)
    if args.streams > 1:
        jobs = assign_streams(jobs, args.streams, rng)
    if args.out:
        save_jobs(jobs, args.out)
    else:
        from .core import jobs_to_json

        _emit(jobs_to_json(jobs))
    return 0


def cmd_ratio(args) -> int:
    cfg = ExperimentConfig(
        policy=args.policy, lam=args.lam, streams=args.streams, procs=args.procs,
        instances=args.instances, n_jobs=args.n_jobs, horizon=args.horizon,
        unit=args.unit, oracle=args.oracle, seed=_seed(args), workers=args.workers,
        ew_range=(1, args.ew_max), at_time=args.at_time, ms_reference=args.ms_reference,
        limits=OracleLimits(args.max_jobs, args.max_horizon),
    )
    results = run_ratio_experiment(cfg)
    text = rows_to_csv(results)
    if args.csv_out:
        with open(args.csv_out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    bad = [r for r in results if r.row["error"] or r.violations or r.row["within_bound"] == "false"]
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="powersched", description="Online power-down scheduling lab")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="single-processor demand criterion")
    p.add_argument("--jobs", required=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", help="run a policy on a job file")
    _policy_args(p)
    p.add_argument("--jobs", required=True)
    _energy_args(p)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--trace-out")
    p.add_argument("--csv-out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("adversary", help="duel a policy against the lower-bound adversary")
    _policy_args(p)
    p.add_argument("--k", type=int, default=10_000)
    p.add_argument("--x", type=parse_rational, default=Fraction("0.1218"))
    p.add_argument("--eta", type=parse_rational, default=Fraction("0.2206"))
    p.add_argument("--chi", type=parse_rational, default=Fraction("0.4852"))
    p.set_defaults(func=cmd_adversary)

    p = sub.add_parser("opt", help="exact offline single-processor optimum")
    p.add_argument("--jobs", required=True)
    _energy_args(p)
    p.add_argument("--max-jobs", type=int, default=8)
    p.add_argument("--max-horizon", type=int, default=40)
    p.set_defaults(func=cmd_opt)

    p = sub.add_parser("generate", help="random job set with a feasibility witness")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--slack", default="0")
    p.add_argument("--unit", action="store_true")
    p.add_argument("--max-exec", type=int, default=None)
    p.add_argument("--streams", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ratio", help="competitive-ratio campaign to CSV")
    _policy_args(p)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--n-jobs", type=int, default=6)
    p.add_argument("--horizon", type=int, default=30)
    p.add_argument("--unit", action="store_true")
    p.add_argument("--oracle", choices=["exact", "baseline", "lower_bound", "none"], default="exact")
    p.add_argument("--ms-reference", choices=["union", "streams"], default="union")
    p.add_argument("--ew-max", type=int, default=20)
    p.add_argument("--max-jobs", type=int, default=8)
    p.add_argument("--max-horizon", type=int, default=40)
    p.add_argument("--at-time", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--csv-out")
    p.set_defaults(func=cmd_ratio)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, ValueError, OSError) as exc:
        print(f"powersched: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
