"""Discrete-time lab for online power-down scheduling with hard deadlines."""

from .core import (
    EnergyBreakdown,
    EnergyParams,
    Job,
    JobRuntime,
    ScheduleTrace,
    State,
    awaken_intervals,
    break_even,
    energy_of_trace,
    simulate,
    validate_trace,
)
from .exact import LAMBDA_MIN, LAMBDA_UNIT, Surd
from .feasibility import condition_edf, edf_schedule
from .oracle import OracleLimits, opt_energy_exact, opt_lower_bound
from .policies import anchor, policy_L, policy_MS, policy_S, policy_S_dagger, urgency_check

__all__ = [
    "EnergyBreakdown", "EnergyParams", "Job", "JobRuntime", "ScheduleTrace", "State",
    "awaken_intervals", "break_even", "energy_of_trace", "simulate", "validate_trace",
    "LAMBDA_MIN", "LAMBDA_UNIT", "Surd", "condition_edf", "edf_schedule",
    "OracleLimits", "opt_energy_exact", "opt_lower_bound",
    "anchor", "policy_L", "policy_MS", "policy_S", "policy_S_dagger", "urgency_check",
]
