"""Deterministic simulation of asynchronous coordinate descent."""
from __future__ import annotations

from .checks import check_progress_lemmas, scv_error_bound_check
from .lower_bound import lower_bound_instance
from .schedule import Schedule, SpanModel, generate_schedule, interference_report, scc_order
from .simulate import (
    AsyncTrace,
    DelayPolicy,
    adversarial_policy,
    run_async_sim,
    scv_uniform,
    synchronous,
    uniform_random,
)

__all__ = [
    "AsyncTrace",
    "DelayPolicy",
    "Schedule",
    "SpanModel",
    "adversarial_policy",
    "check_progress_lemmas",
    "generate_schedule",
    "interference_report",
    "lower_bound_instance",
    "run_async_sim",
    "scc_order",
    "scv_error_bound_check",
    "scv_uniform",
    "synchronous",
    "uniform_random",
]
