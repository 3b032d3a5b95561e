"""
Experiment harness: configuration, built-in problems, runs and reports.
"""
from .config import ExperimentConfig, load_config, parse_config
from .experiment import (
    AuditResult,
    OrderEstimate,
    audit_tolerance_separation,
    estimate_order,
    measure_error,
    reference,
    restrict,
    run_experiment,
)
from .registry import PROBLEMS, get_problem, list_problems
from .report import ConvergenceReport, ConvergenceRow, render, to_frame, write_csv
from .settings import Settings, get_settings

__all__ = [
    'ExperimentConfig',
    'load_config',
    'parse_config',
    'AuditResult',
    'OrderEstimate',
    'audit_tolerance_separation',
    'estimate_order',
    'measure_error',
    'reference',
    'restrict',
    'run_experiment',
    'PROBLEMS',
    'get_problem',
    'list_problems',
    'ConvergenceReport',
    'ConvergenceRow',
    'render',
    'to_frame',
    'write_csv',
    'Settings',
    'get_settings',
]
