"""Synthetic problems, replicated experiments, bound verification and the CLI."""

from .config import HarnessConfig, UsageError
from .experiments import ExperimentResult, RateStudyResult, build_instance, rate_study, run_experiment
from .problems import ProblemInstance, generate
from .verify import VerifyReport, verify_bounds

__all__ = [
    "ExperimentResult",
    "HarnessConfig",
    "ProblemInstance",
    "RateStudyResult",
    "UsageError",
    "VerifyReport",
    "build_instance",
    "generate",
    "rate_study",
    "run_experiment",
    "verify_bounds",
]
