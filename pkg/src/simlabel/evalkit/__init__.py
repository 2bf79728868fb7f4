"""Evaluation toolkit: detection metrics, synthetic fixtures, benchmarks."""

from .benchmark import BenchmarkConfig, EvalReport, run_benchmark, write_report
from .fixtures import Fixture, FixtureSpec, synthesize_fixture
from .metrics import (
    accuracy,
    auroc,
    auroc_pairwise,
    auroc_sorted,
    calibrate_threshold,
    fpr_at_tpr,
    similarity_profile,
)

__all__ = [
    "BenchmarkConfig",
    "EvalReport",
    "Fixture",
    "FixtureSpec",
    "accuracy",
    "auroc",
    "auroc_pairwise",
    "auroc_sorted",
    "calibrate_threshold",
    "fpr_at_tpr",
    "run_benchmark",
    "similarity_profile",
    "synthesize_fixture",
    "write_report",
]
