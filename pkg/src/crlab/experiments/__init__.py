"""Simulation-only learners and the Monte Carlo harness."""
from .montecarlo import Estimate, simulate_value
from .qlearning import (
    BACKEND,
    RNG_NAME,
    Comparison,
    QLearnerConfig,
    RunStats,
    compare_variants,
    late_window,
    run_q_learning,
    single_run,
    suite_arrays,
    write_csv,
    write_manifest,
)

__all__ = [
    "BACKEND", "RNG_NAME", "Comparison", "Estimate", "QLearnerConfig", "RunStats", "compare_variants",
    "late_window", "run_q_learning", "simulate_value", "single_run", "suite_arrays", "write_csv", "write_manifest",
]
