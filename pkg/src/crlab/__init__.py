"""Agent bases, generation and reaching operators, and continual RL classification."""
from .core import (
    ActionDistribution,
    FsmAgent,
    FsmEnvironment,
    Interface,
    TableAgent,
    agents_equal,
    constant_agent,
    memoryless_agent,
    period_agent,
    realizable_histories,
)
from .crl import CrlInstance, PerformanceSpec, classify_crl, compute_value, optimal_agents
from .operators import Verdict, check_generates, check_reaches, check_sigma_generates, check_uniform_generates

__all__ = [
    "ActionDistribution", "FsmAgent", "FsmEnvironment", "Interface", "TableAgent", "agents_equal",
    "constant_agent", "memoryless_agent", "period_agent", "realizable_histories",
    "CrlInstance", "PerformanceSpec", "classify_crl", "compute_value", "optimal_agents",
    "Verdict", "check_generates", "check_reaches", "check_sigma_generates", "check_uniform_generates",
]

__version__ = "0.1.0"
