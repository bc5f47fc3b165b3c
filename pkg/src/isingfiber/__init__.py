"""Exact conditional tests for 2-D Ising models via sequential importance sampling."""

from .grid import (
    BinaryTable,
    ParseError,
    SuffStats,
    format_table,
    parse_table,
    t1,
    t2,
    u_prime_stat,
    u_stat,
)
from .cutlp import CellBounds, LPOutcome, LPProblem, SuspensionIndex, build_lp, cell_bounds, solve_lp
from .inference import TestReport, run_exact_test
from .models import AutologisticParams, IsingParams, gibbs_autologistic, gibbs_ising
from .oracle import FiberSummary, enumerate_fiber, exact_pvalues
from .sampler import Draw, PartialTable, SamplerConfig, replay_log_q, sample_table

__version__ = "0.1.0"

__all__ = [
    "AutologisticParams",
    "BinaryTable",
    "CellBounds",
    "Draw",
    "FiberSummary",
    "IsingParams",
    "LPOutcome",
    "LPProblem",
    "ParseError",
    "PartialTable",
    "SamplerConfig",
    "SuffStats",
    "SuspensionIndex",
    "TestReport",
    "build_lp",
    "cell_bounds",
    "enumerate_fiber",
    "exact_pvalues",
    "format_table",
    "gibbs_autologistic",
    "gibbs_ising",
    "parse_table",
    "replay_log_q",
    "run_exact_test",
    "sample_table",
    "solve_lp",
    "t1",
    "t2",
    "u_prime_stat",
    "u_stat",
]
