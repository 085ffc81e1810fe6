"""Single-server queueing laboratory for comparison-based size splitting.

Submodules: ``inputs`` (laws, arrivals, random streams), ``splitter``
(comparison classes, error rate), ``engine`` (disciplines and simulation),
``metrics`` (empirical and asymptotic tails), ``oracle`` (independent exact
checks), ``config``/``suites``/``cli`` (scenario files and pinned runs).
"""

__version__ = "0.1.0"

from .engine import FBPS, FIFO, PS, SRPT, ComparisonSP, StaticPriority, simulate, simulate_trace
from .inputs import (
    INFINITE,
    BoundedPareto,
    Deterministic,
    DiscreteFinite,
    Exponential,
    Geometric,
    Pareto,
    Poisson,
    Renewal,
    RngStream,
)
from .splitter import ComparisonWindow, classify, classify_refined, classify_stream, error_rate

__all__ = [
    "FIFO",
    "PS",
    "FBPS",
    "SRPT",
    "StaticPriority",
    "ComparisonSP",
    "simulate",
    "simulate_trace",
    "INFINITE",
    "Pareto",
    "BoundedPareto",
    "Exponential",
    "Geometric",
    "DiscreteFinite",
    "Deterministic",
    "Poisson",
    "Renewal",
    "RngStream",
    "ComparisonWindow",
    "classify",
    "classify_refined",
    "classify_stream",
    "error_rate",
]
