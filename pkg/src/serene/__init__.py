"""Discrete-event simulator and algorithm library for collusion-resilient
replication-based result verification: the SERENE detect/mitigate scheme,
the SnE clustering baseline, and the experiment harness that compares them.
"""

from ._backend import USING_NUMBA
from .config import ConfigError, ScenarioConfig
from .engine import (
    DetectionEvent,
    DetectionEvidence,
    MitigationReport,
    RunTrace,
    SCHEMES,
    run,
    run_batch,
)
from .metrics import MetricRow
from .model import TaskOrigin, WorkerClass

__version__ = "0.1.0"

__all__ = [
    "USING_NUMBA",
    "ConfigError",
    "ScenarioConfig",
    "DetectionEvent",
    "DetectionEvidence",
    "MitigationReport",
    "RunTrace",
    "SCHEMES",
    "run",
    "run_batch",
    "MetricRow",
    "TaskOrigin",
    "WorkerClass",
    "__version__",
]
