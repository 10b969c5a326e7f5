"""Chain protocols, their throughput closure, and a seeded simulator to compare them."""

from .closure import ClosureMode, ClosureState, tau
from .config import ExperimentConfig, InvalidConfig
from .dag import GENESIS, Block, DagStore, Transaction
from .engine import simulate, simulate_pair
from .metrics import (
    abandoned_blocks,
    compare_paired,
    latency_of,
    throughput_of,
)
from .properties import check_properties
from .trace import ExecutionTrace

__all__ = [
    "GENESIS", "Block", "ClosureMode", "ClosureState", "DagStore", "ExecutionTrace",
    "ExperimentConfig", "InvalidConfig", "Transaction", "abandoned_blocks",
    "check_properties", "compare_paired", "latency_of", "simulate", "simulate_pair",
    "tau", "throughput_of",
]
