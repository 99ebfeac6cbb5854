"""Weighted-tardiness permutation flow shop scheduling with a learned construction policy."""

__version__ = "0.1.0"

from .core import (Instance, Order, Schedule, completion_matrix, normalize_features, order_completion,
                   total_weighted_tardiness, validate_instance)
from .heuristics import best_heuristic_baseline, greedy_schedule, neh_schedule, suliman_schedule

__all__ = [
    "Instance", "Order", "Schedule", "completion_matrix", "normalize_features", "order_completion",
    "total_weighted_tardiness", "validate_instance", "best_heuristic_baseline", "greedy_schedule",
    "neh_schedule", "suliman_schedule",
]
