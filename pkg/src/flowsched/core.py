"""Problem data model and the total weighted tardiness objective."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from . import kernels

WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class Order:
    """A customer order: deadline and weight shared by its tasks."""

    id: str
    deadline: float
    weight: float
    tasks: tuple[int, ...]


@dataclass(eq=False)
class Instance:
    """An m-machine permutation flow shop with tasks grouped into orders.

    ``proc[i, j]`` is the processing time of task ``j`` on machine ``i`` (hours).
    ``ready[i]`` is the earliest time machine ``i`` can start new work.
    Tasks are indexed from 0.
    """

    proc: np.ndarray
    orders: list[Order]
    ready: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        self.proc = np.array(self.proc, dtype=np.float64, ndmin=2)
        if self.proc.ndim != 2:
            raise ValueError("proc must be an m x n matrix")
        if self.ready is None:
            self.ready = np.zeros(self.proc.shape[0])
        else:
            self.ready = np.array(self.ready, dtype=np.float64).reshape(-1)
        if self.ready.shape[0] != self.proc.shape[0]:
            raise ValueError(f"ready has {self.ready.shape[0]} entries for {self.proc.shape[0]} machines")
        self.orders = [o if isinstance(o, Order) else Order(*o) for o in self.orders]
        self.orders = [Order(str(o.id), float(o.deadline), float(o.weight), tuple(int(t) for t in o.tasks))
                       for o in self.orders]

    @property
    def m(self) -> int:
        return self.proc.shape[0]

    @property
    def n(self) -> int:
        return self.proc.shape[1]

    @property
    def K(self) -> int:
        return len(self.orders)

    @cached_property
    def task_order(self) -> np.ndarray:
        """Order index of every task (-1 for a task no order claims)."""
        out = np.full(self.n, -1, dtype=np.int64)
        for k, o in enumerate(self.orders):
            for t in o.tasks:
                if 0 <= t < self.n:
                    out[t] = k
        return out

    @cached_property
    def deadlines(self) -> np.ndarray:
        return np.array([o.deadline for o in self.orders], dtype=np.float64)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([o.weight for o in self.orders], dtype=np.float64)

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (self.proc.shape == other.proc.shape
                and np.array_equal(self.proc, other.proc)
                and np.array_equal(self.ready, other.ready)
                and self.orders == other.orders)

    def evaluate_many(self, perms) -> np.ndarray:
        """Objective of each row of a 2-D array of (possibly partial) sequences."""
        return kernels.twt_batch(perms, self.proc, self.task_order, self.deadlines, self.weights, self.ready)

    def evaluate(self, seq) -> float:
        """Objective of one (possibly partial) sequence, without validation."""
        return float(self.evaluate_many(np.asarray(seq, dtype=np.int64)[None, :])[0])


@dataclass
class Schedule:
    perm: np.ndarray
    objective: Optional[float] = None

    def __post_init__(self):
        self.perm = np.asarray(self.perm, dtype=np.int64)


def check_permutation(inst: Instance, perm) -> np.ndarray:
    perm = np.asarray(perm)
    if perm.ndim != 1 or perm.shape[0] != inst.n:
        raise ValueError(f"permutation has length {perm.size}, instance has {inst.n} tasks")
    if not np.issubdtype(perm.dtype, np.integer):
        if not np.all(perm == np.round(perm)):
            raise ValueError("permutation entries must be integers")
    perm = perm.astype(np.int64)
    if not np.array_equal(np.sort(perm), np.arange(inst.n)):
        raise ValueError("not a permutation of the task indices")
    return perm


def completion_matrix(inst: Instance, perm) -> np.ndarray:
    """m x n completion times; column ``j`` belongs to the ``j``-th scheduled task.

    Machine ``i`` never starts before ``inst.ready[i]``.
    """
    perm = check_permutation(inst, perm)
    return kernels.completion(perm, inst.proc, inst.ready)


def order_completion(inst: Instance, perm, C: Optional[np.ndarray] = None) -> dict[str, float]:
    """Completion time of each order: its last task's finish on the last machine."""
    perm = check_permutation(inst, perm)
    if C is None:
        C = completion_matrix(inst, perm)
    last = np.empty(inst.n)
    last[perm] = C[-1]
    out = {}
    for o in inst.orders:
        if not o.tasks:
            raise RuntimeError(f"order {o.id} has no scheduled task")
        out[o.id] = float(max(last[t] for t in o.tasks))
    return out


def total_weighted_tardiness(inst: Instance, perm) -> float:
    perm = check_permutation(inst, perm)
    if np.any(inst.task_order < 0):
        raise ValueError("instance has tasks outside every order")
    return inst.evaluate(perm)


def order_tardiness(inst: Instance, perm) -> list[tuple[Order, float, float]]:
    """``(order, completion, tardiness)`` for every order."""
    T = order_completion(inst, perm)
    return [(o, T[o.id], max(T[o.id] - o.deadline, 0.0)) for o in inst.orders]


def _minmax(x: np.ndarray) -> np.ndarray:
    lo, hi = x.min(), x.max()
    if hi <= lo:
        return np.full(x.shape, 0.5)
    return (x - lo) / (hi - lo)


def normalize_features(inst: Instance) -> np.ndarray:
    """n x (m+2) matrix: processing times, order deadline, order weight, each in [0, 1].

    Processing times share one min-max range over the whole matrix; deadlines
    and weights are scaled over the orders. A constant family maps to 0.5.
    """
    k = inst.task_order
    feats = np.empty((inst.n, inst.m + 2))
    feats[:, :inst.m] = _minmax(inst.proc).T
    feats[:, inst.m] = _minmax(inst.deadlines)[k]
    feats[:, inst.m + 1] = _minmax(inst.weights)[k]
    return feats


def validate_instance(inst: Instance) -> list[str]:
    """Every invariant violation found, as readable messages. Empty means valid."""
    problems = []
    if inst.n < 1:
        problems.append("instance has no tasks")
    bad = np.argwhere(~(inst.proc > 0))
    for i, j in bad[:10]:
        problems.append(f"nonpositive processing time at machine {i}, task {j}")
    if len(bad) > 10:
        problems.append(f"... {len(bad) - 10} more nonpositive processing times")
    if np.any(inst.ready < 0) or not np.all(np.isfinite(inst.ready)):
        problems.append("negative or non-finite machine ready time")
    if not inst.orders:
        problems.append("instance has no orders")
    owner: dict[int, str] = {}
    for o in inst.orders:
        if not o.tasks:
            problems.append(f"order {o.id} has no tasks")
        if o.deadline < 0:
            problems.append(f"order {o.id} has negative deadline")
        if o.weight < 0:
            problems.append(f"order {o.id} has negative weight")
        for t in o.tasks:
            if not 0 <= t < inst.n:
                problems.append(f"order {o.id} references unknown task {t}")
            elif t in owner:
                problems.append(f"task {t} belongs to orders {owner[t]} and {o.id}")
            else:
                owner[t] = o.id
    orphans = [t for t in range(inst.n) if t not in owner]
    if orphans:
        problems.append(f"orphan tasks (no order): {orphans[:10]}")
    ids = [o.id for o in inst.orders]
    if len(set(ids)) != len(ids):
        problems.append("duplicate order ids")
    if inst.orders and abs(sum(o.weight for o in inst.orders) - 1.0) > WEIGHT_TOL:
        problems.append(f"weights not normalized (sum={sum(o.weight for o in inst.orders)!r})")
    return problems


def normalized_weights(scores: Sequence[float]) -> list[float]:
    total = float(sum(scores))
    if total <= 0:
        raise ValueError("weights must have a positive sum")
    return [float(s) / total for s in scores]
