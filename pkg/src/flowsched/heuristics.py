"""Constructive baselines: weighted greedy dispatch, NEH and Suliman.

NEH and Suliman were designed for makespan; here every insertion and exchange
is scored with total weighted tardiness so the results are directly
comparable with the policy's reward. All ties go to the lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Instance, Schedule
from .kernels import insertion_candidates


@dataclass
class HeuristicResult:
    schedule: Schedule
    heuristic_name: str
    eval_count: int

    @property
    def objective(self) -> float:
        return self.schedule.objective

    @property
    def perm(self) -> np.ndarray:
        return self.schedule.perm


def _result(inst, perm, name, evals):
    perm = np.asarray(perm, dtype=np.int64)
    return HeuristicResult(Schedule(perm, inst.evaluate(perm)), name, evals + 1)


def descending_total_order(inst: Instance) -> np.ndarray:
    """Tasks by decreasing total processing time, stable on index."""
    return np.argsort(-inst.proc.sum(axis=0), kind="stable")


def greedy_schedule(inst: Instance) -> HeuristicResult:
    """Sort by ``w_k / sum_i t_ij``, highest first."""
    prio = inst.weights[inst.task_order] / inst.proc.sum(axis=0)
    perm = np.argsort(-prio, kind="stable")
    return _result(inst, perm, "greedy", 0)


def best_insertion(inst: Instance, seq, task) -> tuple[np.ndarray, float, int]:
    """Insert ``task`` at the position of ``seq`` minimizing the partial objective.

    Returns the new sequence, its objective and the number of evaluations.
    """
    cands = insertion_candidates(seq, task)
    vals = inst.evaluate_many(cands)
    p = int(np.argmin(vals))
    return cands[p], float(vals[p]), len(cands)


def neh_schedule(inst: Instance) -> HeuristicResult:
    order = descending_total_order(inst)
    seq = order[:1]
    evals = 0
    for task in order[1:]:
        seq, _, e = best_insertion(inst, seq, task)
        evals += e
    return _result(inst, seq, "neh", evals)


def suliman_schedule(inst: Instance) -> HeuristicResult:
    """Two phases: descending-total seed, then directed pairwise exchange.

    Phase 2 scans pairs of positions ``a < b`` and swaps them when that strictly
    lowers the objective. Swapping moves the task at ``b`` forward and the task
    at ``a`` backward; a task that has once moved forward may never move
    backward again. Scans repeat until one finds no improving swap.
    """
    perm = descending_total_order(inst).copy()
    n = inst.n
    cur = inst.evaluate(perm)
    evals = 1
    moved_forward = np.zeros(n, dtype=bool)
    improved = True
    while improved:
        improved = False
        for a in range(n - 1):
            b0 = a + 1
            while b0 < n and not moved_forward[perm[a]]:
                bs = np.arange(b0, n)
                cands = np.repeat(perm[None, :], len(bs), axis=0)
                rows = np.arange(len(bs))
                cands[rows, a] = perm[bs]
                cands[rows, bs] = perm[a]
                vals = inst.evaluate_many(cands)
                evals += len(bs)
                better = np.flatnonzero(vals < cur)
                if better.size == 0:
                    break
                r = better[0]
                b = bs[r]
                moved_forward[perm[b]] = True
                perm = cands[r].copy()
                cur = float(vals[r])
                improved = True
                b0 = b + 1
    res = HeuristicResult(Schedule(perm, cur), "suliman", evals)
    return res


def best_heuristic_baseline(inst: Instance) -> float:
    """Better of the NEH and Suliman objectives."""
    return min(neh_schedule(inst).objective, suliman_schedule(inst).objective)


HEURISTICS = {
    "greedy": greedy_schedule,
    "neh": neh_schedule,
    "suliman": suliman_schedule,
}
