"""Exact and metaheuristic reference solvers plus the benchmark harness.

Iterated greedy (NEH start, destroy ``r`` random tasks, reinsert each at its
best position, accept when not worse) is the long-running reference
metaheuristic. Wall times cover the solver call only, never file I/O.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import os
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Instance, Schedule
from .heuristics import HEURISTICS, best_insertion, neh_schedule

BRUTE_FORCE_CAP = 9
REPORT_HEADER = ("instance_id", "n", "solver", "objective", "ms", "seed")
SOLVERS = ("greedy", "neh", "suliman", "neural", "iterated_greedy", "brute_force")
REPORT_NOTE = ("# iterated_greedy is the metaheuristic reference solver "
               "(destroy-and-rebuild from NEH); ms is wall time of the solver call only")


class ProblemTooLarge(ValueError):
    pass


def _lexicographic_perms(n: int, chunk: int = 40320):
    it = itertools.permutations(range(n))
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        yield np.array(block, dtype=np.int64).reshape(len(block), n)


def brute_force_optimal(inst: Instance, cap: int = BRUTE_FORCE_CAP) -> Schedule:
    """Exact minimizer by enumeration; lexicographically smallest on ties."""
    if inst.n > cap:
        raise ProblemTooLarge(f"brute force refused: n={inst.n} exceeds cap {cap}")
    best_val, best_perm = math.inf, None
    for block in _lexicographic_perms(inst.n):
        vals = inst.evaluate_many(block)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_perm = float(vals[i]), block[i].copy()
    return Schedule(best_perm, best_val)


def iterated_greedy(inst: Instance, iterations: Optional[int] = None, time_budget: Optional[float] = None,
                    rng: Optional[np.random.Generator] = None, destruct: int = 4,
                    history: Optional[list] = None) -> Schedule:
    """Destroy-and-rebuild local search from the NEH sequence.

    Stops after ``iterations`` rounds or ``time_budget`` seconds, whichever
    comes first (at least one must be given). ``history``, when supplied,
    receives the best objective after every round.
    """
    if iterations is None and time_budget is None:
        raise ValueError("give an iteration or time budget")
    rng = np.random.default_rng(0) if rng is None else rng
    start = neh_schedule(inst).schedule
    cur, cur_val = start.perm, start.objective
    best, best_val = cur, cur_val
    n = inst.n
    r = min(destruct, n)
    t0 = time.perf_counter()
    it = 0
    while n > 1 and r > 0:
        if iterations is not None and it >= iterations:
            break
        if time_budget is not None and time.perf_counter() - t0 >= time_budget:
            break
        it += 1
        pos = rng.choice(n, size=r, replace=False)
        removed = cur[pos]
        seq = np.delete(cur, pos)
        val = inst.evaluate(seq)
        for task in removed:
            seq, val, _ = best_insertion(inst, seq, task)
        if val <= cur_val:
            cur, cur_val = seq, val
            if val < best_val:
                best, best_val = seq, val
        if history is not None:
            history.append(best_val)
    return Schedule(best.copy(), best_val)


@dataclass
class BenchRow:
    instance_id: str
    n: int
    solver: str
    objective: float
    ms: float
    seed: int
    perm: np.ndarray = field(repr=False, default=None)


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(REPORT_NOTE + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in self.rows:
            w.writerow([r.instance_id, r.n, r.solver, f"{r.objective:.6f}", f"{r.ms:.6f}", r.seed])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        tmp = f"{path}.partial"
        with open(tmp, "w", newline="") as fh:
            fh.write(self.to_csv())
        os.replace(tmp, path)

    def means(self) -> dict[str, float]:
        out: dict[str, list] = {}
        for r in self.rows:
            out.setdefault(r.solver, []).append(r.objective)
        return {k: float(np.mean(v)) for k, v in out.items()}


def read_bench_csv(path) -> list[dict]:
    with open(path) as fh:
        return list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))


def make_solver(name: str, checkpoint: Optional[str] = None, ig_iterations: Optional[int] = None,
                ig_seconds: Optional[float] = None, bf_cap: int = BRUTE_FORCE_CAP, destruct: int = 4):
    """A callable ``solve(inst, rng) -> perm`` for a solver name."""
    if name in HEURISTICS:
        fn = HEURISTICS[name]
        return lambda inst, rng: fn(inst).perm
    if name == "neural":
        if not checkpoint:
            raise ValueError("the neural solver needs a checkpoint")
        from .checkpoint import load_policy
        from .neural import greedy_schedule

        params, _ = load_policy(checkpoint)
        return lambda inst, rng: greedy_schedule(params, inst)
    if name == "iterated_greedy":
        if ig_iterations is None and ig_seconds is None:
            ig_iterations = 1000
        return lambda inst, rng: iterated_greedy(inst, ig_iterations, ig_seconds, rng, destruct).perm
    if name == "brute_force":
        return lambda inst, rng: brute_force_optimal(inst, bf_cap).perm
    raise ValueError(f"unknown solver {name!r}; choose from {', '.join(SOLVERS)}")


def run_bench(instances: Sequence[Instance], solvers: Sequence[str], output_path=None,
              checkpoint: Optional[str] = None, ig_iterations: Optional[int] = None,
              ig_seconds: Optional[float] = None, seed: int = 0, bf_cap: int = BRUTE_FORCE_CAP) -> BenchReport:
    """Run every solver on every instance and optionally write the CSV report.

    Solver construction (including checkpoint loading) happens before any
    instance is touched, so configuration errors leave no partial output.
    """
    built = [(s, make_solver(s, checkpoint, ig_iterations, ig_seconds, bf_cap)) for s in solvers]
    report = BenchReport()
    for idx, inst in enumerate(instances):
        iid = inst.name or f"inst{idx:04d}"
        for name, solve in built:
            rng = np.random.default_rng([seed, idx])
            t0 = time.perf_counter()
            perm = solve(inst, rng)
            ms = (time.perf_counter() - t0) * 1e3
            report.rows.append(BenchRow(iid, inst.n, name, inst.evaluate(perm), ms, seed, np.asarray(perm)))
    if output_path is not None:
        report.write_csv(output_path)
    return report
