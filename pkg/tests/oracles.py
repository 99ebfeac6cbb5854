"""Independent reference implementations used only by the tests."""

import heapq
import itertools

import numpy as np

from flowsched.core import Instance, Order


def simulate_flow_line(proc, perm, ready=None):
    """Discrete-event simulation of a permutation flow line.

    Each machine works through the common sequence; a job may start on a
    machine when the machine is free, its ready time has passed and the job
    left the upstream machine. Returns the m x n completion matrix in
    sequence order.
    """
    proc = np.asarray(proc, dtype=float)
    m, n = proc.shape[0], len(perm)
    ready = [0.0] * m if ready is None else [float(r) for r in ready]
    nxt = [0] * m
    busy = [False] * m
    left_upstream = [set(range(n))] + [set() for _ in range(m - 1)]
    C = np.full((m, n), np.nan)
    events = []
    seq = itertools.count()
    for i in range(m):
        heapq.heappush(events, (ready[i], next(seq), "wake", i, -1))
    while events:
        now, _, kind, i, pos = heapq.heappop(events)
        if kind == "finish":
            busy[i] = False
            C[i, pos] = now
            if i + 1 < m:
                left_upstream[i + 1].add(pos)
        # anything that can start now, starts now
        for mach in range(m):
            if busy[mach] or nxt[mach] >= n or now < ready[mach]:
                continue
            p = nxt[mach]
            if p in left_upstream[mach]:
                busy[mach] = True
                nxt[mach] += 1
                heapq.heappush(events, (now + proc[mach, perm[p]], next(seq), "finish", mach, p))
    return C


def direct_objective(inst: Instance, perm) -> float:
    """Total weighted tardiness from the simulated completion times."""
    C = simulate_flow_line(inst.proc, list(perm), inst.ready)
    finish = {int(t): C[-1, pos] for pos, t in enumerate(perm)}
    total = 0.0
    for o in inst.orders:
        done = [finish[t] for t in o.tasks if t in finish]
        if done:
            total += o.weight * max(max(done) - o.deadline, 0.0)
    return total


def enumerate_optimum(inst: Instance):
    best, arg = None, None
    for p in itertools.permutations(range(inst.n)):
        v = direct_objective(inst, p)
        if best is None or v < best - 1e-12:
            best, arg = v, p
    return best, arg


def random_instance(rng, n, m, integer=False, max_order=3, deadline_scale=1.0):
    if integer:
        proc = rng.integers(1, 10, (m, n)).astype(float)
    else:
        proc = rng.uniform(0.1, 5.0, (m, n))
    orders = []
    t = 0
    k = 0
    while t < n:
        s = min(int(rng.integers(1, max_order + 1)), n - t)
        orders.append((t, s))
        t += s
        k += 1
    scores = rng.integers(1, 11, k)
    w = scores / scores.sum()
    total = proc.sum()
    ords = [Order(f"O{i}", float(rng.uniform(0, total * deadline_scale / 2)), float(w[i]), tuple(range(a, a + s)))
            for i, (a, s) in enumerate(orders)]
    return Instance(proc, ords)
