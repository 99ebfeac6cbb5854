"""Flow-shop evaluation kernels.

Every kernel exists twice: a scalar loop compiled with numba and a numpy
version vectorized over a batch of candidate sequences. Both perform the same
floating point operations in the same order, so they agree bit for bit and
heuristic tie-breaking does not depend on which path is active.

Sequences may be partial (any subset of tasks, in order). Orders with no task
in the sequence contribute zero tardiness.
"""

import numpy as np

from ._jit import USE_NUMBA, njit


def _completion_py(perm, proc, ready):
    m = proc.shape[0]
    k = perm.shape[0]
    C = np.empty((m, k))
    for j in range(k):
        t = perm[j]
        up = 0.0
        for i in range(m):
            s = ready[i]
            if j > 0 and C[i, j - 1] > s:
                s = C[i, j - 1]
            if i > 0 and up > s:
                s = up
            up = s + proc[i, t]
            C[i, j] = up
    return C


def _twt_batch_py(perms, proc, task_order, deadline, weight, ready):
    P, k = perms.shape
    m = proc.shape[0]
    K = deadline.shape[0]
    out = np.empty(P)
    col = np.empty(m)
    T = np.empty(K)
    for p in range(P):
        for i in range(m):
            col[i] = ready[i]
        for o in range(K):
            T[o] = 0.0
        for j in range(k):
            t = perms[p, j]
            up = 0.0
            for i in range(m):
                s = col[i]
                if i > 0 and up > s:
                    s = up
                up = s + proc[i, t]
                col[i] = up
            o = task_order[t]
            if up > T[o]:
                T[o] = up
        acc = 0.0
        for o in range(K):
            late = T[o] - deadline[o]
            if late > 0.0:
                acc += weight[o] * late
        out[p] = acc
    return out


completion_numba = njit(_completion_py)
twt_batch_numba = njit(_twt_batch_py)


def completion_numpy(perm, proc, ready):
    m = proc.shape[0]
    k = perm.shape[0]
    C = np.empty((m, k))
    prev = ready.copy()
    for j in range(k):
        pt = proc[:, perm[j]]
        up = 0.0
        for i in range(m):
            s = prev[i]
            if i > 0:
                s = max(s, up)
            up = s + pt[i]
            prev[i] = up
        C[:, j] = prev
    return C


def twt_batch_numpy(perms, proc, task_order, deadline, weight, ready):
    P, k = perms.shape
    m = proc.shape[0]
    K = deadline.shape[0]
    col = np.tile(ready, (P, 1))
    T = np.zeros((P, K))
    rows = np.arange(P)
    for j in range(k):
        t = perms[:, j]
        pt = proc[:, t]
        up = col[:, 0] + pt[0]
        col[:, 0] = up
        for i in range(1, m):
            up = np.maximum(col[:, i], up) + pt[i]
            col[:, i] = up
        o = task_order[t]
        T[rows, o] = np.maximum(T[rows, o], up)
    acc = np.zeros(P)
    for o in range(K):
        acc = acc + weight[o] * np.maximum(T[:, o] - deadline[o], 0.0)
    return acc


if USE_NUMBA:
    _completion = completion_numba
    _twt_batch = twt_batch_numba
else:
    _completion = completion_numpy
    _twt_batch = twt_batch_numpy


def completion(perm, proc, ready):
    """Completion times ``C[i, j]`` of the ``j``-th sequenced task on machine ``i``."""
    return _completion(np.ascontiguousarray(perm, dtype=np.int64),
                       np.ascontiguousarray(proc, dtype=np.float64),
                       np.ascontiguousarray(ready, dtype=np.float64))


def twt_batch(perms, proc, task_order, deadline, weight, ready):
    """Total weighted tardiness of each row of ``perms`` (shape ``(P, k)``)."""
    perms = np.ascontiguousarray(perms, dtype=np.int64)
    if perms.ndim != 2:
        raise ValueError("perms must be 2-D")
    return _twt_batch(perms, proc, task_order, deadline, weight, ready)


def insertion_candidates(seq, task):
    """All ``len(seq) + 1`` sequences obtained by inserting ``task`` into ``seq``.

    Row ``p`` has the task at position ``p``.
    """
    seq = np.asarray(seq, dtype=np.int64)
    k = seq.shape[0]
    out = np.empty((k + 1, k + 1), dtype=np.int64)
    idx = np.arange(k + 1)
    # row p: seq[:p], task, seq[p:]
    src = idx[None, :] - (idx[None, :] > idx[:, None])
    out[:] = seq[np.clip(src, 0, max(k - 1, 0))] if k else 0
    out[idx, idx] = task
    return out
