"""Encoder-decoder scheduling policy with exact reverse-mode gradients.

The encoder is an LSTM run over the task feature rows in index order; the
mean of its hidden states summarizes the instance. At every construction
step a five-layer ReLU decoder turns ``[u1; mean; prev]`` into a query vector
(``prev`` is the encoder state of the task picked at the previous step, or a
learned start vector), and each unscheduled task is scored by the dot product
of that query with its encoder state. Already scheduled tasks get probability
zero.

All routines work on padded batches so a whole REINFORCE batch costs a few
dozen matrix products per construction step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Instance, normalize_features

GATES = ("i", "f", "o", "g")
DEFAULT_HIDDEN = 128
DEFAULT_WIDTHS = (256, 256, 128, 64, 64)


def _sigmoid(x):
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


@dataclass(eq=False)
class PolicyParams:
    n_features: int
    hidden: int
    widths: tuple[int, ...]
    arrays: dict[str, np.ndarray]

    @staticmethod
    def shapes(n_features: int, hidden: int, widths: Sequence[int]) -> dict[str, tuple[int, ...]]:
        D, H = n_features, hidden
        n1, n2, n3, n4, n5 = widths
        out = {}
        for g in GATES:
            out[f"W{g}"] = (H, D + H)
        for g in GATES:
            out[f"b{g}"] = (H,)
        out.update({
            "W1": (n1, H), "b1": (n1,),
            "W2": (n2, n1 + 2 * H), "b2": (n2,),
            "W3": (n3, n2), "b3": (n3,),
            "W4": (n4, n3), "b4": (n4,),
            "W5": (n5, n4), "b5": (n5,),
            "Wq": (H, n5), "bq": (H,),
            "start": (H,),
        })
        return out

    @classmethod
    def init(cls, n_machines: int, hidden: int = DEFAULT_HIDDEN, widths: Sequence[int] = DEFAULT_WIDTHS,
             rng: Optional[np.random.Generator] = None) -> "PolicyParams":
        """Uniform(-1/sqrt(H), 1/sqrt(H)) initialization."""
        widths = tuple(int(w) for w in widths)
        if len(widths) != 5 or min(widths) < 1:
            raise ValueError("decoder needs five positive layer widths")
        if not widths[2] >= widths[3] >= widths[4]:
            raise ValueError("widths of layers 3..5 must be non-increasing")
        rng = np.random.default_rng() if rng is None else rng
        D = n_machines + 2
        lim = 1.0 / np.sqrt(hidden)
        arrays = {k: rng.uniform(-lim, lim, s) for k, s in cls.shapes(D, hidden, widths).items()}
        return cls(D, hidden, widths, arrays)

    @property
    def n_machines(self) -> int:
        return self.n_features - 2

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.n_features, self.hidden, self.widths, {k: v.copy() for k, v in self.arrays.items()})

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.arrays.items()}

    def check(self) -> None:
        expect = self.shapes(self.n_features, self.hidden, self.widths)
        if set(expect) != set(self.arrays):
            raise ValueError("parameter set does not match the architecture")
        for k, s in expect.items():
            if self.arrays[k].shape != s:
                raise ValueError(f"{k} has shape {self.arrays[k].shape}, expected {s}")
            if not np.all(np.isfinite(self.arrays[k])):
                raise ValueError(f"{k} has non-finite entries")

    def equals(self, other: "PolicyParams") -> bool:
        return (self.n_features == other.n_features and self.hidden == other.hidden
                and self.widths == other.widths and self.arrays.keys() == other.arrays.keys()
                and all(np.array_equal(v, other.arrays[k]) for k, v in self.arrays.items()))

    def _lstm(self):
        a = self.arrays
        W = np.concatenate([a[f"W{g}"] for g in GATES])
        b = np.concatenate([a[f"b{g}"] for g in GATES])
        D = self.n_features
        return W[:, :D], W[:, D:], b

    def _w2_split(self):
        n1, H = self.widths[0], self.hidden
        W2 = self.arrays["W2"]
        return W2[:, :n1], W2[:, n1:n1 + H], W2[:, n1 + H:]


@dataclass
class DecodeTrace:
    perm: np.ndarray
    step_logps: np.ndarray

    @property
    def total_logp(self) -> float:
        return float(self.step_logps.sum())


# -- batching ---------------------------------------------------------------

def pad_features(features: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.array([f.shape[0] for f in features], dtype=np.int64)
    D = features[0].shape[1]
    X = np.zeros((len(features), int(lengths.max()), D))
    for b, f in enumerate(features):
        if f.shape[1] != D:
            raise ValueError("feature width differs within the batch")
        X[b, :f.shape[0]] = f
    return X, lengths


def _batch(instances: Sequence[Instance], params: PolicyParams):
    for inst in instances:
        if inst.m + 2 != params.n_features:
            raise ValueError(f"policy was built for {params.n_machines} machines, instance has {inst.m}")
    return pad_features([normalize_features(inst) for inst in instances])


# -- forward pieces ---------------------------------------------------------

def _encode_batch(params: PolicyParams, X: np.ndarray, lengths: np.ndarray) -> dict:
    B, N, D = X.shape
    if D != params.n_features:
        raise ValueError(f"features have width {D}, policy expects {params.n_features}")
    H = params.hidden
    Wx, Wh, b = params._lstm()
    zx = X @ Wx.T + b
    hs = np.empty((B, N, H))
    cs = np.empty((B, N, H))
    gates = np.empty((B, N, 4 * H))
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    for t in range(N):
        z = zx[:, t] + h @ Wh.T
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        o = _sigmoid(z[:, 2 * H:3 * H])
        g = np.tanh(z[:, 3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
        hs[:, t] = h
        cs[:, t] = c
        gates[:, t, :H] = i
        gates[:, t, H:2 * H] = f
        gates[:, t, 2 * H:3 * H] = o
        gates[:, t, 3 * H:] = g
    valid = np.arange(N)[None, :] < lengths[:, None]
    hbar = (hs * valid[:, :, None]).sum(axis=1) / lengths[:, None]
    return {"X": X, "lengths": lengths, "hs": hs, "cs": cs, "gates": gates, "hbar": hbar, "task_valid": valid}


def _decoder_stem(params: PolicyParams, hbar: np.ndarray):
    a = params.arrays
    W2u, W2h, _ = params._w2_split()
    a1 = hbar @ a["W1"].T + a["b1"]
    u1 = np.maximum(a1, 0.0)
    c2 = u1 @ W2u.T + hbar @ W2h.T + a["b2"]
    return a1, u1, c2


def _decoder_head(params: PolicyParams, c2, prev):
    """Query vectors from the step-invariant part ``c2`` and the previous-task state."""
    a = params.arrays
    _, _, W2p = params._w2_split()
    acts = []
    x = prev @ W2p.T + (c2 if prev.ndim == 2 else c2[:, None, :])
    for layer in (3, 4, 5):
        acts.append(x)
        u = np.maximum(x, 0.0)
        x = u @ a[f"W{layer}"].T + a[f"b{layer}"]
    acts.append(x)
    u5 = np.maximum(x, 0.0)
    q = u5 @ a["Wq"].T + a["bq"]
    return q, acts


def _masked_log_softmax(logits, avail):
    z = np.where(avail, logits, -np.inf)
    mx = z.max(axis=-1, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    s = np.exp(z - mx).sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore"):
        lse = mx + np.log(s)
    return z - lse


# -- public single-instance operations --------------------------------------

def encode(features: np.ndarray, params: PolicyParams) -> tuple[np.ndarray, np.ndarray]:
    """Encoder states ``(n, H)`` and their mean."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != params.n_features:
        raise ValueError(f"features must be n x {params.n_features}")
    enc = _encode_batch(params, features[None], np.array([features.shape[0]]))
    return enc["hs"][0], enc["hbar"][0]


def decode_step(hbar, prev_h, hs, mask, params: PolicyParams) -> np.ndarray:
    """Selection probabilities over tasks; ``mask[j]`` True excludes task ``j``."""
    mask = np.asarray(mask, dtype=bool)
    if mask.all():
        raise ValueError("every task is masked")
    _, _, c2 = _decoder_stem(params, np.asarray(hbar)[None])
    q, _ = _decoder_head(params, c2, np.asarray(prev_h)[None])
    logits = hs @ q[0]
    logp = _masked_log_softmax(logits, ~mask)
    p = np.exp(logp)
    p[mask] = 0.0
    return p


def rollout(params: PolicyParams, instances: Sequence[Instance], mode: str = "greedy",
            rng: Optional[np.random.Generator] = None) -> list[DecodeTrace]:
    """Construct one schedule per instance, all instances stepped together.

    ``mode="sample"`` draws each step from the policy (inverse-CDF on one
    uniform per instance per step); ``mode="greedy"`` takes the most probable
    task, lowest index on ties.
    """
    if mode not in ("sample", "greedy"):
        raise ValueError(f"unknown decode mode {mode!r}")
    if mode == "sample" and rng is None:
        raise ValueError("sampling needs an rng")
    X, lengths = _batch(instances, params)
    enc = _encode_batch(params, X, lengths)
    hs = enc["hs"]
    _, _, c2 = _decoder_stem(params, enc["hbar"])
    B, N, H = hs.shape
    rows = np.arange(B)
    avail = enc["task_valid"].copy()
    perms = np.zeros((B, N), dtype=np.int64)
    logps = np.zeros((B, N))
    prev = np.broadcast_to(params.arrays["start"], (B, H))
    for t in range(N):
        active = t < lengths
        q, _ = _decoder_head(params, c2, prev)
        logits = np.matmul(hs, q[:, :, None])[:, :, 0]
        step_avail = avail | ~active[:, None]
        logp = _masked_log_softmax(logits, step_avail)
        if mode == "greedy":
            choice = np.argmax(logp, axis=1)
        else:
            u = rng.random(B)
            cum = np.cumsum(np.exp(logp), axis=1)
            hit = cum > u[:, None]
            choice = np.argmax(hit, axis=1)
            # rounding can leave the total just below u
            miss = ~hit.any(axis=1)
            if miss.any():
                last = N - 1 - np.argmax(step_avail[:, ::-1], axis=1)
                choice[miss] = last[miss]
        choice = np.where(active, choice, 0)
        perms[:, t] = choice
        logps[:, t] = np.where(active, logp[rows, choice], 0.0)
        avail[rows[active], choice[active]] = False
        prev = hs[rows, choice]
    return [DecodeTrace(perms[b, :lengths[b]].copy(), logps[b, :lengths[b]].copy()) for b in range(B)]


def sample_schedule(inst: Instance, params: PolicyParams, mode: str = "greedy",
                    rng: Optional[np.random.Generator] = None) -> DecodeTrace:
    return rollout(params, [inst], mode, rng)[0]


def greedy_schedule(params: PolicyParams, inst: Instance) -> np.ndarray:
    return sample_schedule(inst, params, "greedy").perm


# -- gradients --------------------------------------------------------------

def _pad_perms(perms, B, N):
    P = np.zeros((B, N), dtype=np.int64)
    for b, p in enumerate(perms):
        P[b, :len(p)] = p
    return P


def logp_and_grad_batch(params: PolicyParams, instances: Sequence[Instance], perms: Sequence[np.ndarray],
                        seeds: Optional[Sequence[float]] = None, need_grad: bool = True):
    """Log-probabilities of the given schedules and ``sum_b seeds[b] * grad log p_b``.

    Returns ``(logps, grads)``; ``grads`` is None when ``need_grad`` is false.
    """
    X, lengths = _batch(instances, params)
    B, N, _ = X.shape
    for b, p in enumerate(perms):
        if len(p) != lengths[b] or not np.array_equal(np.sort(p), np.arange(lengths[b])):
            raise ValueError(f"schedule {b} is not a permutation of its instance's tasks")
    perm = _pad_perms(perms, B, N)
    seeds = np.ones(B) if seeds is None else np.asarray(seeds, dtype=np.float64)

    a = params.arrays
    H = params.hidden
    enc = _encode_batch(params, X, lengths)
    hs, hbar = enc["hs"], enc["hbar"]
    rows = np.arange(B)
    a1, u1, c2 = _decoder_stem(params, hbar)
    prev = np.empty((B, N, H))
    prev[:, 0] = a["start"]
    prev[:, 1:] = hs[rows[:, None], perm[:, :-1]]
    q, acts = _decoder_head(params, c2, prev)
    logits = q @ hs.transpose(0, 2, 1)

    steps = np.arange(N)
    step_valid = steps[None, :] < lengths[:, None]
    pos = np.full((B, N), -1, dtype=np.int64)
    bi, ti = np.nonzero(step_valid)
    pos[bi, perm[bi, ti]] = ti
    avail = pos[:, None, :] >= steps[None, :, None]
    avail |= ~step_valid[:, :, None]
    logp = _masked_log_softmax(logits, avail)
    chosen = np.take_along_axis(logp, perm[:, :, None], axis=2)[:, :, 0]
    step_logp = np.where(step_valid, chosen, 0.0)
    total = step_logp.sum(axis=1)
    if not need_grad:
        return total, None

    g = {}
    p = np.exp(logp)
    dlogits = -p
    np.put_along_axis(dlogits, perm[:, :, None], np.take_along_axis(dlogits, perm[:, :, None], axis=2) + 1.0, axis=2)
    dlogits *= (seeds[:, None] * step_valid)[:, :, None]

    dq = dlogits @ hs
    dhs = dlogits.transpose(0, 2, 1) @ q

    def flat(x):
        return x.reshape(-1, x.shape[-1])

    u5 = np.maximum(acts[3], 0.0)
    g["Wq"] = flat(dq).T @ flat(u5)
    g["bq"] = flat(dq).sum(axis=0)
    dx = (dq @ a["Wq"]) * (acts[3] > 0)
    for layer, idx in ((5, 2), (4, 1), (3, 0)):
        u_in = np.maximum(acts[idx], 0.0)
        g[f"W{layer}"] = flat(dx).T @ flat(u_in)
        g[f"b{layer}"] = flat(dx).sum(axis=0)
        dx = (dx @ a[f"W{layer}"]) * (acts[idx] > 0)
    da2 = dx
    W2u, W2h, W2p = params._w2_split()
    sda2 = da2.sum(axis=1)
    g["W2"] = np.concatenate([sda2.T @ u1, sda2.T @ hbar, flat(da2).T @ flat(prev)], axis=1)
    g["b2"] = sda2.sum(axis=0)
    dprev = da2 @ W2p
    g["start"] = dprev[:, 0].sum(axis=0)
    np.add.at(dhs, (rows[:, None], perm[:, :-1]), dprev[:, 1:])
    da1 = (sda2 @ W2u) * (a1 > 0)
    g["W1"] = da1.T @ hbar
    g["b1"] = da1.sum(axis=0)
    dhbar = sda2 @ W2h + da1 @ a["W1"]
    dhs += (dhbar / lengths[:, None])[:, None, :] * enc["task_valid"][:, :, None]

    D = params.n_features
    _, Wh, _ = params._lstm()
    cs, gates = enc["cs"], enc["gates"]
    dW = np.zeros((4 * H, D + H))
    db = np.zeros(4 * H)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    zeros = np.zeros((B, H))
    for t in range(N - 1, -1, -1):
        dh = dhs[:, t] + dh_next
        gt = gates[:, t]
        i, f, o, gg = gt[:, :H], gt[:, H:2 * H], gt[:, 2 * H:3 * H], gt[:, 3 * H:]
        tc = np.tanh(cs[:, t])
        c_prev = cs[:, t - 1] if t else zeros
        h_prev = hs[:, t - 1] if t else zeros
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = np.concatenate([dc * gg * i * (1.0 - i),
                             dc * c_prev * f * (1.0 - f),
                             dh * tc * o * (1.0 - o),
                             dc * i * (1.0 - gg * gg)], axis=1)
        dW[:, :D] += dz.T @ X[:, t]
        dW[:, D:] += dz.T @ h_prev
        db += dz.sum(axis=0)
        dh_next = dz @ Wh
        dc_next = dc * f
    for k, gname in enumerate(GATES):
        g[f"W{gname}"] = dW[k * H:(k + 1) * H]
        g[f"b{gname}"] = db[k * H:(k + 1) * H]
    return total, g


def log_prob_and_grad(inst: Instance, params: PolicyParams, perm, seed: float = 1.0):
    """``log p(perm | inst)`` and its gradient (times ``seed``) for every parameter."""
    total, g = logp_and_grad_batch(params, [inst], [np.asarray(perm, dtype=np.int64)], [seed])
    return float(total[0]), g


def log_prob(inst: Instance, params: PolicyParams, perm) -> float:
    total, _ = logp_and_grad_batch(params, [inst], [np.asarray(perm, dtype=np.int64)], need_grad=False)
    return float(total[0])
