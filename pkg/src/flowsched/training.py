"""REINFORCE training with the better-of-NEH/Suliman baseline and Adam.

Randomness is keyed by position, not by history: step ``s`` of epoch ``e``
draws from ``default_rng([seed, TRAIN, e, s])``. A run resumed from an
end-of-epoch checkpoint therefore continues exactly as an uninterrupted run.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field, fields
from typing import Callable, Optional, Sequence

import numpy as np

from . import checkpoint
from .core import Instance
from .heuristics import best_heuristic_baseline, greedy_schedule
from .instances import DistributionConfig, PAPER_DISTRIBUTION, generate_instance
from .neural import DEFAULT_HIDDEN, DEFAULT_WIDTHS, PolicyParams, logp_and_grad_batch, rollout

log = logging.getLogger(__name__)

_INIT, _VAL, _TRAIN, _POOL = 1, 2, 3, 4
LOG_HEADER = ("epoch", "val_mean", "base_mean", "adv_mean", "seconds")


@dataclass
class TrainingConfig:
    epoch_max: int = 100
    steps_per_epoch: int = 100
    batch_size: int = 64
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden: int = DEFAULT_HIDDEN
    widths: tuple[int, ...] = DEFAULT_WIDTHS
    distribution: DistributionConfig = PAPER_DISTRIBUTION
    seed: int = 0
    val_size: int = 100
    # 0 draws a fresh instance for every sample; otherwise batches are drawn
    # from a fixed pool of this many instances whose baselines are cached
    pool_size: int = 0

    def __post_init__(self):
        if min(self.epoch_max, self.steps_per_epoch, self.batch_size) < 1:
            raise ValueError("epoch_max, steps_per_epoch and batch_size must be >= 1")
        if self.lr < 0:
            raise ValueError("learning rate must be non-negative")
        if self.val_size < 1:
            raise ValueError("val_size must be >= 1")
        self.widths = tuple(int(w) for w in self.widths)
        if isinstance(self.distribution, dict):
            self.distribution = DistributionConfig.from_dict(self.distribution)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["widths"] = list(self.widths)
        d["distribution"] = self.distribution.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "TrainingConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def same_run(self, other: "TrainingConfig") -> bool:
        """True when ``other`` describes the same run, possibly with a different epoch budget."""
        a, b = self.to_dict(), other.to_dict()
        a.pop("epoch_max")
        b.pop("epoch_max")
        return a == b


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros(cls, params) -> "AdamState":
        arrays = params.arrays if isinstance(params, PolicyParams) else params
        return cls({k: np.zeros_like(v) for k, v in arrays.items()},
                   {k: np.zeros_like(v) for k, v in arrays.items()}, 0)


def adam_step(params, grads: dict[str, np.ndarray], state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam descent step on a PolicyParams or a dict of arrays.

    Returns ``(new_params, new_state)`` of the same kinds; inputs are left untouched.
    """
    arrays = params.arrays if isinstance(params, PolicyParams) else params
    if grads.keys() != arrays.keys():
        raise ValueError("gradient and parameter names differ")
    t = state.step + 1
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    new, m_new, v_new = {}, {}, {}
    for k, p in arrays.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ValueError(f"gradient for {k} has shape {g.shape}, parameter has {p.shape}")
        m = beta1 * state.m[k] + (1.0 - beta1) * g
        v = beta2 * state.v[k] + (1.0 - beta2) * (g * g)
        new[k] = p - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        m_new[k], v_new[k] = m, v
    if isinstance(params, PolicyParams):
        new = PolicyParams(params.n_features, params.hidden, params.widths, new)
    return new, AdamState(m_new, v_new, t)


def policy_gradient(params: PolicyParams, instances: Sequence[Instance], perms, advantages) -> dict[str, np.ndarray]:
    """``(1/B) sum_i A_i grad log p(perm_i | x_i)``."""
    adv = np.asarray(advantages, dtype=np.float64)
    _, g = logp_and_grad_batch(params, instances, perms, adv / len(instances))
    return g


@dataclass
class BatchStats:
    mean_objective: float
    mean_baseline: float
    mean_advantage: float


def reinforce_batch_gradient(batch: Sequence[Instance], params: PolicyParams, rng: np.random.Generator,
                             baselines: Optional[Sequence[float]] = None):
    """Monte-Carlo policy gradient over one batch of instances.

    Each instance gets one sampled schedule; its advantage is the sampled
    objective minus the instance's heuristic baseline.
    """
    if not batch:
        raise ValueError("empty batch")
    if baselines is None:
        baselines = [best_heuristic_baseline(inst) for inst in batch]
    base = np.asarray(baselines, dtype=np.float64)
    traces = rollout(params, batch, "sample", rng)
    f = np.array([inst.evaluate(tr.perm) for inst, tr in zip(batch, traces)])
    adv = f - base
    g = policy_gradient(params, batch, [tr.perm for tr in traces], adv)
    return g, BatchStats(float(f.mean()), float(base.mean()), float(adv.mean()))


def evaluate_policy(params: PolicyParams, instances: Sequence[Instance], chunk: int = 256):
    """Greedy-decode every instance; returns ``(mean objective, per-instance objectives)``."""
    out = []
    for s in range(0, len(instances), chunk):
        part = instances[s:s + chunk]
        for inst, tr in zip(part, rollout(params, part, "greedy")):
            out.append(inst.evaluate(tr.perm))
    vals = np.array(out)
    return float(vals.mean()), vals


@dataclass
class ConvergenceLog:
    rows: list[tuple[int, float, float, float, float]] = field(default_factory=list)
    # validation-set means of the reference heuristics, for context
    reference: dict[str, float] = field(default_factory=dict)

    def append(self, epoch, val_mean, base_mean, adv_mean, seconds):
        self.rows.append((int(epoch), float(val_mean), float(base_mean), float(adv_mean), float(seconds)))

    @property
    def val_means(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    def deterministic_rows(self):
        """Rows without the wall-clock column."""
        return [r[:4] for r in self.rows]

    def write_csv(self, dest) -> None:
        def emit(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LOG_HEADER)
            for e, v, b, a, s in self.rows:
                w.writerow([e, f"{v:.6f}", f"{b:.6f}", f"{a:.6f}", f"{s:.6f}"])
        if hasattr(dest, "write"):
            emit(dest)
        else:
            with open(dest, "w", newline="") as fh:
                emit(fh)

    def to_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=np.float64).reshape(-1, 5)

    @classmethod
    def from_array(cls, arr, reference=None) -> "ConvergenceLog":
        lg = cls(reference=dict(reference or {}))
        for r in np.asarray(arr).reshape(-1, 5):
            lg.append(*r)
        return lg


def validation_set(cfg: TrainingConfig) -> list[Instance]:
    rng = np.random.default_rng([cfg.seed, _VAL])
    return [generate_instance(cfg.distribution, rng, name=f"val{i:04d}") for i in range(cfg.val_size)]


class _Pool:
    def __init__(self, cfg: TrainingConfig):
        rng = np.random.default_rng([cfg.seed, _POOL])
        self.instances = [generate_instance(cfg.distribution, rng) for _ in range(cfg.pool_size)]
        self.base: dict[int, float] = {}

    def batch(self, rng, size):
        idx = rng.integers(0, len(self.instances), size)
        insts = [self.instances[i] for i in idx]
        for i in idx:
            if i not in self.base:
                self.base[i] = best_heuristic_baseline(self.instances[i])
        return insts, [self.base[i] for i in idx]


def _save_training(path, cfg, epoch, params, best, best_val, state, lg):
    arrays = {}
    for k, v in params.arrays.items():
        arrays["params/" + k] = v
    for k, v in best.arrays.items():
        arrays["best/" + k] = v
    for k in params.arrays:
        arrays["adam_m/" + k] = state.m[k]
        arrays["adam_v/" + k] = state.v[k]
    arrays["log"] = lg.to_array()
    meta = {"kind": "training", "n_features": params.n_features, "hidden": params.hidden,
            "widths": list(params.widths), "config": cfg.to_dict(), "epoch": epoch,
            "best_val": best_val, "adam_step": state.step, "reference": lg.reference}
    checkpoint.save_arrays(path, arrays, meta)


def _load_training(path):
    arrays, meta = checkpoint.load_arrays(path)
    if meta.get("kind") != "training":
        raise checkpoint.CheckpointError(f"{path}: not a training checkpoint")
    names = PolicyParams.shapes(meta["n_features"], meta["hidden"], meta["widths"])
    dims = (meta["n_features"], meta["hidden"], tuple(meta["widths"]))
    params = PolicyParams(*dims, {k: arrays["params/" + k] for k in names})
    best = PolicyParams(*dims, {k: arrays["best/" + k] for k in names})
    state = AdamState({k: arrays["adam_m/" + k] for k in names}, {k: arrays["adam_v/" + k] for k in names},
                      meta["adam_step"])
    lg = ConvergenceLog.from_array(arrays["log"], meta.get("reference"))
    return TrainingConfig.from_dict(meta["config"]), meta["epoch"], params, best, meta["best_val"], state, lg


def train(cfg: TrainingConfig, checkpoint_path=None, resume: bool = False,
          on_epoch: Optional[Callable[[int, ConvergenceLog], None]] = None) -> tuple[PolicyParams, ConvergenceLog]:
    """Run REINFORCE for ``cfg.epoch_max`` epochs and return the best-validation parameters.

    With ``checkpoint_path`` the full training state is written after every
    epoch; ``resume=True`` continues from that file (its config must match
    ``cfg`` except for ``epoch_max``).
    """
    val = validation_set(cfg)
    if resume:
        if checkpoint_path is None:
            raise ValueError("resume needs a checkpoint path")
        saved_cfg, done, params, best, best_val, state, lg = _load_training(checkpoint_path)
        if not saved_cfg.same_run(cfg):
            raise ValueError("checkpoint was written by a different training configuration")
    else:
        params = PolicyParams.init(cfg.distribution.m, cfg.hidden, cfg.widths, np.random.default_rng([cfg.seed, _INIT]))
        state = AdamState.zeros(params)
        done = 0
        best, best_val = params.copy(), np.inf
        lg = ConvergenceLog()
        lg.reference = {
            "greedy": float(np.mean([greedy_schedule(i).objective for i in val])),
            "baseline": float(np.mean([best_heuristic_baseline(i) for i in val])),
            "init_policy": evaluate_policy(params, val)[0],
        }
        log.info("validation references: %s", lg.reference)
    pool = _Pool(cfg) if cfg.pool_size else None

    for epoch in range(done + 1, cfg.epoch_max + 1):
        t0 = time.perf_counter()
        stats = []
        for step in range(cfg.steps_per_epoch):
            rng = np.random.default_rng([cfg.seed, _TRAIN, epoch, step])
            if pool is not None:
                batch, base = pool.batch(rng, cfg.batch_size)
            else:
                batch = [generate_instance(cfg.distribution, rng) for _ in range(cfg.batch_size)]
                base = None
            g, st = reinforce_batch_gradient(batch, params, rng, base)
            params, state = adam_step(params, g, state, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
            stats.append(st)
        val_mean, _ = evaluate_policy(params, val)
        if val_mean < best_val:
            best, best_val = params.copy(), val_mean
        lg.append(epoch, val_mean, np.mean([s.mean_baseline for s in stats]),
                  np.mean([s.mean_advantage for s in stats]), time.perf_counter() - t0)
        log.info("epoch %d val=%.4f base=%.4f adv=%.4f (%.1fs)", *lg.rows[-1])
        if checkpoint_path is not None:
            _save_training(checkpoint_path, cfg, epoch, params, best, best_val, state, lg)
        if on_epoch is not None:
            on_epoch(epoch, lg)
    return best, lg
