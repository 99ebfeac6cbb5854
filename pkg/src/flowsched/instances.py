"""Instance generation, the instance text format, schedule CSVs and rescheduling.

Instance file layout (one record per line, ``#`` starts a comment line)::

    flowsched-instance 1
    name <token or ->
    dims <m> <n> <K>
    ready <r_1> ... <r_m>
    order <id> <deadline> <weight> <task> <task> ...     (K lines)
    proc
    <t_11> ... <t_1n>                                     (m lines)
    end

Floats are written with Python's shortest round-trip repr, so a write/read
cycle reproduces every value exactly. Task indices start at 0.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Instance, Order, check_permutation, completion_matrix, normalized_weights, order_tardiness

FORMAT_TAG = "flowsched-instance"
FORMAT_VERSION = 1

PAPER_DEADLINES = (24, 36, 48, 60, 72, 96, 120)


class InstanceFormatError(ValueError):
    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


class NothingToSchedule(Exception):
    """Rescheduling left no task to schedule."""


@dataclass(frozen=True)
class DistributionConfig:
    """Random instance distribution.

    Defaults reproduce the mask-production training distribution: five
    machines, task count N(124, 33), processing times N(2.4, 1.6) hours and
    deadlines drawn from {24, ..., 120} hours.
    """

    m: int = 5
    n_mean: float = 124.0
    n_std: float = 33.0
    n_min: int = 1
    n_max: Optional[int] = None
    t_mean: float = 2.4
    t_std: float = 1.6
    t_min: float = 0.05
    deadline_choices: tuple[float, ...] = PAPER_DEADLINES
    # when set, deadlines are multiplied by n / deadline_ref_n
    deadline_ref_n: Optional[float] = None
    order_size_min: int = 1
    order_size_max: int = 4
    weight_score_min: int = 1
    weight_score_max: int = 10

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.n_mean <= 0 or self.t_mean <= 0:
            raise ValueError("n_mean and t_mean must be positive")
        if not self.deadline_choices:
            raise ValueError("deadline_choices is empty")
        if self.order_size_min < 1 or self.order_size_max < self.order_size_min:
            raise ValueError("bad order size range")
        object.__setattr__(self, "deadline_choices", tuple(float(d) for d in self.deadline_choices))

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["deadline_choices"] = list(self.deadline_choices)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionConfig":
        d = dict(d)
        if "deadline_choices" in d:
            d["deadline_choices"] = tuple(d["deadline_choices"])
        return cls(**d)


PAPER_DISTRIBUTION = DistributionConfig()

# Small instances with deadlines shrunk in proportion to the task count.
DESK_DISTRIBUTION = DistributionConfig(n_mean=20, n_std=5, n_min=5, n_max=40, deadline_ref_n=124)


def _truncated_normal(rng, mean, std, lower, size):
    x = rng.normal(mean, std, size)
    bad = x <= lower
    while bad.any():
        x[bad] = rng.normal(mean, std, int(bad.sum()))
        bad = x <= lower
    return x


def generate_instance(cfg: DistributionConfig, rng: np.random.Generator, name: str = "") -> Instance:
    n = int(round(rng.normal(cfg.n_mean, cfg.n_std))) if cfg.n_std > 0 else int(round(cfg.n_mean))
    n = max(n, cfg.n_min, 1)
    if cfg.n_max is not None:
        n = min(n, cfg.n_max)
    proc = _truncated_normal(rng, cfg.t_mean, cfg.t_std, cfg.t_min, (cfg.m, n))

    sizes = []
    left = n
    while left > 0:
        s = int(rng.integers(cfg.order_size_min, cfg.order_size_max + 1))
        s = min(s, left)
        sizes.append(s)
        left -= s
    K = len(sizes)
    scale = n / cfg.deadline_ref_n if cfg.deadline_ref_n else 1.0
    choices = np.asarray(cfg.deadline_choices)
    deadlines = choices[rng.integers(0, len(choices), K)] * scale
    scores = rng.integers(cfg.weight_score_min, cfg.weight_score_max + 1, K)
    weights = normalized_weights(scores)

    orders = []
    start = 0
    for k, s in enumerate(sizes):
        orders.append(Order(f"O{k + 1}", float(deadlines[k]), weights[k], tuple(range(start, start + s))))
        start += s
    return Instance(proc, orders, name=name)


def generate_instances(cfg: DistributionConfig, count: int, seed) -> list[Instance]:
    rng = np.random.default_rng(seed)
    return [generate_instance(cfg, rng, name=f"inst{i:04d}") for i in range(count)]


# -- text format ------------------------------------------------------------

def format_instance(inst: Instance) -> str:
    out = [f"{FORMAT_TAG} {FORMAT_VERSION}",
           f"name {inst.name or '-'}",
           f"dims {inst.m} {inst.n} {inst.K}",
           "ready " + " ".join(repr(float(r)) for r in inst.ready)]
    for o in inst.orders:
        if not o.id or any(c.isspace() for c in o.id):
            raise ValueError(f"order id {o.id!r} must be a non-empty token without whitespace")
        out.append(" ".join(["order", o.id, repr(float(o.deadline)), repr(float(o.weight))]
                            + [str(t) for t in o.tasks]))
    out.append("proc")
    for row in inst.proc:
        out.append(" ".join(repr(float(v)) for v in row))
    out.append("end")
    return "\n".join(out) + "\n"


def write_instance(inst: Instance, dest) -> None:
    text = format_instance(inst)
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)


def _floats(tokens, lineno, what):
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise InstanceFormatError(f"bad number in {what}", lineno) from None


def parse_instance(text: str) -> Instance:
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    it = iter(lines)
    last_line = lines[-1][0] if lines else 0

    def take(section):
        try:
            return next(it)
        except StopIteration:
            raise InstanceFormatError(f"truncated file: missing section '{section}'", last_line + 1) from None

    lineno, ln = take("header")
    tok = ln.split()
    if len(tok) != 2 or tok[0] != FORMAT_TAG:
        raise InstanceFormatError(f"expected '{FORMAT_TAG} <version>' header", lineno)
    if tok[1] != str(FORMAT_VERSION):
        raise InstanceFormatError(f"unsupported format version {tok[1]}", lineno)

    lineno, ln = take("name")
    tok = ln.split()
    if tok[0] != "name" or len(tok) != 2:
        raise InstanceFormatError("expected 'name <token>'", lineno)
    name = "" if tok[1] == "-" else tok[1]

    lineno, ln = take("dims")
    tok = ln.split()
    if tok[0] != "dims" or len(tok) != 4:
        raise InstanceFormatError("expected 'dims <m> <n> <K>'", lineno)
    try:
        m, n, K = (int(t) for t in tok[1:])
    except ValueError:
        raise InstanceFormatError("dims must be integers", lineno) from None
    if m < 1 or n < 0 or K < 0:
        raise InstanceFormatError("dims out of range", lineno)

    lineno, ln = take("ready")
    tok = ln.split()
    if tok[0] != "ready" or len(tok) != m + 1:
        raise InstanceFormatError(f"expected 'ready' with {m} values", lineno)
    ready = _floats(tok[1:], lineno, "ready")

    orders = []
    for _ in range(K):
        lineno, ln = take("order")
        tok = ln.split()
        if tok[0] != "order" or len(tok) < 4:
            raise InstanceFormatError("expected 'order <id> <deadline> <weight> <tasks...>'", lineno)
        d, w = _floats(tok[2:4], lineno, "order")
        try:
            tasks = tuple(int(t) for t in tok[4:])
        except ValueError:
            raise InstanceFormatError("task indices must be integers", lineno) from None
        orders.append(Order(tok[1], d, w, tasks))

    lineno, ln = take("proc")
    if ln != "proc":
        raise InstanceFormatError("expected 'proc'", lineno)
    rows = []
    for _ in range(m):
        lineno, ln = take("proc")
        vals = _floats(ln.split(), lineno, "proc")
        if len(vals) != n:
            raise InstanceFormatError(f"expected {n} processing times, got {len(vals)}", lineno)
        rows.append(vals)
    lineno, ln = take("end")
    if ln != "end":
        raise InstanceFormatError("expected 'end'", lineno)
    proc = np.array(rows, dtype=np.float64).reshape(m, n)
    return Instance(proc, orders, ready=np.array(ready), name=name)


def read_instance(src) -> Instance:
    if hasattr(src, "read"):
        return parse_instance(src.read())
    with open(src, encoding="ascii") as fh:
        return parse_instance(fh.read())


# -- schedules --------------------------------------------------------------

SCHEDULE_HEADER = ("position", "task_id", "order_id", "completion_m")
ORDER_HEADER = ("order_id", "deadline", "weight", "completion", "tardiness")


def write_schedule_csv(dest, inst: Instance, perm, solver: str = "", orders_dest=None) -> float:
    """Write the schedule CSV; returns the objective written in its header comment.

    Leading ``#`` lines carry the solver name and objective. When
    ``orders_dest`` is given, per-order completion and tardiness go there.
    """
    perm = check_permutation(inst, perm)
    C = completion_matrix(inst, perm)
    objective = inst.evaluate(perm)
    buf = io.StringIO()
    if solver:
        buf.write(f"# solver={solver}\n")
    buf.write(f"# objective={objective:.6f}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCHEDULE_HEADER)
    for pos, t in enumerate(perm):
        w.writerow([pos, int(t), inst.orders[inst.task_order[t]].id, f"{C[-1, pos]:.6f}"])
    _emit(dest, buf.getvalue())
    if orders_dest is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ORDER_HEADER)
        for o, T, late in order_tardiness(inst, perm):
            w.writerow([o.id, f"{o.deadline:.6f}", f"{o.weight:.6f}", f"{T:.6f}", f"{late:.6f}"])
        _emit(orders_dest, buf.getvalue())
    return objective


def _emit(dest, text):
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w", newline="\n") as fh:
            fh.write(text)


def read_schedule_csv(src) -> tuple[np.ndarray, Optional[float]]:
    """Permutation (in position order) and the recorded objective, if any."""
    text = src.read() if hasattr(src, "read") else open(src).read()
    objective = None
    body = []
    for ln in text.splitlines():
        if ln.startswith("#"):
            key, _, val = ln[1:].strip().partition("=")
            if key == "objective":
                objective = float(val)
        elif ln.strip():
            body.append(ln)
    rows = list(csv.DictReader(body))
    if not rows and not body:
        raise ValueError("empty schedule file")
    rows.sort(key=lambda r: int(r["position"]))
    return np.array([int(r["task_id"]) for r in rows], dtype=np.int64), objective


# -- rescheduling -----------------------------------------------------------

def reschedule_instance(inst: Instance, perm, t_now: float,
                        new_orders: Optional[Instance] = None) -> Instance:
    """Instance of the work still open at ``t_now`` plus newly arrived orders.

    A task counts as started once its first-machine operation has begun;
    started tasks run to completion and only push back the machines' ready
    times. Unstarted tasks keep their relative index order and come first,
    new tasks follow. Orders with no unstarted task are dropped; the remaining
    weights are renormalized together with the new ones.
    """
    if t_now < 0:
        raise ValueError("t_now must be non-negative")
    perm = check_permutation(inst, perm)
    C = completion_matrix(inst, perm)
    starts = C[0] - inst.proc[0, perm]
    started_pos = starts < t_now
    started = set(int(t) for t in perm[started_pos])

    ready = np.maximum(inst.ready, t_now)
    if started_pos.any():
        ready = np.maximum(ready, C[:, started_pos].max(axis=1))

    keep = [t for t in range(inst.n) if t not in started]
    remap = {old: new for new, old in enumerate(keep)}
    orders, scores = [], []
    for o in inst.orders:
        tasks = tuple(remap[t] for t in o.tasks if t in remap)
        if tasks:
            orders.append(Order(o.id, o.deadline, o.weight, tasks))
            scores.append(o.weight)
    proc = inst.proc[:, keep]

    if new_orders is not None and new_orders.n:
        if new_orders.m != inst.m:
            raise ValueError(f"new orders use {new_orders.m} machines, instance has {inst.m}")
        taken = {o.id for o in orders}
        off = len(keep)
        for o in new_orders.orders:
            if o.id in taken:
                raise ValueError(f"order id {o.id} already present")
            orders.append(Order(o.id, o.deadline, o.weight, tuple(t + off for t in o.tasks)))
            scores.append(o.weight)
        proc = np.hstack([proc, new_orders.proc])

    if proc.shape[1] == 0:
        raise NothingToSchedule(f"no unstarted or new tasks at t={t_now}")
    weights = normalized_weights(scores)
    orders = [Order(o.id, o.deadline, w, o.tasks) for o, w in zip(orders, weights)]
    return Instance(proc, orders, ready=ready, name=inst.name)


def list_instance_files(directory) -> list[str]:
    return sorted(os.path.join(directory, f) for f in os.listdir(directory)
                  if f.endswith(".txt") or f.endswith(".inst"))
