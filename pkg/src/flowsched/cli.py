"""Command line entry point: ``flowsched <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .bench import BRUTE_FORCE_CAP, SOLVERS, make_solver, run_bench
from .checkpoint import save_policy
from .instances import (DESK_DISTRIBUTION, PAPER_DISTRIBUTION, DistributionConfig, NothingToSchedule,
                        generate_instance, list_instance_files, read_instance, read_schedule_csv, reschedule_instance,
                        write_instance, write_schedule_csv)

PRESETS = {"paper": PAPER_DISTRIBUTION, "desk": DESK_DISTRIBUTION}


def _dist_from_args(a) -> DistributionConfig:
    d = PRESETS[a.preset].to_dict()
    for key in ("m", "n_mean", "n_std", "n_min", "n_max", "t_mean", "t_std", "t_min", "deadline_ref_n"):
        v = getattr(a, key)
        if v is not None:
            d[key] = v
    if a.deadlines:
        d["deadline_choices"] = [float(x) for x in a.deadlines.split(",")]
    return DistributionConfig.from_dict(d)


def cmd_generate(a) -> int:
    cfg = _dist_from_args(a)
    os.makedirs(a.out_dir, exist_ok=True)
    rng = np.random.default_rng(a.seed)
    for i in range(a.count):
        name = f"{a.prefix}{i:04d}"
        write_instance(generate_instance(cfg, rng, name=name), os.path.join(a.out_dir, name + ".txt"))
    return 0


def cmd_train(a) -> int:
    from .training import TrainingConfig, train

    cfg = TrainingConfig.from_json(a.config) if a.config else TrainingConfig()
    if a.epochs is not None:
        cfg.epoch_max = a.epochs
    state = a.state or a.checkpoint + ".state"
    best, lg = train(cfg, checkpoint_path=state, resume=a.resume)
    save_policy(a.checkpoint, best, {"config": cfg.to_dict(), "best_val": float(lg.val_means.min())})
    if a.log:
        lg.write_csv(a.log)
    return 0


def cmd_solve(a) -> int:
    inst = read_instance(a.instance)
    solve = make_solver(a.solver, a.checkpoint, a.ig_iterations, a.ig_seconds, a.bf_cap)
    perm = solve(inst, np.random.default_rng(a.seed))
    write_schedule_csv(a.out if a.out != "-" else sys.stdout, inst, perm, solver=a.solver,
                       orders_dest=a.orders_out)
    return 0


def cmd_bench(a) -> int:
    solvers = [s.strip() for s in a.solvers.split(",") if s.strip()]
    unknown = [s for s in solvers if s not in SOLVERS]
    if unknown:
        raise ValueError(f"unknown solvers: {', '.join(unknown)}")
    if "neural" in solvers and not a.checkpoint:
        raise ValueError("solver 'neural' needs --checkpoint")
    instances = [read_instance(p) for p in list_instance_files(a.instance_dir)]
    report = run_bench(instances, solvers, a.out, a.checkpoint, a.ig_iterations, a.ig_seconds, a.seed, a.bf_cap)
    for solver, mean in report.means().items():
        print(f"{solver:16s} mean objective {mean:.6f}", file=sys.stderr)
    return 0


def cmd_reschedule(a) -> int:
    inst = read_instance(a.instance)
    perm, _ = read_schedule_csv(a.schedule)
    new = read_instance(a.new_orders) if a.new_orders else None
    write_instance(reschedule_instance(inst, perm, a.t_now, new), a.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flowsched", description="Weighted-tardiness flow shop scheduling.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write random instance files")
    g.add_argument("--out-dir", required=True)
    g.add_argument("--count", type=int, default=1, help="number of instances")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--prefix", default="inst")
    g.add_argument("--preset", choices=sorted(PRESETS), default="paper",
                   help="base distribution; the flags below override single fields")
    g.add_argument("--m", type=int)
    g.add_argument("--n-mean", type=float)
    g.add_argument("--n-std", type=float)
    g.add_argument("--n-min", type=int)
    g.add_argument("--n-max", type=int)
    g.add_argument("--t-mean", type=float)
    g.add_argument("--t-std", type=float)
    g.add_argument("--t-min", type=float)
    g.add_argument("--deadlines", help="comma-separated deadline choices (hours)")
    g.add_argument("--deadline-ref-n", type=float, help="scale deadlines by n / this value")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train the neural policy")
    t.add_argument("--config", help="JSON file with TrainingConfig fields")
    t.add_argument("--checkpoint", required=True, help="output policy checkpoint (best validation)")
    t.add_argument("--state", help="training-state file for resuming (default: <checkpoint>.state)")
    t.add_argument("--log", help="convergence CSV output")
    t.add_argument("--epochs", type=int, help="override epoch_max")
    t.add_argument("--resume", action="store_true", help="continue from --state")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("solve", help="schedule one instance")
    s.add_argument("instance")
    s.add_argument("--solver", choices=SOLVERS, default="neh")
    s.add_argument("--checkpoint", help="policy checkpoint (neural solver)")
    s.add_argument("--out", default="-", help="schedule CSV (default stdout)")
    s.add_argument("--orders-out", help="per-order completion/tardiness CSV")
    s.add_argument("--seed", type=int, default=0, help="seed for iterated greedy")
    s.add_argument("--ig-iterations", type=int, help="iterated greedy round limit")
    s.add_argument("--ig-seconds", type=float, help="iterated greedy time limit")
    s.add_argument("--bf-cap", type=int, default=BRUTE_FORCE_CAP, help="largest n brute force accepts")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run solvers over a directory of instances")
    b.add_argument("instance_dir")
    b.add_argument("--solvers", default="greedy,neh,suliman", help="comma-separated, from: " + ",".join(SOLVERS))
    b.add_argument("--checkpoint", help="policy checkpoint (neural solver)")
    b.add_argument("--out", required=True, help="report CSV")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--ig-iterations", type=int)
    b.add_argument("--ig-seconds", type=float)
    b.add_argument("--bf-cap", type=int, default=BRUTE_FORCE_CAP)
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("reschedule", help="build the instance of remaining plus new work")
    r.add_argument("instance")
    r.add_argument("schedule", help="schedule CSV being executed")
    r.add_argument("--t-now", type=float, required=True, help="current time, hours from the schedule start")
    r.add_argument("--new-orders", help="instance file holding the newly arrived orders")
    r.add_argument("--out", required=True, help="instance file for the remaining work")
    r.set_defaults(func=cmd_reschedule)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except NothingToSchedule as e:
        print(f"flowsched {args.command}: nothing to schedule: {e}", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError) as e:
        print(f"flowsched {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
