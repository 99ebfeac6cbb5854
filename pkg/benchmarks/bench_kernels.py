"""Compare the numba and pure-numpy evaluation paths.

Each path runs in its own interpreter so the FLOWSCHED_DISABLE_NUMBA switch is
exercised exactly as a user would set it.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def _best_of(fn, repeat):
    fn()  # warm up (and compile, on the numba path)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def child(repeat):
    import numpy as np

    from flowsched import kernels
    from flowsched.bench import brute_force_optimal
    from flowsched.heuristics import neh_schedule
    from flowsched.instances import DistributionConfig, generate_instance

    rng = np.random.default_rng(0)
    big = generate_instance(DistributionConfig(n_mean=124, n_std=0), rng)
    small = generate_instance(DistributionConfig(n_mean=8, n_std=0, deadline_ref_n=124), rng)
    perms = np.array([rng.permutation(big.n) for _ in range(1000)])
    args = (big.proc, big.task_order, big.deadlines, big.weights, big.ready)
    value = float(kernels.twt_batch(perms, *args).sum())
    res = {
        "backend": "numba" if kernels.USE_NUMBA else "numpy",
        "twt_batch 1000 x n=124": _best_of(lambda: kernels.twt_batch(perms, *args), repeat),
        "NEH n=124": _best_of(lambda: neh_schedule(big), repeat),
        "brute force n=8": _best_of(lambda: brute_force_optimal(small), max(1, repeat // 2)),
        "checksum": value,
    }
    print(json.dumps(res))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    a = ap.parse_args()
    if a.child:
        child(a.repeat)
        return
    results = []
    for disable in ("0", "1"):
        env = dict(os.environ, FLOWSCHED_DISABLE_NUMBA=disable)
        out = subprocess.run([sys.executable, __file__, "--child", "--repeat", str(a.repeat)], env=env,
                             check=True, capture_output=True, text=True).stdout
        results.append(json.loads(out.strip().splitlines()[-1]))
    fast, slow = results
    if fast["checksum"] != slow["checksum"]:
        print("warning: backends disagree on the checksum", file=sys.stderr)
    print(f"{'kernel':<26}{fast['backend']:>12}{slow['backend']:>12}{'speedup':>10}")
    for key in fast:
        if key in ("backend", "checksum"):
            continue
        print(f"{key:<26}{fast[key]:>11.4f}s{slow[key]:>11.4f}s{slow[key] / fast[key]:>9.1f}x")


if __name__ == "__main__":
    main()
