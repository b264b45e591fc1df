"""Time the hot kernels under both backends.

Each backend runs in its own interpreter (the backend is fixed at import by
``ANTSWARM_NUMBA``).  Usage::

    python benchmarks/bench_kernels.py [--budget SECONDS] [--json OUT]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from antswarm import _accel, kernels
from antswarm.datagen import GeneratorConfig, generate_constellation
from antswarm.policy import init

budget = float(sys.argv[1])
net = init(0)
P = generate_constellation(GeneratorConfig(10, 1.0, 0.5, seed=1)).positions
rng = np.random.default_rng(0)
a = rng.uniform(-3, 3, 6)
B = np.c_[np.cos(a), np.sin(a)]
M = rng.normal(size=(30, 30)); M = M + M.T

cases = {
    "network_agent_action (6 bearings)": lambda: kernels.network_agent_action(B, net.params, False),
    "analytical_actions (N=10)": lambda: kernels.analytical_actions(P, 1.0),
    "network_actions (N=10)": lambda: kernels.network_actions(P, 1.0, net.params, False),
    "lambda2_grad (N=10)": lambda: kernels.lambda2_grad(P, 1.0),
    "jacobi_eigh (30x30)": lambda: kernels.jacobi_eigh(M),
    "train_step (N=10)": lambda: kernels.train_step(P, 1.0, net.params, False, 0.05, 1.0, 1.0),
}
out = {"backend": _accel.backend(), "results": {}}
for name, fn in cases.items():
    fn()  # compile / warm up
    n, t0 = 0, time.perf_counter()
    while True:
        fn()
        n += 1
        dt = time.perf_counter() - t0
        if dt >= budget or n >= 100000:
            break
    out["results"][name] = dt / n
print(json.dumps(out))
"""


def run_backend(flag: str, budget: float) -> dict:
    env = dict(os.environ, ANTSWARM_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", WORKER, str(budget)], env=env, check=True,
                         capture_output=True, text=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--budget", type=float, default=1.0, help="seconds per kernel per backend")
    ap.add_argument("--json", help="also write the raw timings here")
    args = ap.parse_args(argv)

    fast = run_backend("1", args.budget)
    slow = run_backend("0", args.budget)
    width = max(len(k) for k in fast["results"])
    print(f"{'kernel'.ljust(width)}  {fast['backend']:>12}  {slow['backend']:>12}  speedup")
    for name, t_fast in fast["results"].items():
        t_slow = slow["results"][name]
        print(f"{name.ljust(width)}  {t_fast * 1e6:10.1f}us  {t_slow * 1e6:10.1f}us  {t_slow / t_fast:7.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"compiled": fast, "fallback": slow}, fh, indent=1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
