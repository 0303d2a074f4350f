"""Throughput comparison of the JIT kernels against the numpy fallback.

Runs the two hot tiling kernels (exhaustive ground search and the
row-profile transfer DP) in two subprocesses, one with numba enabled and
one with SIMFORGE_NO_NUMBA=1, and prints a timing table.

    python3 benchmarks/benchmark_kernels.py
"""

import json
import os
import subprocess
import sys

WORKER = r"""
import json, os, time
import simforge.tiles as tl
from simforge._kernels import USE_NUMBA

results = {"numba": USE_NUMBA}
ts = tl.binary_counter_tileset()

# warm-up (includes JIT compilation when enabled)
tl.ground_exhaustive(ts, 2, 2)
tl.ground_transfer(ts, 3, 3)

t0 = time.perf_counter()
res = tl.ground_exhaustive(ts, 3, 3)          # 7^9 ~ 4.0e7 configurations
results["exhaustive_3x3_s"] = time.perf_counter() - t0
results["exhaustive_energy"] = str(res.energy)

t0 = time.perf_counter()
for _ in range(3):
    res = tl.ground_transfer(ts, 6, 8)        # 7^6 profile states, 48 cells
results["transfer_6x8_s"] = (time.perf_counter() - t0) / 3
results["transfer_energy"] = str(res.energy)

t0 = time.perf_counter()
stack = tl.solve_stack(6, 5)
results["stack_6x5_s"] = time.perf_counter() - t0

print(json.dumps(results))
"""


def run(no_numba):
    env = dict(os.environ)
    if no_numba:
        env["SIMFORGE_NO_NUMBA"] = "1"
    else:
        env.pop("SIMFORGE_NO_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", WORKER], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    jit = run(no_numba=False)
    plain = run(no_numba=True)
    assert jit["exhaustive_energy"] == plain["exhaustive_energy"]
    assert jit["transfer_energy"] == plain["transfer_energy"]
    rows = [("exhaustive 3x3 (7^9 configs)", "exhaustive_3x3_s"),
            ("transfer DP 6x8", "transfer_6x8_s"),
            ("five-layer stack 6x5", "stack_6x5_s")]
    print(f"{'kernel':34s} {'numba':>10s} {'numpy':>10s} {'speedup':>9s}")
    for label, key in rows:
        a, b = jit[key], plain[key]
        print(f"{label:34s} {a:9.3f}s {b:9.3f}s {b / a:8.1f}x")


if __name__ == "__main__":
    main()
