"""Compare the compiled and pure-Python kernels on the three hot paths.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import math
import time

import numpy as np

from atomsim._kernels import MODE_PAIR, MODE_STATE, MODE_TANGENT, backend

# Regular flight (omega_r, Delta, constant field). A chaotic case would
# amplify the round-off difference between backends and hide real mismatches.
PARAMS = (1e-3, 0.8, 0.0)
Y0 = np.array([0.0, 45.0, 1.0, 0.0, 0.0, 0.0])
V0 = np.ones(6) / math.sqrt(6.0)


def trajectory(k):
    t = np.linspace(0.0, 1000.0, 10001)
    return k.integrate(MODE_STATE, PARAMS, Y0, 0.0, t, 1e-10, 1e-10)[0]


def final_only(k):
    return k.integrate(MODE_STATE, (1e-3, 1.0, 400.0), Y0, 0.0, np.array([1000.0]), 1e-10, 1e-10)[0]


def tangent(k):
    return k.lyapunov(MODE_TANGENT, PARAMS, np.concatenate([Y0, V0]), 1000.0, 1.0, 1e-8,
                      1e-10, 1e-10, math.inf, 10**9)[0]


def pair(k):
    # The separation is a difference of two states of size ~45 kept at d0 = 1e-8, so
    # backends agree only to about eps * 45 / d0 per log (round-off, same step sequence).
    return k.lyapunov(MODE_PAIR, PARAMS, np.concatenate([Y0, Y0 + 1e-8 * V0]), 1000.0, 1.0, 1e-8,
                      1e-10, 1e-10, math.inf, 10**9)[0]


CASES = {"trajectory tau=1e3 (10^4 samples)": trajectory,
         "ensemble atom, Gaussian field": final_only,
         "variational Lyapunov tau=1e3": tangent,
         "two-trajectory Lyapunov tau=1e3": pair}


def best_of(fn, k, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(k)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    py = backend("python")
    try:
        cy = backend("cython")
    except ImportError:
        print("compiled kernel not built; nothing to compare")
        return
    print(f"{'case':38s} {'cython [s]':>11s} {'python [s]':>11s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, fn in CASES.items():
        tc, oc = best_of(fn, cy, args.repeat)
        tp, op = best_of(fn, py, max(1, args.repeat // 3))
        diff = float(np.max(np.abs(np.asarray(oc) - np.asarray(op))))
        print(f"{name:38s} {tc:11.4f} {tp:11.4f} {tp / tc:8.1f} {diff:11.2e}")


if __name__ == "__main__":
    main()
