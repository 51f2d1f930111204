#!/usr/bin/env python3
"""Benchmark the RK4 delay-integration kernel: numba vs pure numpy.

The integrator dominates abstraction builds (one call per state-label
pair), so this is the number that decides whether a build takes seconds
or minutes.  Run from the repo root:

    python3 benchmarks/bench_integrator.py [repeats]
"""

import sys
import time

import numpy as np

from delaysym import (
    AbstractionParams,
    RhsSpec,
    StateFunction,
    TimeDelaySystem,
    build,
    integrate_step,
)
from delaysym.kernels import _HAVE_NUMBA

A, B, DELTA = 2.0, 0.5, 0.1


def make_system():
    rhs = RhsSpec.linear([[-A]], [[B]], [[1.0]])
    return TimeDelaySystem(delta=DELTA, r=0.0, rhs=rhs,
                           state_box=[[-1.0, 1.0]], input_box=[[-1.0, 1.0]],
                           kappa=A + B, embed_inflation=2.0)


def bench_single_calls(sys_, backend, calls, substeps=284):
    xi = StateFunction.from_callable(lambda t: [0.5 * np.sin(9 * t)],
                                     DELTA, 21)
    integrate_step(sys_, xi, [0.5], 0.71, substeps,
                   force_backend=backend)          # warm-up / compile
    t0 = time.perf_counter()
    for _ in range(calls):
        integrate_step(sys_, xi, [0.5], 0.71, substeps,
                       force_backend=backend)
    return (time.perf_counter() - t0) / calls


def bench_build(sys_, monkeypatched_backend):
    import delaysym.kernels as K
    old = K._ACTIVE
    K._ACTIVE = monkeypatched_backend
    try:
        params = AbstractionParams(tau=0.71, N=0, theta=0.0217632270402651,
                                   lambda_u=0.1305793622414369,
                                   epsilon=0.3, M=24.828931723034625)
        xi0 = StateFunction.constant([0.0], DELTA, 11)
        t0 = time.perf_counter()
        _, report = build(sys_, params, xi0)
        return time.perf_counter() - t0, report
    finally:
        K._ACTIVE = old


def main():
    calls = int(sys.argv[1]) if len(sys.argv) > 1 else 200
    sys_ = make_system()
    backends = ["numpy"] + (["numba"] if _HAVE_NUMBA else [])

    print(f"single integrate_step (tau=0.71, 284 RK4 steps), "
          f"mean over {calls} calls:")
    singles = {}
    for be in backends:
        singles[be] = bench_single_calls(sys_, be, calls)
        print(f"  {be:6s} {singles[be] * 1e3:8.3f} ms/call")
    if len(singles) == 2:
        print(f"  speedup {singles['numpy'] / singles['numba']:.1f}x")

    print("full abstraction build (65 states x 7 labels):")
    for be in backends:
        dt, report = bench_build(sys_, be)
        print(f"  {be:6s} {dt:8.2f} s "
              f"({report.num_transitions} transitions)")


if __name__ == "__main__":
    main()
