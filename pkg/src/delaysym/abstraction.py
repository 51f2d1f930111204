"""Fixed-point construction of the symbolic model.

Starting from the quantized initial segment, every (state, input label)
pair is integrated for one sampling period and the arrival segment is
quantized back onto the spline lattice; the loop runs until no new state
appears.  The state set is contained in the finite set of all lattice
spline combinations, which bounds the iteration count.

Transitions from distinct frontier states are independent, so each round
may fan out over a thread pool; results are committed in (state, label)
order, which makes the construction deterministic for any thread count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BoundViolationError, ShapeError
from .parameters import AbstractionParams
from .quantization import (
    SplineBasis,
    decode,
    lattice_indices,
    input_labels,
    quantize_function,
)
from .system import StateFunction, TimeDelaySystem, integrate_step
from .transition_system import TransitionSystem


def integration_plan(tau: float, grid_step: float, min_per_cell: int = 2):
    """Total RK4 steps over one sampling period, and steps per grid cell,
    such that the step divides both tau and the grid exactly."""
    ratio = tau / grid_step
    frac = Fraction(ratio).limit_denominator(10 ** 4)
    if abs(float(frac) - ratio) > 1e-9 * max(1.0, ratio):
        raise ShapeError(
            f"tau/grid ratio {ratio} is not a small rational; pick tau on a "
            f"grid commensurate with the spline sample step")
    p, q = frac.numerator, frac.denominator
    per_cell = ((min_per_cell + q - 1) // q) * q
    return p * (per_cell // q), per_cell


def state_count_bound(params: AbstractionParams, state_box) -> int:
    """Cardinality of all lattice spline combinations: |[X]_{2 theta}|^(N+2)."""
    box = np.asarray(state_box, dtype=float)
    per_node = 1
    for lo, hi in box:
        kmin, kmax = lattice_indices(lo, hi, 2.0 * params.theta)
        per_node *= max(0, kmax - kmin + 1)
    return per_node ** (params.N + 2)


@dataclass
class BuildReport:
    num_states: int = 0
    num_transitions: int = 0
    num_labels: int = 0
    iterations: int = 0
    state_bound: int = 0
    residual_max: float = 0.0
    residual_bound: float = 0.0
    curvature_estimate: float = 0.0
    curvature_declared: float = 0.0
    clamped: int = 0
    input_covering_radius: float = 0.0
    lambda_u: float = 0.0
    wall_time: float = 0.0
    assumption_lines: list = field(default_factory=list)

    def render(self) -> str:
        """Deterministic report body; wall time is deliberately left out so
        identical builds emit identical bytes."""
        lines = [
            "symbolic-model-report 1",
            f"states {self.num_states}",
            f"transitions {self.num_transitions}",
            f"labels {self.num_labels}",
            f"iterations {self.iterations}",
            f"state-bound {self.state_bound}",
            f"residual-max {self.residual_max!r}",
            f"residual-bound {self.residual_bound!r}",
            f"curvature-estimate {self.curvature_estimate!r}",
            f"curvature-declared {self.curvature_declared!r}",
            f"boundary-clamps {self.clamped}",
            f"input-covering-radius {self.input_covering_radius!r}",
            f"input-covering-target {self.lambda_u!r}",
        ]
        for ln in self.assumption_lines:
            lines.append("check " + ln)
        return "\n".join(lines) + "\n"


def _curvature_estimate(seg: np.ndarray, g: float) -> float:
    if seg.shape[0] < 3:
        return 0.0
    dd = (seg[2:] - 2.0 * seg[1:-1] + seg[:-2]) / (g * g)
    return float(np.max(np.abs(dd)))


def build(sys: TimeDelaySystem, params: AbstractionParams,
          xi0: StateFunction, refine: int = 4, min_per_cell: int = 2,
          threads: int = 1, assumption_lines=None):
    """Run the fixed-point construction; returns (TransitionSystem, BuildReport).

    Aborts with StateEscapeError if a trajectory leaves the embedding box
    and with BoundViolationError if a quantization residual exceeds the
    error budget (the declared curvature bound was too small).
    """
    t0 = time.perf_counter()
    basis = SplineBasis(N=params.N, a=-sys.delta, b=0.0, refine=refine)
    substeps, per_cell = integration_plan(params.tau, basis.grid_step,
                                          min_per_cell)
    labels = input_labels(sys.input_box, params.lambda_u)
    lam = params.lam(sys.delta)

    if xi0.samples.shape[0] != basis.num_samples:
        xi0 = StateFunction.from_callable(xi0.value, sys.delta,
                                          basis.num_samples)
    q0 = quantize_function(xi0, basis, params.theta, sys.state_box)

    ts = TransitionSystem(basis=basis, theta=params.theta, labels=labels)
    ts.set_initial(q0)

    report = BuildReport(
        num_labels=len(labels),
        state_bound=state_count_bound(params, sys.state_box),
        residual_bound=lam,
        curvature_declared=params.M,
        clamped=int(q0.clamped),
        lambda_u=params.lambda_u,
    )
    from .quantization import covering_radius
    report.input_covering_radius = covering_radius(sys.input_box,
                                                   2.0 * params.lambda_u)

    decoded = {q0: decode(q0)}

    def expand(q):
        src = decoded[q]
        out = []
        for li in range(len(labels)):
            z, _ = integrate_step(sys, src, labels[li], params.tau, substeps)
            p = quantize_function(z, basis, params.theta, sys.state_box)
            zdec = decode(p)
            residual = float(np.max(np.abs(z.samples - zdec.samples)))
            curv = _curvature_estimate(z.samples, basis.grid_step)
            out.append((li, p, zdec, residual, curv))
        return out

    frontier = [q0]
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        while frontier:
            report.iterations += 1
            if pool is not None:
                results = list(pool.map(expand, frontier))
            else:
                results = [expand(q) for q in frontier]
            fresh = []
            for q, row in zip(frontier, results):
                for (li, p, zdec, residual, curv) in row:
                    report.residual_max = max(report.residual_max, residual)
                    report.curvature_estimate = max(report.curvature_estimate,
                                                    curv)
                    if residual > lam + 1e-9:
                        raise BoundViolationError(
                            "quantization residual exceeds the error budget; "
                            "the curvature bound M is too small",
                            residual=residual, bound=lam,
                            state=q.canonical_id(), label=li)
                    if p.clamped:
                        report.clamped += 1
                    if p not in ts.states:
                        decoded[p] = zdec
                        fresh.append(p)
                    ts.add_transition(q, li, p)
            frontier = sorted(set(fresh), key=lambda s: s.sort_key())
    finally:
        if pool is not None:
            pool.shutdown()

    report.num_states = len(ts.states)
    report.num_transitions = len(ts.transitions)
    report.wall_time = time.perf_counter() - t0
    if assumption_lines:
        report.assumption_lines = list(assumption_lines)
    ts.validate()
    return ts, report
