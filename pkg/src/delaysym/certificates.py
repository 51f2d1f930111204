"""Comparison-function certificates and sampled falsification checks.

The stability certificate (beta, gamma) is user-supplied and *validated*
by simulation probes, never derived: for sampled pairs of initial segments
and input sequences the incremental bound

    ||x_t(xi1,u1) - x_t(xi2,u2)||_inf <= beta(||xi1-xi2||_inf, t) + gamma(du)

is evaluated at every sampling instant, where du is the largest input
deviation over the elapsed segments.  Violations are reported with full
witnesses; an empty report is evidence, not proof.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import (
    DriverDerivativeUnstableError,
    NoDecayRateError,
    ShapeError,
)
from .system import (
    PiecewiseConstantInput,
    StateFunction,
    TimeDelaySystem,
    evaluate_rhs,
    trajectory,
)
from .quantization import input_labels


@dataclass(frozen=True)
class KFunction:
    """Class-K comparison function c * s**exponent (c > 0, exponent > 0)."""

    c: float
    exponent: float = 1.0

    def __post_init__(self):
        if self.c <= 0 or self.exponent <= 0:
            raise ShapeError("K function needs positive gain and exponent")

    def __call__(self, s: float) -> float:
        return self.c * s ** self.exponent

    def invert(self, v: float) -> float:
        return (v / self.c) ** (1.0 / self.exponent)


@dataclass(frozen=True)
class KLFunction:
    """Class-KL bound C * s * exp(-sigma * t) with C >= 1, sigma > 0."""

    C: float
    sigma: float

    def __post_init__(self):
        if self.C < 1.0 or self.sigma <= 0:
            raise ShapeError("KL function needs C >= 1 and sigma > 0")

    def __call__(self, s: float, t: float) -> float:
        return self.C * s * math.exp(-self.sigma * t)


@dataclass(frozen=True)
class DeltaIssCertificate:
    beta: KLFunction
    gamma: KFunction


@dataclass(frozen=True)
class LKFunctional:
    """Candidate incremental Liapunov-Krasovskii functional.

    V maps a pair of history segments to a nonnegative value; Ma is the
    comparison functional appearing in both the sandwich and the decrease
    condition, with gauges gauge_lower(|x(0)|) <= Ma(x) <= gauge_upper(|x|_inf).
    """

    V: Callable[[StateFunction, StateFunction], float]
    Ma: Callable[[StateFunction], float]
    alpha1: KFunction
    alpha2: KFunction
    alpha3: KFunction
    rho: KFunction
    gauge_lower: KFunction
    gauge_upper: KFunction


@dataclass
class FalsificationReport:
    name: str
    probes: int
    seed: int
    checked: int = 0
    violations: list = field(default_factory=list)
    min_margin: float = math.inf

    @property
    def ok(self) -> bool:
        return not self.violations

    def record(self, margin: float, **witness):
        self.checked += 1
        if margin < self.min_margin:
            self.min_margin = margin
        if margin < 0:
            self.violations.append(dict(margin=margin, **witness))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "probes": self.probes,
            "seed": self.seed,
            "checked": self.checked,
            "violations": self.violations,
            "min_margin": self.min_margin,
            "ok": self.ok,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True, default=float)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


@dataclass(frozen=True)
class SamplingPlan:
    """Deterministic probe plan for the falsification checks.

    grid_count samples per history segment; tau and substeps define the
    per-segment integration; lambda_u the input label lattice probes draw
    from; initial_kinds selects the sampled function classes.
    """

    count: int
    horizon_steps: int
    tau: float
    substeps: int
    seed: int
    lambda_u: float
    grid_count: int = 17
    initial_kinds: tuple = ("constant", "kink")


def _sample_initial(rng, kind: str, sys: TimeDelaySystem, count: int) -> StateFunction:
    lo, hi = sys.state_box[:, 0], sys.state_box[:, 1]
    if kind == "constant":
        return StateFunction.constant(rng.uniform(lo, hi), sys.delta, count)
    if kind == "kink":
        va, vm, vb = (rng.uniform(lo, hi) for _ in range(3))
        kpos = int(rng.integers(1, count - 1))
        samples = np.empty((count, sys.n))
        for j in range(count):
            if j <= kpos:
                fr = j / kpos
                samples[j] = (1 - fr) * va + fr * vm
            else:
                fr = (j - kpos) / (count - 1 - kpos)
                samples[j] = (1 - fr) * vm + fr * vb
        return StateFunction(samples, sys.delta / (count - 1))
    raise ShapeError(f"unknown initial function kind {kind!r}")


def _sample_input(rng, labels: np.ndarray, segments: int, tau: float):
    rows = rng.integers(0, labels.shape[0], size=segments)
    return PiecewiseConstantInput(labels[rows], tau)


def check_delta_iss(sys: TimeDelaySystem, cert: DeltaIssCertificate,
                    plan: SamplingPlan) -> FalsificationReport:
    """Sampled falsification of the incremental stability inequality."""
    rng = np.random.default_rng(plan.seed)
    labels = input_labels(sys.input_box, plan.lambda_u)
    report = FalsificationReport("delta-iss", plan.count, plan.seed)
    for p in range(plan.count):
        kind1 = plan.initial_kinds[int(rng.integers(len(plan.initial_kinds)))]
        kind2 = plan.initial_kinds[int(rng.integers(len(plan.initial_kinds)))]
        xi1 = _sample_initial(rng, kind1, sys, plan.grid_count)
        xi2 = _sample_initial(rng, kind2, sys, plan.grid_count)
        u1 = _sample_input(rng, labels, plan.horizon_steps, plan.tau)
        u2 = _sample_input(rng, labels, plan.horizon_steps, plan.tau)
        d0 = xi1.sup_distance(xi2)
        try:
            run1 = trajectory(sys, xi1, u1, plan.horizon_steps, plan.substeps)
            run2 = trajectory(sys, xi2, u2, plan.horizon_steps, plan.substeps)
        except Exception as exc:
            if hasattr(exc, "context"):
                exc.context["probe"] = p
            raise
        for k in range(plan.horizon_steps + 1):
            t = k * plan.tau
            lhs = run1[k].sup_distance(run2[k])
            du = 0.0
            if k > 0:
                du = float(np.max(np.abs(u1.values[:k] - u2.values[:k])))
            rhs = cert.beta(d0, t) + (cert.gamma(du) if du > 0 else 0.0)
            report.record(rhs - lhs, probe=p, step=k, lhs=lhs, rhs=rhs,
                          initial_gap=d0, input_gap=du)
    return report


class DriverEstimate(NamedTuple):
    value: float
    spread: float
    estimates: tuple


def _shift_extend(x: StateFunction, f: np.ndarray, theta: float) -> StateFunction:
    """History segment advanced by theta: shifted where the past is known,
    linearly extended with slope f on the last theta of the window."""
    ts = x.times
    out = np.empty_like(x.samples)
    for j, s in enumerate(ts):
        if s < -theta:
            out[j] = x.value(s + theta)
        else:
            out[j] = x.at_zero() + (s + theta) * f
    return StateFunction(out, x.grid_step)


def driver_derivative(V, x1: StateFunction, x2: StateFunction, u1, u2,
                      sys: TimeDelaySystem,
                      theta_ladder=(1e-2, 1e-3, 1e-4)) -> DriverEstimate:
    """Upper right-hand derivative of V along solutions, by the
    shift-and-extend construction evaluated on a decreasing theta ladder."""
    if any(b >= a for a, b in zip(theta_ladder, theta_ladder[1:])) or theta_ladder[-1] <= 0:
        raise ShapeError("theta ladder must decrease strictly to 0")
    f1 = evaluate_rhs(sys, x1, u1)
    f2 = evaluate_rhs(sys, x2, u2)
    base = V(x1, x2)
    estimates = []
    for theta in theta_ladder:
        v = V(_shift_extend(x1, f1, theta), _shift_extend(x2, f2, theta))
        estimates.append((v - base) / theta)
    spreads = [abs(b - a) for a, b in zip(estimates, estimates[1:])]
    if len(spreads) >= 2 and spreads[-1] > spreads[-2] + 1e-12:
        raise DriverDerivativeUnstableError(
            "finite-difference ladder is not converging",
            estimates=tuple(estimates))
    return DriverEstimate(estimates[-1], spreads[-1] if spreads else 0.0,
                          tuple(estimates))


def check_lk_functional(sys: TimeDelaySystem, lk: LKFunctional,
                        plan: SamplingPlan, slack: float = 0.0,
                        theta_ladder=(1e-2, 1e-3, 1e-4)) -> FalsificationReport:
    """Sampled falsification of the sandwich and decrease conditions."""
    rng = np.random.default_rng(plan.seed)
    labels = input_labels(sys.input_box, plan.lambda_u)
    report = FalsificationReport("lk-functional", plan.count, plan.seed)
    for p in range(plan.count):
        kind1 = plan.initial_kinds[int(rng.integers(len(plan.initial_kinds)))]
        kind2 = plan.initial_kinds[int(rng.integers(len(plan.initial_kinds)))]
        x1 = _sample_initial(rng, kind1, sys, plan.grid_count)
        x2 = _sample_initial(rng, kind2, sys, plan.grid_count)
        u1 = labels[int(rng.integers(labels.shape[0]))]
        u2 = labels[int(rng.integers(labels.shape[0]))]
        w = x1.sub(x2)
        v = lk.V(x1, x2)
        ma = lk.Ma(w)
        p0 = float(np.max(np.abs(w.at_zero())))
        report.record(v - lk.alpha1(p0) + slack, probe=p, cond="i-lower",
                      V=v, bound=lk.alpha1(p0))
        report.record(lk.alpha2(ma) - v + slack, probe=p, cond="i-upper",
                      V=v, bound=lk.alpha2(ma))
        report.record(ma - lk.gauge_lower(p0) + slack, probe=p,
                      cond="gauge-lower", Ma=ma)
        report.record(lk.gauge_upper(w.sup_norm()) - ma + slack, probe=p,
                      cond="gauge-upper", Ma=ma)
        if ma >= lk.rho(float(np.max(np.abs(u1 - u2)))):
            est = driver_derivative(lk.V, x1, x2, u1, u2, sys, theta_ladder)
            report.record(-lk.alpha3(ma) - est.value + slack, probe=p,
                          cond="ii-decrease", derivative=est.value,
                          bound=-lk.alpha3(ma), spread=est.spread)
    return report


def halanay_rate(a: float, b: float, delta: float) -> float:
    """Unique sigma in (0, a-b] with sigma = a - b*exp(sigma*delta), by
    bisection to 1e-12.  Requires a > b >= 0."""
    if b < 0 or a <= b:
        raise NoDecayRateError(f"need a > b >= 0, got a={a}, b={b}")
    if b == 0 or delta == 0:
        return a - b
    lo, hi = 0.0, a - b
    for _ in range(200):
        if hi - lo <= 1e-12:
            break
        mid = 0.5 * (lo + hi)
        if a - b * math.exp(mid * delta) - mid > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def halanay_certificate(a: float, b: float, delta: float,
                        pad: float = 1.0) -> DeltaIssCertificate:
    """Certificate for the scalar pair dx/dt = -a x + b x(t-delta) + u.

    The decay rate is the Halanay root; the amplitude carries the factor
    exp(sigma*delta) so the bound covers the full history window (the raw
    pointwise bound fails it on [0, delta)).  gamma is the steady-state
    input gain s/(a-b).
    """
    sigma = halanay_rate(a, b, delta)
    return DeltaIssCertificate(
        beta=KLFunction(C=pad * math.exp(sigma * delta), sigma=sigma),
        gamma=KFunction(c=1.0 / (a - b)),
    )
