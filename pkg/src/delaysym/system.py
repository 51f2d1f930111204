"""Time-delay system representation and simulation.

The state of the system at time t is the history segment over the last
delay window, held as uniform samples.  Solutions under piecewise-constant
inputs are produced by the method of steps: one RK4 march per input
segment, with the delayed argument served from the stored history (see
``kernels``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    IntegrationDivergenceError,
    RhsEvaluationError,
    ShapeError,
    StateEscapeError,
)
from . import kernels

_REL_TOL = 1e-12
_ALIGN_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class StateFunction:
    """Continuous function on [-delta, 0], sampled on a uniform grid.

    samples : (K+1, n) array; samples[0] is the value at -delta,
              samples[K] the value at 0.
    grid_step : spacing of the sample grid.
    """

    samples: np.ndarray
    grid_step: float

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 2:
            raise ShapeError("state function needs >= 2 samples of shape (K+1, n)")
        if not np.all(np.isfinite(arr)):
            raise ShapeError("state function samples must be finite")
        if self.grid_step <= 0:
            raise ShapeError("grid_step must be positive")
        object.__setattr__(self, "samples", arr)

    @property
    def delta(self) -> float:
        return self.grid_step * (self.samples.shape[0] - 1)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def times(self) -> np.ndarray:
        k = self.samples.shape[0]
        return -self.delta + self.grid_step * np.arange(k)

    @classmethod
    def constant(cls, value, delta: float, count: int) -> "StateFunction":
        v = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(np.tile(v, (count, 1)), delta / (count - 1))

    @classmethod
    def from_callable(cls, fn, delta: float, count: int) -> "StateFunction":
        ts = np.linspace(-delta, 0.0, count)
        vals = np.stack([np.atleast_1d(np.asarray(fn(t), dtype=float)) for t in ts])
        return cls(vals, delta / (count - 1))

    def value(self, s: float) -> np.ndarray:
        """Linear interpolation at s in [-delta, 0]."""
        pos = (s + self.delta) / self.grid_step
        pos = min(max(pos, 0.0), self.samples.shape[0] - 1.0)
        i = int(np.floor(pos))
        i = min(i, self.samples.shape[0] - 2)
        fr = pos - i
        return (1.0 - fr) * self.samples[i] + fr * self.samples[i + 1]

    def at_zero(self) -> np.ndarray:
        return self.samples[-1]

    def at_delay(self) -> np.ndarray:
        return self.samples[0]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def sub(self, other: "StateFunction") -> "StateFunction":
        if (self.samples.shape != other.samples.shape
                or abs(self.grid_step - other.grid_step) > _ALIGN_TOL * self.grid_step):
            raise ShapeError("state functions live on different grids")
        return StateFunction(self.samples - other.samples, self.grid_step)

    def sup_distance(self, other: "StateFunction") -> float:
        return self.sub(other).sup_norm()


def _check_span(x: StateFunction, delta: float):
    if abs(x.delta - delta) > _REL_TOL * max(1.0, abs(delta)) + _REL_TOL:
        raise ShapeError(
            f"state function spans {x.delta}, system delay is {delta}")


@dataclass(frozen=True)
class PiecewiseConstantInput:
    """Input held constant on consecutive segments of equal length."""

    values: np.ndarray  # (k, m)
    segment_length: float

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if self.segment_length <= 0:
            raise ShapeError("segment_length must be positive")
        object.__setattr__(self, "values", arr)

    @property
    def segments(self) -> int:
        return self.values.shape[0]


class RhsSpec:
    """Right-hand side from the built-in catalogue.

    Catalogue forms (x0 = x_t(0), xd = x_t(-delta)):
      linear      f = a0 x0 + a1 xd + b u
      tanh        f = a0 x0 + a1 tanh(xd) + b u
      polynomial  f_i = sum of coef * prod(z^powers), z = (x0, xd, u)
    """

    def __init__(self, kind, a0, a1, b, pcoef=None, pexpo=None, pout=None):
        self.kind = kind
        self.a0 = np.asarray(a0, dtype=float)
        self.a1 = np.asarray(a1, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.a0.ndim != 2 or self.a0.shape != self.a1.shape:
            raise ShapeError("a0 and a1 must be equal square matrices")
        if self.b.ndim != 2 or self.b.shape[0] != self.a0.shape[0]:
            raise ShapeError("b must be (n, m)")
        self.pcoef = np.zeros(0) if pcoef is None else np.asarray(pcoef, dtype=float)
        self.pexpo = (np.zeros((0, 2 * self.n + self.m), dtype=np.int64)
                      if pexpo is None else np.asarray(pexpo, dtype=np.int64))
        self.pout = np.zeros(0, dtype=np.int64) if pout is None else np.asarray(pout, dtype=np.int64)

    @property
    def n(self) -> int:
        return self.a0.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    @classmethod
    def linear(cls, a0, a1, b) -> "RhsSpec":
        return cls(kernels.RHS_LINEAR, a0, a1, b)

    @classmethod
    def tanh(cls, a0, a1, b) -> "RhsSpec":
        return cls(kernels.RHS_TANH, a0, a1, b)

    @classmethod
    def polynomial(cls, n: int, m: int, terms) -> "RhsSpec":
        """terms: iterable of (out_index, coef, powers) with len(powers) == 2n+m."""
        pcoef, pexpo, pout = [], [], []
        for out, coef, powers in terms:
            powers = list(powers)
            if len(powers) != 2 * n + m:
                raise ShapeError("polynomial term powers must have length 2n+m")
            pout.append(int(out))
            pcoef.append(float(coef))
            pexpo.append(powers)
        return cls(kernels.RHS_POLY, np.zeros((n, n)), np.zeros((n, n)),
                   np.zeros((n, m)), np.array(pcoef),
                   np.array(pexpo, dtype=np.int64).reshape(len(pcoef), 2 * n + m),
                   np.array(pout, dtype=np.int64))

    def point_eval(self, x0, xd, u) -> np.ndarray:
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        xd = np.atleast_1d(np.asarray(xd, dtype=float))
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if x0.shape != (self.n,) or xd.shape != (self.n,) or u.shape != (self.m,):
            raise ShapeError("rhs argument dimensions do not match the system")
        if self.kind == kernels.RHS_LINEAR:
            return self.a0 @ x0 + self.a1 @ xd + self.b @ u
        if self.kind == kernels.RHS_TANH:
            return self.a0 @ x0 + self.a1 @ np.tanh(xd) + self.b @ u
        z = np.concatenate([x0, xd, u])
        out = np.zeros(self.n)
        for t in range(self.pcoef.shape[0]):
            out[self.pout[t]] += self.pcoef[t] * np.prod(z ** self.pexpo[t])
        return out

    def kernel_args(self):
        return (self.kind, self.a0, self.a1, self.b,
                self.pcoef, self.pexpo, self.pout)


def _box(arr, name) -> np.ndarray:
    box = np.asarray(arr, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2:
        raise ShapeError(f"{name} must be an (n, 2) array of [lo, hi] rows")
    if not np.all(np.isfinite(box)) or np.any(box[:, 0] > box[:, 1]):
        raise ShapeError(f"{name} must be bounded with lo <= hi")
    return box


def in_box(v, box, tol=_ALIGN_TOL) -> bool:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    return bool(np.all(v >= box[:, 0] - tol) and np.all(v <= box[:, 1] + tol))


@dataclass(frozen=True, eq=False)
class TimeDelaySystem:
    """Single-delay system dx/dt = f(x_t, u(t - r)) on a bounded box.

    delta : state delay (> 0)
    r : input delay (bookkeeping only; inputs are constant per segment)
    rhs : RhsSpec from the catalogue, or any callable (StateFunction, u) -> array
    state_box, input_box : (n, 2) / (m, 2) bounds; input box must contain 0
    kappa : Lipschitz constant of f on the boxed domain
    embed_inflation : escape threshold = state box inflated about its
        center by this factor per side
    """

    delta: float
    r: float
    rhs: object
    state_box: np.ndarray
    input_box: np.ndarray
    kappa: float
    embed_inflation: float = 1.25

    def __post_init__(self):
        if self.delta <= 0:
            raise ShapeError("state delay must be positive")
        if self.r < 0:
            raise ShapeError("input delay must be nonnegative")
        object.__setattr__(self, "state_box", _box(self.state_box, "state_box"))
        object.__setattr__(self, "input_box", _box(self.input_box, "input_box"))
        if not in_box(np.zeros(self.input_box.shape[0]), self.input_box):
            raise ShapeError("input box must contain the origin")
        if isinstance(self.rhs, RhsSpec):
            if self.rhs.n != self.state_box.shape[0] or self.rhs.m != self.input_box.shape[0]:
                raise ShapeError("rhs dimensions do not match the boxes")
            f00 = self.rhs.point_eval(np.zeros(self.n), np.zeros(self.n),
                                      np.zeros(self.m))
            if np.max(np.abs(f00)) > 1e-12:
                raise ShapeError("rhs must vanish at (0, 0)")

    @property
    def n(self) -> int:
        return self.state_box.shape[0]

    @property
    def m(self) -> int:
        return self.input_box.shape[0]

    @property
    def embed_box(self) -> np.ndarray:
        mid = self.state_box.mean(axis=1)
        half = (self.state_box[:, 1] - self.state_box[:, 0]) / 2.0
        lo = mid - self.embed_inflation * half
        hi = mid + self.embed_inflation * half
        return np.stack([lo, hi], axis=1)


def evaluate_rhs(sys: TimeDelaySystem, x: StateFunction, u) -> np.ndarray:
    """f(x, u) for a full history segment and an input value."""
    _check_span(x, sys.delta)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (sys.m,):
        raise ShapeError("input dimension mismatch")
    if isinstance(sys.rhs, RhsSpec):
        out = sys.rhs.point_eval(x.at_zero(), x.at_delay(), u)
    else:
        out = np.atleast_1d(np.asarray(sys.rhs(x, u), dtype=float))
        if out.shape != (sys.n,):
            raise ShapeError("rhs returned wrong dimension")
    if not np.all(np.isfinite(out)):
        raise RhsEvaluationError("rhs produced a non-finite value")
    return out


def _plan_steps(xi: StateFunction, tau: float, substeps: int):
    if tau <= 0:
        raise ShapeError("tau must be positive")
    if substeps < 1:
        raise ShapeError("substeps must be >= 1")
    dt = tau / substeps
    k_sub = xi.grid_step / dt
    if abs(k_sub - round(k_sub)) > _ALIGN_TOL or round(k_sub) < 1:
        raise ShapeError(
            f"integration step {dt} must divide the history grid step "
            f"{xi.grid_step} (got ratio {k_sub})")
    return dt, int(round(k_sub))


def integrate_step(sys: TimeDelaySystem, xi: StateFunction, u, tau: float,
                   substeps: int, force_backend=None):
    """Advance one input segment of length tau under constant input u.

    Returns (x_tau, (times, values)): the history segment at time tau and
    the dense trajectory on [0, tau] at the integration step.
    Raises StateEscapeError / IntegrationDivergenceError on failure.
    """
    _check_span(xi, sys.delta)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (sys.m,):
        raise ShapeError("input dimension mismatch")
    if not in_box(u, sys.input_box):
        raise ShapeError("input value outside the input box")
    dt, k_sub = _plan_steps(xi, tau, substeps)
    box = sys.embed_box

    if isinstance(sys.rhs, RhsSpec):
        kind, a0, a1, b, pcoef, pexpo, pout = sys.rhs.kernel_args()
        traj, fder, status, stop = kernels.rk4_dde(
            np.ascontiguousarray(xi.samples), k_sub, dt, substeps,
            kind, a0, a1, b, pcoef, pexpo, pout,
            u, box[:, 0].copy(), box[:, 1].copy(),
            force_backend=force_backend)
    else:
        traj, fder, status, stop = _integrate_generic(
            sys, xi, u, dt, substeps, k_sub, box)

    if status == 2:
        raise IntegrationDivergenceError(
            "trajectory became non-finite", time=stop * dt)
    if status == 1:
        raise StateEscapeError(
            "trajectory left the embedding box",
            time=stop * dt, state=traj[stop].copy())

    H = xi.samples.shape[0] - 1
    idx = substeps - (H - np.arange(H + 1)) * k_sub
    if idx[0] < 0:
        # horizon shorter than the delay window: stitch from initial history,
        # which requires tau to be a multiple of the history grid step
        seg = np.empty((H + 1, sys.n))
        for i, j in enumerate(idx):
            if j >= 0:
                seg[i] = traj[j]
            else:
                p = j / k_sub
                if abs(p - round(p)) > _ALIGN_TOL:
                    raise ShapeError(
                        "tau below the delay must be a multiple of the grid step")
                seg[i] = xi.samples[H + int(round(p))]
    else:
        seg = traj[idx]
    x_tau = StateFunction(seg.copy(), xi.grid_step)
    times = dt * np.arange(substeps + 1)
    return x_tau, (times, traj)


def _integrate_generic(sys, xi, u, dt, steps, k_sub, box):
    """Python mirror of the kernel for arbitrary functional rhs: every stage
    evaluation receives the full reconstructed history segment."""
    hist = xi.samples
    H = hist.shape[0] - 1
    n = sys.n
    m2 = 2 * H * k_sub
    traj = np.empty((steps + 1, n))
    fder = np.empty((steps + 1, n))
    traj[0] = hist[H]

    def read(d2):
        # value of x at time (d2 * dt / 2), d2 in half-step units
        if d2 >= 0:
            if d2 % 2 == 0:
                return traj[d2 // 2]
            jj = (d2 - 1) // 2
            return (0.5 * (traj[jj] + traj[jj + 1])
                    + 0.125 * dt * (fder[jj] - fder[jj + 1]))
        pos = H + d2 / (2.0 * k_sub)
        inear = int(round(pos))
        if abs(pos - inear) < 1e-9:
            return hist[inear]
        if H >= 3:
            base = min(max(int(np.floor(pos)) - 1, 0), H - 3)
            xl = pos - base
            out = np.zeros(n)
            for kk in range(4):
                w = 1.0
                for jl in range(4):
                    if jl != kk:
                        w *= (xl - jl) / (kk - jl)
                out += w * hist[base + kk]
            return out
        i0 = min(max(int(np.floor(pos)), 0), H - 1)
        fr = pos - i0
        return (1.0 - fr) * hist[i0] + fr * hist[i0 + 1]

    def segment(d2_top, top_value):
        seg = np.empty((H + 1, n))
        for i in range(H):
            seg[i] = read(d2_top - 2 * k_sub * (H - i))
        seg[H] = top_value
        return StateFunction(seg, xi.grid_step)

    status, stop = 0, steps
    for j in range(steps + 1):
        ks = []
        for s, (a, sidx) in enumerate(((0.0, 0), (0.5, 1), (0.5, 1), (1.0, 2))):
            ys = traj[j] + dt * a * (ks[-1] if ks else 0.0)
            seg = segment(2 * j + sidx, ys)
            k = np.atleast_1d(np.asarray(sys.rhs(seg, u), dtype=float))
            if s == 0:
                fder[j] = k
                if j == steps:
                    break
            ks.append(k)
        if j == steps:
            break
        xn = traj[j] + dt / 6.0 * (ks[0] + 2 * ks[1] + 2 * ks[2] + ks[3])
        traj[j + 1] = xn
        if not np.all(np.isfinite(xn)):
            status, stop = 2, j + 1
            break
        if np.any(xn < box[:, 0]) or np.any(xn > box[:, 1]):
            status, stop = 1, j + 1
            break
    return traj, fder, status, stop


def trajectory(sys: TimeDelaySystem, xi0: StateFunction,
               inp: PiecewiseConstantInput, steps: int, substeps: int):
    """States [x_0, x_tau, ..., x_{k tau}] reached by chaining segments."""
    if inp.segments < steps:
        raise ShapeError(f"input has {inp.segments} segments, need {steps}")
    out = [xi0]
    x = xi0
    for seg in range(steps):
        try:
            x, _ = integrate_step(sys, x, inp.values[seg], inp.segment_length,
                                  substeps)
        except (StateEscapeError, IntegrationDivergenceError) as exc:
            exc.context["segment"] = seg
            raise
        out.append(x)
    return out
