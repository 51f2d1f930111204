"""Lattices, hat-spline bases, and the quantized interpolation operator.

A sampled function on [a, b] is reduced to a finite identity in two steps:
interpolate at the N+2 spline nodes, then round each node amplitude to the
nearest point of a spacing-2*theta lattice anchored at the origin.  The
sup-norm defect of the composite map is bounded by

    Lambda(N, theta, M) = h^2 M / 8 + (N + 2) theta,   h = (b - a)/(N + 1)

for any function whose second derivative is bounded by M.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BasisError, DelaysymError, ShapeError
from .system import StateFunction

_TOL = 1e-9


def lattice_indices(lo: float, hi: float, spacing: float):
    """Integer index range [kmin, kmax] of lattice points k*spacing in [lo, hi]."""
    if spacing <= 0:
        raise ShapeError("lattice spacing must be positive")
    scale = max(1.0, abs(lo), abs(hi))
    kmin = math.ceil(lo / spacing - _TOL * scale)
    kmax = math.floor(hi / spacing + _TOL * scale)
    return kmin, kmax


def lattice_points(box, spacing: float) -> np.ndarray:
    """All multiples of ``spacing`` inside the box, in lexicographic index
    order.  Returns an (L, n) array; L may be zero (with a warning)."""
    box = np.asarray(box, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2:
        raise ShapeError("box must be (n, 2)")
    ranges = []
    for lo, hi in box:
        kmin, kmax = lattice_indices(lo, hi, spacing)
        ranges.append(range(kmin, kmax + 1))
    idx = list(itertools.product(*ranges))
    if not idx:
        warnings.warn("empty-lattice: no multiple of the spacing inside the box")
        return np.zeros((0, box.shape[0]))
    return np.array(idx, dtype=float) * spacing


def covering_radius(box, spacing: float) -> float:
    """Largest sup-norm distance from a box point to the nearest in-box
    lattice point (infinite when some axis holds no lattice point)."""
    box = np.asarray(box, dtype=float)
    worst = 0.0
    for lo, hi in box:
        kmin, kmax = lattice_indices(lo, hi, spacing)
        if kmin > kmax:
            return math.inf
        first, last = kmin * spacing, kmax * spacing
        r = max(first - lo, hi - last, 0.0)
        if kmax > kmin:
            r = max(r, spacing / 2.0)
        worst = max(worst, r)
    return worst


@dataclass(frozen=True)
class Lattice:
    """Integer-anchored grid of spacing ``spacing`` clipped to a box."""

    box: np.ndarray
    spacing: float

    def __post_init__(self):
        object.__setattr__(self, "box", np.asarray(self.box, dtype=float))

    def points(self) -> np.ndarray:
        return lattice_points(self.box, self.spacing)

    def covering_radius(self) -> float:
        return covering_radius(self.box, self.spacing)


@dataclass(frozen=True)
class SplineBasis:
    """Piecewise-linear hat functions on [a, b] with N interior nodes.

    Node i sits at a + i*h, h = (b-a)/(N+1), i = 0..N+1.  The shared sample
    grid refines each node interval ``refine`` times so that node times are
    sample times of the functions being quantized.
    """

    N: int
    a: float
    b: float
    refine: int = 4

    def __post_init__(self):
        if self.N < 0 or self.refine < 1 or self.b <= self.a:
            raise ShapeError("need N >= 0, refine >= 1 and b > a")

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.N + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.N + 2)

    @property
    def grid_step(self) -> float:
        return self.h / self.refine

    @property
    def num_samples(self) -> int:
        return self.refine * (self.N + 1) + 1

    def hat(self, i: int, t: float) -> float:
        """Value of hat function s_i at t."""
        if not 0 <= i <= self.N + 1:
            raise BasisError(f"hat index {i} out of range")
        u = (t - self.a) / self.h - i
        return float(max(0.0, 1.0 - abs(u))) if -1.0 <= u <= 1.0 else 0.0

    def key(self):
        return (self.N, self.a, self.b, self.refine)


def lambda_bound(N: int, theta: float, M: float, length: float) -> float:
    """Quantization error budget h^2 M/8 + (N+2) theta."""
    h = length / (N + 1)
    return h * h * M / 8.0 + (N + 2) * theta


def split_budget(lam: float, M: float, length: float):
    """Smallest N with interpolation error <= lam/2, then theta spending the
    other half.  Returns (N, theta) with lambda_bound(N, theta, M) <= lam."""
    if lam <= 0 or M <= 0 or length <= 0:
        raise ShapeError("budget, curvature bound and length must be positive")
    hmax = math.sqrt(4.0 * lam / M)
    N = max(0, math.ceil(length / hmax - _TOL) - 1)
    while lambda_bound(N, 0.0, M, length) > lam / 2.0:
        N += 1
    theta = (lam / 2.0) / (N + 2)
    return N, theta


@dataclass(frozen=True)
class SymbolicState:
    """Finite identity of a quantized piecewise-linear function.

    indices[i][d] is the integer lattice index of node i, axis d; the node
    amplitude it denotes is 2*theta*indices[i][d].  Equality and hashing use
    the index vector, basis geometry, and theta only.
    """

    indices: tuple
    basis: SplineBasis
    theta: float
    clamped: bool = field(default=False, compare=False)

    def __hash__(self):
        return hash((self.indices, self.basis.key(), self.theta))

    def __eq__(self, other):
        if not isinstance(other, SymbolicState):
            return NotImplemented
        return (self.indices == other.indices
                and self.basis.key() == other.basis.key()
                and self.theta == other.theta)

    @property
    def dim(self) -> int:
        return len(self.indices[0])

    def amplitudes(self) -> np.ndarray:
        return 2.0 * self.theta * np.array(self.indices, dtype=float)

    def canonical_id(self) -> str:
        """Axis-major decimal serialization of the index vector."""
        flat = [k[d] for d in range(self.dim) for k in self.indices]
        return ",".join(str(v) for v in flat)

    def sort_key(self):
        return tuple(k[d] for d in range(self.dim) for k in self.indices)

    @classmethod
    def from_canonical_id(cls, text: str, basis: SplineBasis, theta: float,
                          dim: int) -> "SymbolicState":
        flat = [int(v) for v in text.split(",")]
        nn = basis.N + 2
        if len(flat) != nn * dim:
            raise ShapeError("canonical id length does not match basis/dim")
        idx = tuple(tuple(flat[d * nn + i] for d in range(dim)) for i in range(nn))
        return cls(idx, basis, theta)


def _node_samples(y: StateFunction, basis: SplineBasis) -> np.ndarray:
    if y.samples.shape[0] != basis.num_samples:
        raise BasisError(
            f"function has {y.samples.shape[0]} samples, basis grid needs "
            f"{basis.num_samples}")
    if abs(y.grid_step - basis.grid_step) > _TOL * basis.grid_step:
        raise BasisError("function grid step does not match the basis grid")
    return y.samples[::basis.refine]


def interpolate_nodes(y: StateFunction, basis: SplineBasis) -> StateFunction:
    """The plain piecewise-linear interpolant of y at the basis nodes
    (quantization with no lattice rounding)."""
    return decode_amplitudes(_node_samples(y, basis), basis)


def quantize_function(y: StateFunction, basis: SplineBasis, theta: float,
                      box) -> SymbolicState:
    """Round the node samples of y to the spacing-2*theta lattice inside the
    box.  Ties go to the smaller index; out-of-box targets are clamped to
    the nearest in-box lattice point and flagged on the result."""
    if theta <= 0:
        raise ShapeError("theta must be positive (use interpolate_nodes for "
                         "the rounding-free interpolant)")
    box = np.asarray(box, dtype=float)
    vals = _node_samples(y, basis)
    spacing = 2.0 * theta
    ks = np.ceil(vals / spacing - 0.5).astype(np.int64)
    clamped = False
    for d in range(vals.shape[1]):
        kmin, kmax = lattice_indices(box[d, 0], box[d, 1], spacing)
        if kmin > kmax:
            raise DelaysymError(
                f"empty-lattice: no spacing-{spacing} point inside box axis {d}")
        col = ks[:, d]
        if np.any(col < kmin) or np.any(col > kmax):
            clamped = True
            ks[:, d] = np.clip(col, kmin, kmax)
    indices = tuple(tuple(int(v) for v in row) for row in ks)
    return SymbolicState(indices, basis, theta, clamped=clamped)


def decode_amplitudes(amps: np.ndarray, basis: SplineBasis) -> StateFunction:
    """Sample the PL function with the given node amplitudes on the shared grid."""
    amps = np.asarray(amps, dtype=float)
    P = basis.refine
    k = basis.num_samples
    out = np.empty((k, amps.shape[1]))
    for j in range(k):
        i0, rem = divmod(j, P)
        if i0 >= basis.N + 1:
            out[j] = amps[-1]
        else:
            fr = rem / P
            out[j] = (1.0 - fr) * amps[i0] + fr * amps[i0 + 1]
    return StateFunction(out, basis.grid_step)


def decode(sym: SymbolicState) -> StateFunction:
    """The piecewise-linear function a SymbolicState denotes."""
    return decode_amplitudes(sym.amplitudes(), sym.basis)


def sup_distance(p: SymbolicState, q: SymbolicState) -> float:
    """Exact sup-norm distance between decoded states (attained at nodes)."""
    if p.basis.key() != q.basis.key() or p.theta != q.theta:
        raise BasisError("states come from different bases")
    diff = np.array(p.indices, dtype=np.int64) - np.array(q.indices, dtype=np.int64)
    return 2.0 * p.theta * float(np.max(np.abs(diff))) if diff.size else 0.0


def input_labels(input_box, lambda_u: float, tau: float | None = None) -> np.ndarray:
    """Constant-input label values: the spacing-2*lambda_u lattice inside the
    input box (always contains the null input)."""
    if lambda_u <= 0:
        raise ShapeError("lambda_u must be positive")
    pts = lattice_points(np.asarray(input_box, dtype=float), 2.0 * lambda_u)
    if pts.shape[0] == 0:
        raise DelaysymError("empty-lattice: input box lost the origin")
    return pts
