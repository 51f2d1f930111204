"""Finite metric transition system over symbolic states, with exporters.

States are SymbolicState values (the output map is the natural inclusion:
a state's output is the piecewise-linear function it denotes).  The
interchange format ``.tsx`` is line-oriented, versioned, sorted, and
round-trips exactly; DOT is for graph viewers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LookupError_, ShapeError
from .quantization import SplineBasis, SymbolicState, decode

_FORMAT_VERSION = 1


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass
class TransitionSystem:
    """Sixtuple (Q, q0, L, ->, O, H) with H the inclusion into function space."""

    basis: SplineBasis
    theta: float
    labels: np.ndarray                     # (L, m) input values
    initial: SymbolicState | None = None
    states: set = field(default_factory=set)
    transitions: set = field(default_factory=set)  # (state, label_idx, state)
    meta: dict = field(default_factory=dict)

    def add_state(self, q: SymbolicState):
        self.states.add(q)

    def add_transition(self, q: SymbolicState, label_idx: int, p: SymbolicState):
        if not 0 <= label_idx < len(self.labels):
            raise LookupError_(f"label index {label_idx} out of range")
        self.states.add(q)
        self.states.add(p)
        self.transitions.add((q, label_idx, p))

    def set_initial(self, q: SymbolicState):
        self.states.add(q)
        self.initial = q

    def successors(self, q: SymbolicState, label_idx: int) -> set:
        if q not in self.states:
            raise LookupError_("unknown state")
        if not 0 <= label_idx < len(self.labels):
            raise LookupError_(f"label index {label_idx} out of range")
        return {p for (a, l, p) in self.transitions if a == q and l == label_idx}

    def output(self, q: SymbolicState):
        return decode(q)

    def validate(self):
        if self.initial is None or self.initial not in self.states:
            raise ShapeError("initial state must be a member of the state set")
        for (q, l, p) in self.transitions:
            if q not in self.states or p not in self.states:
                raise ShapeError("transition endpoint outside the state set")
            if not 0 <= l < len(self.labels):
                raise ShapeError("transition label outside the label set")

    def sorted_states(self):
        return sorted(self.states, key=lambda s: s.sort_key())

    def sorted_transitions(self):
        return sorted(self.transitions,
                      key=lambda t: (t[0].sort_key(), t[1], t[2].sort_key()))

    # ------------------------------------------------------------------
    # exporters

    def export_interchange(self, path):
        self.validate()
        lines = [f"tsx {_FORMAT_VERSION}"]
        dim = self.initial.dim
        b = self.basis
        lines.append(f"dims {dim}")
        lines.append(f"basis {b.N} {_fmt(b.a)} {_fmt(b.b)} {b.refine}")
        lines.append(f"theta {_fmt(self.theta)}")
        for key in sorted(self.meta):
            lines.append(f"meta {key} {self.meta[key]}")
        lines.append(f"labels {len(self.labels)}")
        for i, row in enumerate(self.labels):
            lines.append("label " + str(i) + " " + " ".join(_fmt(v) for v in row))
        lines.append(f"initial {self.initial.canonical_id()}")
        states = self.sorted_states()
        lines.append(f"states {len(states)}")
        for s in states:
            lines.append("state " + s.canonical_id())
        trans = self.sorted_transitions()
        lines.append(f"transitions {len(trans)}")
        for (q, l, p) in trans:
            lines.append(f"t {q.canonical_id()} {l} {p.canonical_id()}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    def export_dot(self, path):
        self.validate()
        lines = ["digraph symbolic_model {", "  rankdir=LR;"]
        for s in self.sorted_states():
            shape = "doublecircle" if s == self.initial else "circle"
            lines.append(f'  "{s.canonical_id()}" [shape={shape}];')
        for (q, l, p) in self.sorted_transitions():
            lab = ",".join(_fmt(v) for v in self.labels[l])
            lines.append(f'  "{q.canonical_id()}" -> "{p.canonical_id()}" '
                         f'[label="{lab}"];')
        lines.append("}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def import_interchange(path) -> TransitionSystem:
    """Parse a .tsx file back into a TransitionSystem (inverse of export)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    it = iter(lines)

    def expect(prefix):
        ln = next(it)
        if not ln.startswith(prefix):
            raise ShapeError(f"malformed tsx file: expected {prefix!r}, got {ln!r}")
        return ln[len(prefix):].strip()

    version = int(expect("tsx"))
    if version != _FORMAT_VERSION:
        raise ShapeError(f"unsupported tsx version {version}")
    dim = int(expect("dims"))
    parts = expect("basis").split()
    basis = SplineBasis(N=int(parts[0]), a=float(parts[1]), b=float(parts[2]),
                        refine=int(parts[3]))
    theta = float(expect("theta"))

    meta = {}
    ln = next(it)
    while ln.startswith("meta "):
        _, key, value = ln.split(" ", 2)
        meta[key] = value
        ln = next(it)
    if not ln.startswith("labels "):
        raise ShapeError("malformed tsx file: expected labels count")
    nlabels = int(ln.split()[1])
    labels = np.empty((nlabels, 0))
    rows = []
    for _ in range(nlabels):
        parts = expect("label").split()
        rows.append([float(v) for v in parts[1:]])
    labels = np.array(rows) if rows else np.zeros((0, 1))

    def parse_state(text):
        return SymbolicState.from_canonical_id(text, basis, theta, dim)

    initial = parse_state(expect("initial"))
    nstates = int(expect("states"))
    ts = TransitionSystem(basis=basis, theta=theta, labels=labels, meta=meta)
    for _ in range(nstates):
        ts.add_state(parse_state(expect("state")))
    ts.set_initial(initial)
    ntrans = int(expect("transitions"))
    for _ in range(ntrans):
        parts = expect("t").split()
        ts.add_transition(parse_state(parts[0]), int(parts[1]), parse_state(parts[2]))
    if len(ts.states) != nstates or len(ts.transitions) != ntrans:
        raise ShapeError("tsx counts do not match the listed entries")
    return ts
