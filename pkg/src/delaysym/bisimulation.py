"""Approximate bisimulation checking and continuous-side validation.

The finite-finite checker computes the greatest relation in which paired
states have outputs within epsilon and every transition of either side can
be matched (under any label) by the other while staying in the relation.
On failure it returns the chain of deletions that killed the initial pair.

The continuous side of the guarantee is validated by sampling: random
label words are run both through the simulator and through the symbolic
model, asserting the output gap stays within epsilon at every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .certificates import FalsificationReport
from .errors import MetricError, ShapeError
from .quantization import decode
from .system import StateFunction, TimeDelaySystem, integrate_step
from .transition_system import TransitionSystem
from .abstraction import integration_plan

_TOL = 1e-12


def output_distance(s1, s2) -> float:
    """Sup-norm distance between decoded outputs; exact on the union
    refinement of the two node grids (both are piecewise linear)."""
    b1, b2 = s1.basis, s2.basis
    if (abs(b1.a - b2.a) > _TOL or abs(b1.b - b2.b) > _TOL):
        raise MetricError("outputs live on different intervals")
    amps1 = s1.amplitudes()
    amps2 = s2.amplitudes()
    if amps1.shape[1] != amps2.shape[1]:
        raise MetricError("outputs have different dimensions")
    ts = np.union1d(b1.nodes, b2.nodes)

    def eval_pl(nodes, amps, t):
        pos = np.clip((t - nodes[0]) / (nodes[1] - nodes[0]), 0, len(nodes) - 1)
        i = min(int(np.floor(pos)), len(nodes) - 2)
        fr = pos - i
        return (1 - fr) * amps[i] + fr * amps[i + 1]

    worst = 0.0
    for t in ts:
        d = np.max(np.abs(eval_pl(b1.nodes, amps1, t) - eval_pl(b2.nodes, amps2, t)))
        worst = max(worst, float(d))
    return worst


@dataclass
class BisimResult:
    ok: bool
    epsilon: float
    relation: set = field(default_factory=set)
    chain: list = field(default_factory=list)

    def render(self) -> str:
        lines = [f"bisimulation {'ok' if self.ok else 'fail'} "
                 f"epsilon {self.epsilon!r}"]
        if self.ok:
            for (a, b) in sorted(self.relation):
                lines.append(f"pair {a} {b}")
        else:
            for step in self.chain:
                lines.append("why " + " ".join(f"{k}={v}" for k, v in
                                               sorted(step.items())))
        return "\n".join(lines) + "\n"


def check_bisimulation(t1: TransitionSystem, t2: TransitionSystem,
                       epsilon: float) -> BisimResult:
    """Greatest fixed point over the output-compatible pair set."""
    t1.validate()
    t2.validate()
    q1s = t1.sorted_states()
    q2s = t2.sorted_states()

    dist = {}
    for a in q1s:
        for b in q2s:
            dist[(a, b)] = output_distance(a, b)
    alive = {pair for pair, d in dist.items() if d <= epsilon}

    succ1 = {}
    for (q, l, p) in t1.transitions:
        succ1.setdefault(q, []).append((l, p))
    succ2 = {}
    for (q, l, p) in t2.transitions:
        succ2.setdefault(q, []).append((l, p))

    # deletion reasons for counterexample reconstruction
    reason = {}

    def violation(pair):
        a, b = pair
        for (l, p) in succ1.get(a, ()):
            if not any((p, p2) in alive for (_, p2) in succ2.get(b, ())):
                blocker = next(((p, p2) for (_, p2) in succ2.get(b, ())
                                if (p, p2) in reason), None)
                return dict(side=1, state=a.canonical_id(),
                            label=int(l), successor=p.canonical_id()), blocker
        for (l, p) in succ2.get(b, ()):
            if not any((p1, p) in alive for (_, p1) in succ1.get(a, ())):
                blocker = next(((p1, p) for (_, p1) in succ1.get(a, ())
                                if (p1, p) in reason), None)
                return dict(side=2, state=b.canonical_id(),
                            label=int(l), successor=p.canonical_id()), blocker
        return None, None

    changed = True
    while changed:
        changed = False
        for pair in sorted(alive, key=lambda ab: (ab[0].sort_key(),
                                                  ab[1].sort_key())):
            why, blocker = violation(pair)
            if why is not None:
                alive.discard(pair)
                reason[pair] = (why, blocker)
                changed = True

    init = (t1.initial, t2.initial)
    if init in alive:
        rel = {(a.canonical_id(), b.canonical_id()) for (a, b) in alive}
        return BisimResult(True, epsilon, relation=rel)

    chain = []
    pair = init
    seen = set()
    while pair is not None and pair not in seen:
        seen.add(pair)
        entry = dict(pair=(pair[0].canonical_id(), pair[1].canonical_id()))
        if pair in reason:
            why, blocker = reason[pair]
            entry.update(why)
            chain.append(entry)
            pair = blocker
        else:
            entry["cause"] = "output-gap"
            entry["distance"] = dist.get(pair, float("inf"))
            chain.append(entry)
            pair = None
    return BisimResult(False, epsilon, chain=chain)


def validate_against_continuous(sys: TimeDelaySystem, ts: TransitionSystem,
                                tau: float, xi0: StateFunction,
                                epsilon: float, words: int, word_length: int,
                                seed: int, min_per_cell: int = 2
                                ) -> FalsificationReport:
    """Matched-run check: continuous trajectory vs the symbolic run under
    the same label word, gap asserted at every sampling instant."""
    ts.validate()
    basis = ts.basis
    substeps, _ = integration_plan(tau, basis.grid_step, min_per_cell)
    if xi0.samples.shape[0] != basis.num_samples:
        xi0 = StateFunction.from_callable(xi0.value, sys.delta,
                                          basis.num_samples)
    move = {}
    for (q, l, p) in ts.transitions:
        move[(q, l)] = p
    decoded = {}

    def dec(q):
        if q not in decoded:
            decoded[q] = decode(q)
        return decoded[q]

    rng = np.random.default_rng(seed)
    report = FalsificationReport("matched-run", words, seed)
    nlab = len(ts.labels)
    for w in range(words):
        word = rng.integers(0, nlab, size=word_length)
        x = xi0
        q = ts.initial
        gap0 = float(np.max(np.abs(x.samples - dec(q).samples)))
        report.record(epsilon - gap0, word=w, step=0, gap=gap0)
        for k, li in enumerate(word, start=1):
            x, _ = integrate_step(sys, x, ts.labels[li], tau, substeps)
            if (q, int(li)) not in move:
                raise ShapeError(
                    f"symbolic model has no transition from "
                    f"{q.canonical_id()} under label {li}; artifact is not "
                    f"a completed fixed point")
            q = move[(q, int(li))]
            gap = float(np.max(np.abs(x.samples - dec(q).samples)))
            report.record(epsilon - gap, word=w, step=k, gap=gap)
    return report
