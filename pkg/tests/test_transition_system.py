import numpy as np
import pytest

from delaysym import SplineBasis, TransitionSystem, import_interchange
from delaysym.errors import LookupError_, ShapeError
from delaysym.quantization import SymbolicState


def make_state(basis, theta, ks):
    return SymbolicState(tuple((k,) for k in ks), basis, theta)


def random_system(seed, max_states=12, nlabels=3):
    rng = np.random.default_rng(seed)
    basis = SplineBasis(N=int(rng.integers(0, 3)), a=-0.1, b=0.0)
    theta = float(rng.uniform(0.01, 0.2))
    nn = basis.N + 2
    labels = np.sort(rng.uniform(-1, 1, size=nlabels))[:, None]
    states = []
    seen = set()
    for _ in range(int(rng.integers(2, max_states))):
        ks = tuple(int(k) for k in rng.integers(-5, 6, size=nn))
        if ks not in seen:
            seen.add(ks)
            states.append(make_state(basis, theta, ks))
    ts = TransitionSystem(basis=basis, theta=theta, labels=labels)
    for s in states:
        ts.add_state(s)
    ts.set_initial(states[0])
    for _ in range(int(rng.integers(1, 4 * len(states)))):
        q = states[int(rng.integers(len(states)))]
        p = states[int(rng.integers(len(states)))]
        ts.add_transition(q, int(rng.integers(nlabels)), p)
    return ts


class TestContainer:
    def test_successors(self):
        ts = random_system(0)
        (q, l, p) = next(iter(ts.transitions))
        assert p in ts.successors(q, l)

    def test_isolated_state_has_no_successors(self):
        basis = SplineBasis(N=0, a=-0.1, b=0.0)
        ts = TransitionSystem(basis=basis, theta=0.05,
                              labels=np.array([[0.0]]))
        s = make_state(basis, 0.05, (0, 0))
        ts.set_initial(s)
        assert ts.successors(s, 0) == set()

    def test_unknown_state_lookup_error(self):
        ts = random_system(1)
        other = make_state(ts.basis, ts.theta, tuple([9] * (ts.basis.N + 2)))
        if other in ts.states:
            pytest.skip("collision")
        with pytest.raises(LookupError_):
            ts.successors(other, 0)

    def test_unknown_label_lookup_error(self):
        ts = random_system(2)
        with pytest.raises(LookupError_):
            ts.successors(ts.initial, 99)

    def test_validate_requires_initial(self):
        basis = SplineBasis(N=0, a=-0.1, b=0.0)
        ts = TransitionSystem(basis=basis, theta=0.05,
                              labels=np.array([[0.0]]))
        with pytest.raises(ShapeError):
            ts.validate()


class TestInterchange:
    @pytest.mark.parametrize("seed", range(10))
    def test_roundtrip_exact(self, tmp_path, seed):
        ts = random_system(seed)
        ts.meta = {"config": "deadbeef", "tau": "0.5"}
        path = tmp_path / "m.tsx"
        ts.export_interchange(path)
        back = import_interchange(path)
        assert back.states == ts.states
        assert back.transitions == ts.transitions
        assert back.initial == ts.initial
        assert np.array_equal(back.labels, ts.labels)
        assert back.meta == ts.meta
        assert back.theta == ts.theta
        assert back.basis.key() == ts.basis.key()

    def test_export_deterministic(self, tmp_path):
        ts = random_system(3)
        ts.export_interchange(tmp_path / "a.tsx")
        ts.export_interchange(tmp_path / "b.tsx")
        assert (tmp_path / "a.tsx").read_bytes() == (tmp_path / "b.tsx").read_bytes()

    def test_transition_count_in_file(self, tmp_path):
        ts = random_system(4)
        path = tmp_path / "m.tsx"
        ts.export_interchange(path)
        lines = path.read_text().splitlines()
        assert sum(1 for ln in lines if ln.startswith("t ")) == len(ts.transitions)


class TestDot:
    def test_single_state_graph(self, tmp_path):
        basis = SplineBasis(N=0, a=-0.1, b=0.0)
        ts = TransitionSystem(basis=basis, theta=0.05,
                              labels=np.array([[0.0]]))
        ts.set_initial(make_state(basis, 0.05, (0, 0)))
        path = tmp_path / "m.dot"
        ts.export_dot(path)
        text = path.read_text()
        assert text.count("->") == 0
        assert text.count("circle") == 1

    def test_edge_count_matches(self, tmp_path):
        ts = random_system(5)
        path = tmp_path / "m.dot"
        ts.export_dot(path)
        assert path.read_text().count("->") == len(ts.transitions)
