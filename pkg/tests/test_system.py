import math

import numpy as np
import pytest

from delaysym import (
    PiecewiseConstantInput,
    RhsSpec,
    StateFunction,
    TimeDelaySystem,
    evaluate_rhs,
    integrate_step,
    trajectory,
)
from delaysym.errors import (
    IntegrationDivergenceError,
    RhsEvaluationError,
    ShapeError,
    StateEscapeError,
)

from .oracles import linear_dde_solution

A, B, DELTA = 2.0, 0.5, 0.1


def const_state(v, count=11):
    return StateFunction.constant([v], DELTA, count)


class TestStateFunction:
    def test_basic_properties(self):
        x = const_state(1.0)
        assert x.delta == pytest.approx(DELTA, rel=1e-12)
        assert x.dim == 1
        assert x.at_zero()[0] == 1.0
        assert x.at_delay()[0] == 1.0
        assert x.sup_norm() == 1.0

    def test_needs_two_samples(self):
        with pytest.raises(ShapeError):
            StateFunction(np.zeros((1, 1)), 0.1)

    def test_rejects_nonfinite(self):
        with pytest.raises(ShapeError):
            StateFunction(np.array([[0.0], [np.inf]]), 0.1)

    def test_value_interpolates(self):
        x = StateFunction(np.array([[0.0], [1.0]]), DELTA)
        assert x.value(-DELTA / 2)[0] == pytest.approx(0.5)


class TestEvaluateRhs:
    def test_zero_at_origin(self, linear_sys):
        assert evaluate_rhs(linear_sys, const_state(0.0), [0.0])[0] == 0.0

    def test_tanh_catalogue_value(self):
        rhs = RhsSpec.tanh([[-2.0]], [[0.5]], [[1.0]])
        sys_ = TimeDelaySystem(delta=DELTA, r=0.0, rhs=rhs,
                               state_box=[[-2.0, 2.0]],
                               input_box=[[-1.0, 1.0]], kappa=2.5)
        got = evaluate_rhs(sys_, const_state(1.0), [0.0])[0]
        assert got == pytest.approx(-2.0 + 0.5 * math.tanh(1.0), abs=1e-12)

    def test_linear_constant_segment(self, linear_sys):
        for c in (-0.5, 0.25, 1.0):
            got = evaluate_rhs(linear_sys, const_state(c), [0.0])[0]
            assert got == pytest.approx((-A + B) * c, abs=1e-12)

    def test_dimension_mismatch(self, linear_sys):
        with pytest.raises(ShapeError):
            evaluate_rhs(linear_sys, const_state(0.0), [0.0, 1.0])

    def test_nonfinite_rhs_flagged(self):
        sys_ = TimeDelaySystem(
            delta=DELTA, r=0.0,
            rhs=lambda x, u: np.array([math.inf]),
            state_box=[[-1.0, 1.0]], input_box=[[-1.0, 1.0]], kappa=1.0)
        with pytest.raises(RhsEvaluationError):
            evaluate_rhs(sys_, const_state(0.0), [0.0])

    def test_polynomial_matches_linear(self, linear_sys):
        # -a x0 + b xd + u as polynomial terms over (x0, xd, u)
        poly = RhsSpec.polynomial(1, 1, [(0, -A, [1, 0, 0]),
                                         (0, B, [0, 1, 0]),
                                         (0, 1.0, [0, 0, 1])])
        x = StateFunction(np.linspace(-0.5, 0.75, 11)[:, None], DELTA / 10)
        got = poly.point_eval(x.at_zero(), x.at_delay(), np.array([0.3]))
        want = linear_sys.rhs.point_eval(x.at_zero(), x.at_delay(),
                                         np.array([0.3]))
        assert got == pytest.approx(want, abs=1e-14)


class TestIntegrateStep:
    def test_first_interval_closed_form(self, linear_sys):
        # on [0, delta] the delayed term is the constant history
        xi = const_state(1.0)
        x_tau, (ts, traj) = integrate_step(linear_sys, xi, [0.0], DELTA, 100)
        exact = np.exp(-A * ts) + (B / A) * (1 - np.exp(-A * ts))
        assert np.max(np.abs(traj[:, 0] - exact)) < 1e-12
        assert x_tau.at_zero()[0] == pytest.approx(0.8640480648084864,
                                                   abs=1e-9)

    def test_zero_stays_zero(self, linear_sys):
        x_tau, (_, traj) = integrate_step(linear_sys, const_state(0.0),
                                          [0.0], 0.3, 60)
        assert np.all(traj == 0.0)
        assert np.all(x_tau.samples == 0.0)

    def test_against_method_of_steps_oracle(self, linear_sys):
        sol = linear_dde_solution(A, B, DELTA, 1.0, 3)
        xi = const_state(1.0, count=11)          # grid step 0.01
        _, (ts, traj) = integrate_step(linear_sys, xi, [0.0], 0.3, 300)
        err = max(abs(traj[j, 0] - sol(ts[j])) for j in range(len(ts)))
        assert err < 1e-8

    def test_convergence_order(self, linear_sys):
        sol = linear_dde_solution(A, B, DELTA, 1.0, 3)
        xi = const_state(1.0, count=6)           # grid step 0.02
        errs = []
        for steps in (15, 30, 60):
            _, (ts, traj) = integrate_step(linear_sys, xi, [0.0], 0.3, steps)
            errs.append(max(abs(traj[j, 0] - sol(ts[j]))
                            for j in range(len(ts))))
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
        assert min(orders) >= 3.5

    def test_method_of_steps_consistency(self, linear_sys):
        # one [0, 2 delta] call equals two chained [0, delta] calls
        xi = StateFunction.from_callable(lambda t: [math.sin(3 * t)], DELTA, 49)
        whole, _ = integrate_step(linear_sys, xi, [0.5], 2 * DELTA, 192)
        half1, _ = integrate_step(linear_sys, xi, [0.5], DELTA, 96)
        half2, _ = integrate_step(linear_sys, half1, [0.5], DELTA, 96)
        assert np.max(np.abs(whole.samples - half2.samples)) < 1e-10

    def test_misaligned_step_rejected(self, linear_sys):
        with pytest.raises(ShapeError):
            integrate_step(linear_sys, const_state(1.0, count=11), [0.0],
                           0.3, substeps=7)

    def test_input_outside_box_rejected(self, linear_sys):
        with pytest.raises(ShapeError):
            integrate_step(linear_sys, const_state(0.0), [2.0], 0.3, 60)

    def test_state_escape_reports_first_exit(self):
        rhs = RhsSpec.linear([[2.0]], [[0.0]], [[0.0]])   # unstable
        sys_ = TimeDelaySystem(delta=DELTA, r=0.0, rhs=rhs,
                               state_box=[[-1.0, 1.0]],
                               input_box=[[-1.0, 1.0]], kappa=2.0,
                               embed_inflation=1.25)
        with pytest.raises(StateEscapeError) as ei:
            integrate_step(sys_, const_state(0.9), [0.0], 2.0, 400)
        assert 0 < ei.value.context["time"] <= 2.0
        assert abs(ei.value.context["state"][0]) > 1.25

    def test_integration_divergence(self):
        # cubic blow-up reaches inf inside the horizon
        rhs = RhsSpec.polynomial(1, 1, [(0, 1.0, [3, 0, 0])])
        sys_ = TimeDelaySystem(delta=DELTA, r=0.0, rhs=rhs,
                               state_box=[[-5.0, 5.0]],
                               input_box=[[-1.0, 1.0]], kappa=75.0,
                               embed_inflation=1e30)
        with pytest.raises(IntegrationDivergenceError):
            integrate_step(sys_, const_state(5.0), [0.0], 10.0, 2000)

    def test_generic_callable_matches_catalogue(self, linear_sys):
        def fn(x, u):
            return -A * x.at_zero() + B * x.at_delay() + u

        gen = TimeDelaySystem(delta=DELTA, r=0.0, rhs=fn,
                              state_box=[[-1.0, 1.0]],
                              input_box=[[-1.0, 1.0]], kappa=2.5,
                              embed_inflation=2.0)
        xi = StateFunction.from_callable(lambda t: [0.3 * math.cos(4 * t)],
                                         DELTA, 21)
        a1, (_, t1) = integrate_step(gen, xi, [0.25], 0.3, 120)
        a2, (_, t2) = integrate_step(linear_sys, xi, [0.25], 0.3, 120)
        assert np.max(np.abs(t1 - t2)) < 1e-13
        assert np.max(np.abs(a1.samples - a2.samples)) < 1e-13


class TestLipschitz:
    def test_falsification_sanity(self, linear_sys):
        rng = np.random.default_rng(3)
        for _ in range(200):
            v1, v2 = rng.uniform(-1, 1, size=2)
            u1, u2 = rng.uniform(-1, 1, size=2)
            x1, x2 = const_state(v1), const_state(v2)
            lhs = abs(evaluate_rhs(linear_sys, x1, [u1])[0]
                      - evaluate_rhs(linear_sys, x2, [u2])[0])
            rhs = linear_sys.kappa * (x1.sup_distance(x2) + abs(u1 - u2))
            assert lhs <= rhs + 1e-12


class TestTrajectory:
    def test_zero_steps(self, linear_sys, xi0_zero):
        inp = PiecewiseConstantInput(np.zeros((3, 1)), 0.3)
        out = trajectory(linear_sys, xi0_zero, inp, 0, 60)
        assert out == [xi0_zero]

    def test_zero_input_zero_state(self, linear_sys, xi0_zero):
        inp = PiecewiseConstantInput(np.zeros((4, 1)), 0.3)
        out = trajectory(linear_sys, xi0_zero, inp, 4, 60)
        assert len(out) == 5
        for x in out:
            assert np.all(x.samples == 0.0)

    def test_single_step_matches_oracle(self, linear_sys):
        sol = linear_dde_solution(A, B, DELTA, 1.0, 3)
        xi = const_state(1.0, count=11)
        inp = PiecewiseConstantInput(np.zeros((1, 1)), 0.3)
        out = trajectory(linear_sys, xi, inp, 1, 300)
        assert out[1].at_zero()[0] == pytest.approx(sol(0.3), abs=1e-9)

    def test_not_enough_segments(self, linear_sys, xi0_zero):
        inp = PiecewiseConstantInput(np.zeros((1, 1)), 0.3)
        with pytest.raises(ShapeError):
            trajectory(linear_sys, xi0_zero, inp, 2, 60)

    def test_failure_carries_segment_index(self):
        rhs = RhsSpec.linear([[2.0]], [[0.0]], [[0.0]])
        sys_ = TimeDelaySystem(delta=DELTA, r=0.0, rhs=rhs,
                               state_box=[[-1.0, 1.0]],
                               input_box=[[-1.0, 1.0]], kappa=2.0)
        inp = PiecewiseConstantInput(np.zeros((10, 1)), 0.5)
        with pytest.raises(StateEscapeError) as ei:
            trajectory(sys_, const_state(0.9), inp, 10, 100)
        assert "segment" in ei.value.context


class TestBackends:
    def test_numba_and_numpy_agree(self, linear_sys):
        xi = StateFunction.from_callable(lambda t: [0.5 * math.sin(7 * t)],
                                         DELTA, 21)
        a, (_, ta) = integrate_step(linear_sys, xi, [0.5], 0.3, 120,
                                    force_backend="numba")
        b, (_, tb) = integrate_step(linear_sys, xi, [0.5], 0.3, 120,
                                    force_backend="numpy")
        assert np.array_equal(ta, tb)
        assert np.array_equal(a.samples, b.samples)
