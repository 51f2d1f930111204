import math

import numpy as np
import pytest
from scipy.optimize import brentq

from delaysym import (
    DeltaIssCertificate,
    KFunction,
    KLFunction,
    LKFunctional,
    SamplingPlan,
    StateFunction,
    check_delta_iss,
    check_lk_functional,
    driver_derivative,
    halanay_certificate,
    halanay_rate,
)
from delaysym.errors import (
    DriverDerivativeUnstableError,
    NoDecayRateError,
    ShapeError,
)

A, B, DELTA = 2.0, 0.5, 0.1


@pytest.fixture(scope="module")
def plan():
    return SamplingPlan(count=200, horizon_steps=10, tau=0.5, substeps=100,
                        seed=42, lambda_u=0.25, grid_count=11)


class TestHalanayRate:
    def test_no_delay_term(self):
        assert halanay_rate(2.0, 0.0, 0.1) == pytest.approx(2.0, abs=1e-10)

    def test_zero_delay(self):
        assert halanay_rate(2.0, 0.5, 0.0) == pytest.approx(1.5, abs=1e-12)

    def test_reference_system_vs_independent_root(self):
        got = halanay_rate(A, B, DELTA)
        want = brentq(lambda s: A - B * math.exp(s * DELTA) - s, 0.0, A - B,
                      xtol=1e-14)
        assert got == pytest.approx(want, abs=1e-10)
        # fixed-point residual
        assert abs(A - B * math.exp(got * DELTA) - got) < 1e-10

    def test_requires_decay(self):
        with pytest.raises(NoDecayRateError):
            halanay_rate(1.0, 1.0, 0.1)


class TestCheckDeltaIss:
    def test_identical_pair_never_violates(self, linear_sys):
        # lhs is identically zero, rhs nonnegative
        from delaysym import PiecewiseConstantInput, trajectory
        xi = StateFunction.constant([0.7], DELTA, 11)
        inp = PiecewiseConstantInput(np.full((5, 1), 0.5), 0.5)
        r1 = trajectory(linear_sys, xi, inp, 5, 100)
        r2 = trajectory(linear_sys, xi, inp, 5, 100)
        for x1, x2 in zip(r1, r2):
            assert x1.sup_distance(x2) == 0.0

    def test_halanay_certificate_validates(self, linear_sys, plan):
        report = check_delta_iss(linear_sys, halanay_certificate(A, B, DELTA),
                                 plan)
        assert report.ok
        assert report.checked == plan.count * (plan.horizon_steps + 1)
        assert report.min_margin > 0

    def test_falsified_beta_caught(self, linear_sys, plan):
        good = halanay_certificate(A, B, DELTA)
        bad = DeltaIssCertificate(
            beta=KLFunction(C=good.beta.C, sigma=2 * good.beta.sigma),
            gamma=good.gamma)
        report = check_delta_iss(linear_sys, bad, plan)
        assert len(report.violations) > 0
        first = report.violations[0]
        assert first["lhs"] > first["rhs"]

    def test_determinism(self, linear_sys, plan):
        cert = halanay_certificate(A, B, DELTA)
        r1 = check_delta_iss(linear_sys, cert, plan)
        r2 = check_delta_iss(linear_sys, cert, plan)
        assert r1.to_json() == r2.to_json()

    def test_pointwise_larger_certificate_still_passes(self, linear_sys, plan):
        base = halanay_certificate(A, B, DELTA)
        bigger = DeltaIssCertificate(
            beta=KLFunction(C=1.5 * base.beta.C, sigma=base.beta.sigma),
            gamma=KFunction(c=2.0 * base.gamma.c))
        assert check_delta_iss(linear_sys, base, plan).ok
        assert check_delta_iss(linear_sys, bigger, plan).ok


class TestDriverDerivative:
    def test_zero_for_identical_segments(self, linear_sys):
        V = lambda x1, x2: x1.sub(x2).sup_norm() ** 2
        x = StateFunction.constant([0.4], DELTA, 11)
        est = driver_derivative(V, x, x, [0.0], [0.0], linear_sys)
        assert est.value == pytest.approx(0.0, abs=1e-9)

    def test_point_quadratic_chain_rule(self, linear_sys):
        # V = (x1(0)-x2(0))^2: derivative 2*w0*(f1-f2) = 2*1*(-a+b) = -3
        V = lambda x1, x2: float((x1.at_zero()[0] - x2.at_zero()[0]) ** 2)
        x1 = StateFunction.constant([1.0], DELTA, 11)
        x2 = StateFunction.constant([0.0], DELTA, 11)
        est = driver_derivative(V, x1, x2, [0.0], [0.0], linear_sys)
        assert est.value == pytest.approx(-3.0, abs=1e-3)

    def test_ladder_consistency(self, linear_sys):
        V = lambda x1, x2: float((x1.at_zero()[0] - x2.at_zero()[0]) ** 2)
        x1 = StateFunction.constant([1.0], DELTA, 11)
        x2 = StateFunction.constant([0.0], DELTA, 11)
        est = driver_derivative(V, x1, x2, [0.0], [0.0], linear_sys,
                                theta_ladder=(1e-2, 1e-3, 1e-4))
        e3, e4 = est.estimates[1], est.estimates[2]
        assert abs(e3 - e4) <= 0.01 * abs(e4)

    def test_constant_functional_zero(self, linear_sys):
        V = lambda x1, x2: 5.0
        x1 = StateFunction.constant([0.3], DELTA, 11)
        x2 = StateFunction.constant([-0.2], DELTA, 11)
        est = driver_derivative(V, x1, x2, [0.1], [0.0], linear_sys)
        assert est.value == 0.0

    def test_unstable_ladder_raises(self, linear_sys):
        # square-root kink at the base point: estimates scale like 1/sqrt(theta)
        V = lambda x1, x2: math.sqrt(abs(x1.at_zero()[0] - x2.at_zero()[0] - 1.0))
        x1 = StateFunction.constant([1.0], DELTA, 11)
        x2 = StateFunction.constant([0.0], DELTA, 11)
        with pytest.raises(DriverDerivativeUnstableError):
            driver_derivative(V, x1, x2, [0.0], [0.0], linear_sys)

    def test_bad_ladder_rejected(self, linear_sys):
        x = StateFunction.constant([0.0], DELTA, 11)
        with pytest.raises(ShapeError):
            driver_derivative(lambda a, b: 0.0, x, x, [0.0], [0.0],
                              linear_sys, theta_ladder=(1e-4, 1e-3))


def _lk(alpha3_gain):
    # V = (x1(0)-x2(0))^2 certifies the decrease along synchronized (constant
    # difference) histories: there D+V = -2(a-b) w0^2 + 2 w0 du.  The input
    # gate rho(s) = 20 s caps the cross term at w0^2/10, leaving margin below
    # the exact rate 2(a-b) = 3 for alpha3 = 2.8 s^2.
    return LKFunctional(
        V=lambda x1, x2: float((x1.at_zero()[0] - x2.at_zero()[0]) ** 2),
        Ma=lambda w: w.sup_norm(),
        alpha1=KFunction(c=1.0, exponent=2.0),
        alpha2=KFunction(c=1.0, exponent=2.0),
        alpha3=KFunction(c=alpha3_gain, exponent=2.0),
        rho=KFunction(c=20.0),
        gauge_lower=KFunction(c=1.0),
        gauge_upper=KFunction(c=1.0),
    )


class TestCheckLkFunctional:
    def test_identical_pair_trivial(self, linear_sys):
        lk = _lk(2.8)
        x = StateFunction.constant([0.5], DELTA, 11)
        assert lk.V(x, x) == 0.0
        assert lk.Ma(x.sub(x)) == 0.0

    def test_constant_probes_pass(self, linear_sys):
        plan = SamplingPlan(count=100, horizon_steps=1, tau=0.5, substeps=100,
                            seed=11, lambda_u=0.25, grid_count=11,
                            initial_kinds=("constant",))
        report = check_lk_functional(linear_sys, _lk(2.8), plan)
        assert report.ok

    def test_inflated_alpha3_caught(self, linear_sys):
        plan = SamplingPlan(count=100, horizon_steps=1, tau=0.5, substeps=100,
                            seed=11, lambda_u=0.25, grid_count=11,
                            initial_kinds=("constant",))
        report = check_lk_functional(linear_sys, _lk(28.0), plan)
        assert not report.ok
        assert any(v["cond"] == "ii-decrease" for v in report.violations)

    def test_determinism(self, linear_sys):
        plan = SamplingPlan(count=50, horizon_steps=1, tau=0.5, substeps=100,
                            seed=5, lambda_u=0.25, grid_count=11,
                            initial_kinds=("constant",))
        r1 = check_lk_functional(linear_sys, _lk(2.8), plan)
        r2 = check_lk_functional(linear_sys, _lk(2.8), plan)
        assert r1.to_json() == r2.to_json()


class TestComparisonFunctions:
    def test_k_function_increasing_zero_at_zero(self):
        g = KFunction(c=0.5, exponent=2.0)
        assert g(0.0) == 0.0
        vals = [g(s) for s in np.linspace(0, 2, 20)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_kl_function_shape(self):
        b = KLFunction(C=1.2, sigma=0.7)
        assert b(0.0, 5.0) == 0.0
        assert b(1.0, 0.0) == pytest.approx(1.2)
        ts = np.linspace(0, 20, 30)
        vals = [b(1.0, t) for t in ts]
        assert all(x > y for x, y in zip(vals, vals[1:]))
        assert vals[-1] < 1e-5

    def test_invalid_parameters(self):
        with pytest.raises(ShapeError):
            KFunction(c=-1.0)
        with pytest.raises(ShapeError):
            KLFunction(C=0.5, sigma=1.0)
