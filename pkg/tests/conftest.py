import numpy as np
import pytest

from delaysym import (
    RhsSpec,
    StateFunction,
    TimeDelaySystem,
    derive_bounds,
    halanay_certificate,
    solve_parameters,
)

A, B, DELTA = 2.0, 0.5, 0.1


@pytest.fixture(scope="session")
def linear_sys():
    rhs = RhsSpec.linear([[-A]], [[B]], [[1.0]])
    return TimeDelaySystem(delta=DELTA, r=0.0, rhs=rhs,
                           state_box=[[-1.0, 1.0]], input_box=[[-1.0, 1.0]],
                           kappa=A + B, embed_inflation=2.0)


@pytest.fixture(scope="session")
def cert():
    return halanay_certificate(A, B, DELTA)


@pytest.fixture(scope="session")
def xi0_zero():
    return StateFunction.constant([0.0], DELTA, 11)


@pytest.fixture(scope="session")
def solved(linear_sys, cert, xi0_zero):
    bounds = derive_bounds(linear_sys, cert, B_J=2.5)
    params, bounds2, slack = solve_parameters(linear_sys, bounds, cert, 0.3,
                                              xi0_zero)
    return params, bounds2, slack


@pytest.fixture(scope="session")
def frozen_sys():
    rhs = RhsSpec.linear([[0.0]], [[0.0]], [[0.0]])
    return TimeDelaySystem(delta=DELTA, r=0.0, rhs=rhs,
                           state_box=[[-1.0, 1.0]], input_box=[[-1.0, 1.0]],
                           kappa=1.0)
