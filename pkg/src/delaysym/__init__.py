"""Finite symbolic models for incrementally stable time-delay systems.

Pipeline: describe the system and its stability certificate, solve for
abstraction parameters meeting a precision target, build the finite
transition system by the quantized fixed-point construction, then certify
the result with the bisimulation checker and matched-run validation.
"""

from .abstraction import BuildReport, build, integration_plan, state_count_bound
from .bisimulation import (
    BisimResult,
    check_bisimulation,
    output_distance,
    validate_against_continuous,
)
from .certificates import (
    DeltaIssCertificate,
    DriverEstimate,
    FalsificationReport,
    KFunction,
    KLFunction,
    LKFunctional,
    SamplingPlan,
    check_delta_iss,
    check_lk_functional,
    driver_derivative,
    halanay_certificate,
    halanay_rate,
)
from .config import load_config
from .errors import DelaysymError
from .kernels import backend
from .parameters import (
    AbstractionParams,
    SystemBounds,
    check_assumptions,
    compute_M,
    derive_bounds,
    reachable_bound,
    solve_parameters,
    verify_cond,
)
from .quantization import (
    Lattice,
    SplineBasis,
    SymbolicState,
    covering_radius,
    decode,
    input_labels,
    interpolate_nodes,
    lambda_bound,
    lattice_points,
    quantize_function,
    split_budget,
    sup_distance,
)
from .system import (
    PiecewiseConstantInput,
    RhsSpec,
    StateFunction,
    TimeDelaySystem,
    evaluate_rhs,
    integrate_step,
    trajectory,
)
from .transition_system import TransitionSystem, import_interchange

__version__ = "0.1.0"
