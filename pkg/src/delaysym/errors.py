"""Exception hierarchy. Every error carries a stable string code so CLI
output and tests can match on it without parsing prose."""


class DelaysymError(Exception):
    """Base error; ``code`` is a stable machine-readable identifier."""

    code = "error"

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context


class ShapeError(DelaysymError):
    code = "shape-error"


class RhsEvaluationError(DelaysymError):
    code = "rhs-evaluation-failure"


class StateEscapeError(DelaysymError):
    """Trajectory left the embedding box; ``context['time']`` holds the first
    escape time and ``context['state']`` the offending value."""

    code = "state-escape"


class IntegrationDivergenceError(DelaysymError):
    code = "integration-divergence"


class DriverDerivativeUnstableError(DelaysymError):
    code = "driver-derivative-unstable"


class NoDecayRateError(DelaysymError):
    code = "no-decay-rate"


class BasisError(DelaysymError):
    code = "basis-error"


class LookupError_(DelaysymError):
    code = "lookup-error"


class MetricError(DelaysymError):
    code = "metric-error"


class BoundViolationError(DelaysymError):
    code = "bound-violation"


class InsufficientContractionError(DelaysymError):
    code = "insufficient-contraction"


class InfeasibleError(DelaysymError):
    code = "infeasible"


class AssumptionError(DelaysymError):
    """One or more mandatory assumption checks failed."""

    code = "assumption-failure"


class StaleArtifactError(DelaysymError):
    code = "stale-artifact"


class ConfigError(DelaysymError):
    code = "config-error"
