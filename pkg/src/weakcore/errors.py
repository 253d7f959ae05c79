"""Exception types shared across the package."""


class GameInputError(ValueError):
    """Malformed game, action, coalition or certificate."""


class DomainError(ValueError):
    """A function was evaluated outside its domain."""


class CapabilityError(RuntimeError):
    """The request exceeds what the desk-scale algorithms support."""


class IntegrationError(ArithmeticError):
    """Quadrature failed to meet its declared tolerance."""

    def __init__(self, message, *, interval=None, estimate=None, error=None):
        super().__init__(message)
        self.interval = interval
        self.estimate = estimate
        self.error = error


class FixtureCorruptionError(RuntimeError):
    """A built-in fixture no longer reproduces its known certificates."""


class PipelineFailure(RuntimeError):
    """The discretize-and-limit pipeline ran out of refinement budget."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
