"""Exception types shared across the package."""


class KDError(Exception):
    """Base class for all package errors."""


class DomainError(KDError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class NonFiniteError(KDError, ArithmeticError):
    """A computation overflowed or produced NaN."""

    def __init__(self, message, **context):
        super().__init__(f"{message} ({', '.join(f'{k}={v!r}' for k, v in context.items())})")
        self.context = context


class BracketError(KDError, RuntimeError):
    """Eigenvalue or root bracketing failed."""

    def __init__(self, message, **state):
        super().__init__(f"{message}: {state}")
        self.state = state


class GridError(KDError, ValueError):
    """A position grid is non-uniform or too small for the requested state."""


class IntegrationError(KDError, RuntimeError):
    """The adaptive integrator could not continue (step underflow)."""

    def __init__(self, message, **diagnostics):
        super().__init__(f"{message}: {diagnostics}")
        self.diagnostics = diagnostics


class TruncationError(KDError, RuntimeError):
    """Population reached the top of the truncated basis."""

    def __init__(self, message, **diagnostics):
        super().__init__(f"{message}: {diagnostics}")
        self.diagnostics = diagnostics
