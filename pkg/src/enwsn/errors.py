"""Exception hierarchy shared by every module."""


class EnwsnError(Exception):
    """Base class for all simulator errors."""


class InputError(EnwsnError, ValueError):
    """Bad user input: malformed files, invalid parameters, missing data."""


class ParseError(InputError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(InputError):
    pass


class EmptyTraceError(InputError):
    pass


class ConfigError(InputError):
    pass


class InsufficientDataError(InputError):
    pass


class UnreachableNodeError(InputError):
    def __init__(self, nodes):
        self.nodes = sorted(nodes)
        super().__init__(f"nodes cannot reach the sink: {self.nodes}")


class FitError(EnwsnError, ArithmeticError):
    pass


class InfeasibleConfigError(EnwsnError):
    """Raised when asked to evaluate a configuration the feasibility rules reject."""

    def __init__(self, reason):
        self.reason = reason
        super().__init__(f"infeasible configuration: {reason}")
