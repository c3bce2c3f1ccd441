class LLMCorralError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(LLMCorralError, ValueError):
    pass


class SolverError(LLMCorralError, ArithmeticError):
    pass


class TrainingError(LLMCorralError, ArithmeticError):
    pass


class ConvergenceError(LLMCorralError, ArithmeticError):
    pass


class DataError(LLMCorralError, ValueError):
    """Raised when an input file fails validation.

    ``line`` is the 1-based line number of the offending entry, when known.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class BackendError(LLMCorralError, RuntimeError):
    """A generator backend failed to produce an output."""
