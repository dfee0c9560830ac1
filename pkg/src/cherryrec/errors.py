"""Exception hierarchy. The CLI maps these onto exit codes."""


class CherryRecError(Exception):
    """Base class for engine errors."""


class ContractError(CherryRecError, ValueError):
    """A caller violated an operation's precondition."""


class DataError(CherryRecError):
    """Input data is unusable (missing files, empty training set, ...)."""


class NotFoundError(DataError, KeyError):
    """A requested user or item does not exist in the snapshot."""

    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class ConfigError(CherryRecError, ValueError):
    """Engine configuration is malformed or out of range."""


class DivergenceError(CherryRecError, ArithmeticError):
    """Gradient descent produced a non-finite loss."""


class EvaluatorError(CherryRecError):
    """The preference evaluator failed."""


class TransportError(EvaluatorError):
    """Remote evaluator unreachable after all retries."""


class RequestRejected(EvaluatorError):
    """Remote evaluator answered 4xx; the request is at fault and is not retried."""


class ProtocolError(EvaluatorError):
    """Remote evaluator answered with a body that violates the cnle/1 protocol."""


class PipelineError(CherryRecError):
    """A recommendation stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
