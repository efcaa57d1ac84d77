"""Exception hierarchy shared by every module."""


class FedGLMError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(FedGLMError, ValueError):
    pass


class EmptyInput(FedGLMError, ValueError):
    pass


class SingularDesign(FedGLMError, ArithmeticError):
    """Raised when a triangular factor has a (near-)zero diagonal entry."""

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"design is rank deficient at column {column}")


class DegenerateDof(FedGLMError, ArithmeticError):
    def __init__(self, n, p):
        self.n, self.p = n, p
        super().__init__(f"no residual degrees of freedom: n={n}, p={p}")


class DomainError(FedGLMError, ValueError):
    pass


class NotConverged(FedGLMError, ArithmeticError):
    """IRLS exhausted its iteration budget.

    ``result`` holds the last iterate so callers can still inspect it.
    """

    def __init__(self, maxit, result=None):
        self.maxit = maxit
        self.result = result
        super().__init__(f"IRLS did not converge within maxit={maxit}")


class ConfigError(FedGLMError, ValueError):
    pass


class CodecError(FedGLMError, ValueError):
    def __init__(self, offset, message):
        self.offset = offset
        super().__init__(f"{message} (at byte offset {offset})")


class ProtocolError(FedGLMError, RuntimeError):
    pass


class PeerTimeout(ProtocolError):
    def __init__(self, node, round):
        self.node = node
        self.round = round
        super().__init__(f"timed out waiting for node {node} in round {round}")


class DataError(FedGLMError, ValueError):
    pass


class MissingColumn(DataError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column!r} not found in header")


class ParseError(DataError):
    def __init__(self, row, column, value):
        self.row, self.column, self.value = row, column, value
        super().__init__(f"cannot parse {value!r} as a number (row {row}, column {column!r})")


class EmptyFile(DataError):
    pass


class UnknownLevel(DataError):
    def __init__(self, row, column, value):
        self.row, self.column, self.value = row, column, value
        super().__init__(f"unknown level {value!r} in column {column!r} (row {row})")


class InvalidPartition(DataError):
    pass


class NameMismatch(FedGLMError, ValueError):
    pass
