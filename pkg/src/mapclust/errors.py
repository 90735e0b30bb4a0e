"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: usage problems are plain
``ValueError`` (exit 1), malformed or inconsistent input data is
``DataError`` (exit 2), and numerical failures are ``ConvergenceError``
(exit 3).
"""


class DataError(Exception):
    """Input data is malformed or inconsistent (bad file, length mismatch...)."""


class ConvergenceError(RuntimeError):
    """An iterative numerical routine failed to converge."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
