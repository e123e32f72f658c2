"""
Exceptions raised by the BSBM library
"""
from typing import Optional


class BsbmError(ValueError):
    """Base class for every library error"""


class InvalidParameters(BsbmError):
    """Model or experiment parameters violate a precondition"""


class DegenerateInput(BsbmError):
    """Estimator input carries no usable signal (e.g. an empty graph)"""


class ZeroOperator(DegenerateInput):
    """Operator norm estimate fell below the degeneracy floor"""


class NoTransitionFound(BsbmError):
    """Success rate never crossed the pilot thresholds"""


class SizeCapExceeded(BsbmError):
    """Dense computation requested beyond the configured cap"""


class MalformedInput(BsbmError):
    """A data file or config could not be parsed"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
