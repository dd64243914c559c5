"""capnet: norm-based capacity bounds, rank-1 compression and Rademacher
complexity estimation for feedforward networks."""

from .errors import (DegenerateLayerError, NumericalError, ParseError,
                     ShapeError, VerificationError)

__version__ = "0.1.0"

__all__ = [
    "DegenerateLayerError",
    "NumericalError",
    "ParseError",
    "ShapeError",
    "VerificationError",
    "__version__",
]
