"""Exception types shared across the package.

The CLI maps these onto exit codes: parse/shape problems exit 2,
verification failures exit 3, numerical failures exit 4.
"""


class ParseError(ValueError):
    """A file or object failed strict validation; message names the offender."""


class ShapeError(ValueError):
    """Dimension mismatch; message names the offending layer or field."""


class DegenerateLayerError(ValueError):
    """An all-zero layer makes a norm ratio or product undefined."""


class NumericalError(RuntimeError):
    """A numerical routine failed to converge (never silent garbage)."""


class VerificationError(RuntimeError):
    """A certified inequality or property check was violated."""
