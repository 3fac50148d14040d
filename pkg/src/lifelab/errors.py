"""Exceptions shared across modules."""


class ShapeMismatch(ValueError):
    """Array dimensions differ from what the consumer was configured for."""


class NonFiniteValue(ArithmeticError):
    """A NaN or Inf appeared where the contract requires finite values."""


class LengthMismatch(ValueError):
    """A flat parameter vector has the wrong length for its consumer."""
