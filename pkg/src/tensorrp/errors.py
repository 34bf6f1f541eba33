"""Exception types raised by tensorrp."""


class TensorRPError(Exception):
    """Base class for all tensorrp errors."""


class ShapeMismatch(TensorRPError, ValueError):
    """Operands do not agree on their mode dimensions."""


class ElementCapExceeded(TensorRPError, MemoryError):
    """A dense materialization would exceed the configured element cap."""

    def __init__(self, n_elements: int, cap: int, what: str = "tensor"):
        self.n_elements = n_elements
        self.cap = cap
        super().__init__(
            f"materializing {what} needs {n_elements} elements, cap is {cap}"
        )


class InvalidSpec(TensorRPError, ValueError):
    """A projection or experiment configuration is malformed."""


class ZeroNormInput(TensorRPError, ValueError):
    """Distortion is undefined for an input with zero norm."""


class TooLargeToEnumerate(TensorRPError, ValueError):
    """Exhaustive sign enumeration was requested over too many entries."""


class ContractionError(TensorRPError, ArithmeticError):
    """A contraction produced a value that signals an internal bug."""
