"""Exception hierarchy. The CLI maps each family to an exit code."""


class InputError(ValueError):
    """Malformed or out-of-domain input (exit code 1)."""


class SizeError(InputError):
    """An exhaustive enumeration would exceed its cap."""


class UnsupportedChannelError(InputError):
    """Channel whose product form needs complex rates (some alpha_u <= 0)."""


class GraphError(InputError):
    """Decoding graph is inconsistent, or a defect cannot be matched."""


class NumericalError(ArithmeticError):
    """Root finding failed or a posterior became degenerate (exit code 2)."""


class InvariantError(RuntimeError):
    """An internal invariant was violated (exit code 3)."""
