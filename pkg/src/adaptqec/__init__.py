"""Real-time Pauli error-rate estimation and adaptive decoding for stabilizer codes."""

from adaptqec.errors import (
    GraphError,
    InputError,
    InvariantError,
    NumericalError,
    SizeError,
    UnsupportedChannelError,
)

__version__ = "0.1.0"

__all__ = [
    "GraphError",
    "InputError",
    "InvariantError",
    "NumericalError",
    "SizeError",
    "UnsupportedChannelError",
]
