"""Layer-wise measurement of off-the-shelf CNN feature transferability."""

from layergauge._accel import BACKEND
from layergauge.errors import (
    ConfigurationError,
    ContainerIOError,
    DimensionError,
    FormatError,
    LayerGaugeError,
    ValidationError,
    WeightError,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigurationError",
    "ContainerIOError",
    "DimensionError",
    "FormatError",
    "LayerGaugeError",
    "ValidationError",
    "WeightError",
]
