"""Exception hierarchy shared by all layergauge modules."""


class LayerGaugeError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(LayerGaugeError, ValueError):
    """Tensor shapes do not line up along some axis."""


class ConfigurationError(LayerGaugeError, ValueError):
    """Structural parameters are inconsistent (bad stride, window, n, ...)."""


class WeightError(LayerGaugeError, ValueError):
    """A weight bundle is missing a tensor or carries a wrongly shaped one."""


class FormatError(LayerGaugeError, ValueError):
    """A binary container does not follow the expected layout."""


class ContainerIOError(LayerGaugeError, OSError):
    """Reading or writing a container failed (truncation, permissions)."""


class ValidationError(LayerGaugeError, ValueError):
    """Input data violates a documented precondition."""
