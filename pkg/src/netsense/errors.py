"""Exception hierarchy shared across the package."""


class NetsenseError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(NetsenseError):
    """Invalid configuration: dimension mismatch, bad schedule spec, bad key."""


class CorruptGradientError(NetsenseError):
    """A gradient or residual contains non-finite entries."""


class CorruptPayloadError(NetsenseError):
    """A compressed payload cannot be decoded (index out of range, bad shape)."""


class MeasurementError(NetsenseError):
    """An interval measurement is physically impossible (rtt <= 0, size <= 0)."""


class EstimatorNotReady(NetsenseError):
    """A bandwidth/delay estimate was requested before any measurement."""


class SimulationError(NetsenseError):
    """The event loop cannot make progress (e.g. zero service rate forever)."""
