"""Exception types shared across the lab."""


class LabError(Exception):
    """Base class for every error this package raises on purpose."""


class StructuralError(LabError):
    """Shapes, lengths, or schemas that do not line up."""


class NumericError(LabError):
    """Non-finite values where finite arithmetic is required."""


class ConfigError(LabError):
    """Invalid experiment configuration or operation parameters."""


class GmmFitError(LabError):
    """Mixture fit collapsed numerically despite the variance floors."""


class InsufficientDataError(GmmFitError):
    """Too few points to fit the mixture."""


class NotFoundError(LabError):
    """A requested run artifact does not exist."""
