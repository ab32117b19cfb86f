class RiseError(Exception):
    """Base class for errors raised by risetest."""


class ValidationError(RiseError, ValueError):
    """Malformed input: bad shapes, non-finite values, invalid matrices, bad parameters."""


class DegenerateCovarianceError(RiseError):
    """The permutation covariance of (U_x, U_y) is singular.

    Fall back to a permutation p-value for a statistic that stays defined, or
    build a different similarity graph.
    """

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class InfeasibleMatchingError(RiseError):
    """The residual graph has no (near-)perfect matching for the requested layer."""

    def __init__(self, layer, found, wanted):
        super().__init__(
            f"layer {layer}: residual graph admits only {found} disjoint pairs, need {wanted}")
        self.layer = layer
