"""Exception types shared across the package.

Every error raised on a documented failure path derives from CecError, so
callers (in particular the CLI) can map failures to exit codes uniformly.
"""


class CecError(Exception):
    """Base class for all errors raised by this package."""

    #: short machine-parsable identifier, used by the CLI error prefix
    kind = "error"


class InvalidMatrix(CecError):
    """Matrix input is not finite or not symmetric."""

    kind = "invalid-matrix"


class DimensionMismatch(CecError):
    """Operands carry inconsistent dimensions."""

    kind = "dimension-mismatch"


class EmptyCluster(CecError):
    """Attempt to remove a point from empty statistics."""

    kind = "empty-cluster"


class DegenerateCluster(CecError):
    """A cluster's (regularized) covariance cannot support its coding family."""

    kind = "degenerate-cluster"

    def __init__(self, message, cluster=None):
        super().__init__(message)
        self.cluster = cluster


class InvalidSpectrum(CecError):
    """Prescribed eigenvalue list is negative or not sorted as required."""

    kind = "invalid-spectrum"


class ForbiddenMove(CecError):
    """Single-point move would shrink its source cluster below the minimum size."""

    kind = "forbidden-move"


class EmptyInput(CecError):
    """No points were supplied to the clustering engine."""

    kind = "empty-input"


class ConstantImage(CecError):
    """Otsu thresholding received an image with a single gray level."""

    kind = "constant-image"


class ConfigError(CecError):
    """Malformed configuration value (family spec, flag, threshold, ...)."""

    kind = "config"


class UnsupportedDimensionForSvg(CecError):
    """SVG rendering is defined for 2-D results only."""

    kind = "unsupported-dimension-for-svg"
