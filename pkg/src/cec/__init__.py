"""Cross-entropy clustering (CEC) for detecting elliptical shapes.

The package minimizes the partition energy

    E = sum_i p_i * (-ln p_i + H(cluster_i | family_i))

by Hartigan single-point moves with automatic removal of underweight
clusters, over Gaussian coding families that can pin the covariance fully,
by radius, by spectrum, or not at all. Typical use:

    >>> import numpy as np
    >>> from cec import EngineConfig, Full, run
    >>> points = np.random.default_rng(0).normal(size=(500, 2))
    >>> result = run(points, EngineConfig(family_pool=[(Full(), 5)], seed=1))
    >>> len(result.fitted)
    1

The ``cec`` console script adds image binarization, a JSON report and an
SVG overlay on top of the same engine.
"""

from .engine import (
    UNASSIGNED,
    ClusterFit,
    ClusteringResult,
    ClusterSlot,
    EngineConfig,
    Partition,
    apply_move,
    energy,
    move_delta,
    remove_underweight,
    run,
)
from .errors import (
    CecError,
    ConfigError,
    ConstantImage,
    DegenerateCluster,
    DimensionMismatch,
    EmptyCluster,
    EmptyInput,
    ForbiddenMove,
    InvalidMatrix,
    InvalidSpectrum,
    UnsupportedDimensionForSvg,
)
from .families import (
    DEFAULT_EPSILON,
    Diagonal,
    FamilySpec,
    FittedGaussian,
    FixedCovariance,
    FixedEigenvalues,
    FixedRadius,
    Full,
    Spherical,
    best_fit,
    cross_entropy,
    min_trace_product,
)
from .image import BinaryMask, binarize, load_image, mask_to_points, otsu_threshold
from .linalg import (
    ClusterStats,
    EigenDecomp,
    add_point,
    eigh,
    remove_point,
    stats_from_points,
    symmetrize,
)

__version__ = "0.1.0"
