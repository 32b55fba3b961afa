"""Gaussian coding families: closed-form cross-entropies and best fits.

A coding family constrains the covariance of the Gaussian used to encode a
cluster. Six constraints are supported:

* ``FixedCovariance(sigma)`` - covariance pinned to one matrix; clusters look
  like unit balls of the Mahalanobis metric of ``sigma``.
* ``FixedRadius(r)`` - covariance ``r * I``; circles of radius ~sqrt(r).
* ``Spherical()`` - covariance proportional to the identity; circles of any size.
* ``Diagonal()`` - axis-aligned ellipsoids.
* ``Full()`` - arbitrary ellipsoids.
* ``FixedEigenvalues(lambdas)`` - prescribed covariance spectrum but free
  orientation and position; the shape-and-size-locked family used to count
  identical elongated objects.

``cross_entropy`` returns the best achievable mean code length (nats) for the
cluster within the family; ``best_fit`` returns the Gaussian attaining it.
Before either formula is evaluated, the cluster covariance is regularized to
``cov + epsilon * I``. The shift is applied uniformly to every family so that
values of nested families stay comparable to machine precision; families
whose formulas stay finite on singular covariances simply do not require it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCluster, DimensionMismatch, InvalidSpectrum
from .linalg import ClusterStats, eigh, symmetrize

__all__ = [
    "FixedCovariance",
    "FixedRadius",
    "Spherical",
    "Diagonal",
    "Full",
    "FixedEigenvalues",
    "FamilySpec",
    "FittedGaussian",
    "DEFAULT_EPSILON",
    "cross_entropy",
    "best_fit",
    "min_trace_product",
]

#: default ridge added to cluster covariances before formula evaluation
DEFAULT_EPSILON = 1e-6

_LN_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class FixedCovariance:
    """All Gaussians with one prescribed positive-definite covariance.

    Compares by identity: the covariance field is an array, so value
    equality would be ambiguous.
    """

    #: cross-entropy stays finite on singular cluster covariances
    needs_regularization = False

    covariance: np.ndarray

    def __post_init__(self):
        cov = symmetrize(self.covariance)
        decomp = eigh(cov)
        if decomp.eigenvalues[-1] <= 0.0:
            raise InvalidSpectrum(
                f"fixed covariance must be positive definite "
                f"(smallest eigenvalue {decomp.eigenvalues[-1]:g})"
            )
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]


@dataclass(frozen=True)
class FixedRadius:
    """Gaussians with covariance r*I for one fixed r > 0."""

    needs_regularization = False

    radius: float

    def __post_init__(self):
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise InvalidSpectrum(f"fixed radius must be positive, got {self.radius!r}")


@dataclass(frozen=True)
class Spherical:
    """Gaussians with covariance proportional to the identity."""

    #: ln tr blows up on all-zero cluster covariances
    needs_regularization = True


@dataclass(frozen=True)
class Diagonal:
    """Gaussians with diagonal covariance."""

    #: ln det diverges on clusters flat along any axis
    needs_regularization = True


@dataclass(frozen=True)
class Full:
    """All Gaussians, no covariance constraint."""

    #: ln det diverges on singular cluster covariances
    needs_regularization = True


@dataclass(frozen=True)
class FixedEigenvalues:
    """Gaussians whose covariance spectrum is prescribed, orientation free."""

    needs_regularization = False

    lambdas: tuple

    def __post_init__(self):
        lam = tuple(float(v) for v in np.atleast_1d(np.asarray(self.lambdas, dtype=np.float64)))
        if not lam:
            raise InvalidSpectrum("fixed eigenvalue list is empty")
        if any(not (v > 0.0 and math.isfinite(v)) for v in lam):
            raise InvalidSpectrum(f"fixed eigenvalues must be positive, got {lam}")
        if any(lam[i] < lam[i + 1] for i in range(len(lam) - 1)):
            raise InvalidSpectrum(f"fixed eigenvalues must be sorted descending, got {lam}")
        object.__setattr__(self, "lambdas", lam)

    @property
    def dim(self) -> int:
        return len(self.lambdas)


FamilySpec = (
    FixedCovariance | FixedRadius | Spherical | Diagonal | Full | FixedEigenvalues
)


@dataclass
class FittedGaussian:
    """Mean and positive-definite covariance of a fitted Gaussian."""

    mean: np.ndarray
    covariance: np.ndarray


def family_dim(spec: FamilySpec):
    """Dimension a family is pinned to, or None if it adapts to the data."""
    if isinstance(spec, (FixedCovariance, FixedEigenvalues)):
        return spec.dim
    return None


def _effective_covariance(spec: FamilySpec, stats: ClusterStats, epsilon: float) -> np.ndarray:
    if stats.count < 1:
        raise DegenerateCluster("cross-entropy of an empty cluster is undefined")
    pinned = family_dim(spec)
    if pinned is not None and pinned != stats.dim:
        raise DimensionMismatch(
            f"family is {pinned}-dimensional but cluster statistics are {stats.dim}-dimensional"
        )
    cov = stats.covariance()
    if epsilon:
        cov = cov + epsilon * np.eye(stats.dim)
    return cov


def _descending_eigenvalues(cov: np.ndarray) -> np.ndarray:
    return eigh(cov).eigenvalues


def cross_entropy(spec: FamilySpec, stats: ClusterStats, epsilon: float = DEFAULT_EPSILON) -> float:
    """Best mean code length (nats) of the cluster within the family.

    ``epsilon`` is the ridge added to the cluster covariance; pass 0.0 to
    evaluate the raw formulas (Full/Diagonal/Spherical then raise
    DegenerateCluster on singular covariances instead of regularizing them).
    """
    cov = _effective_covariance(spec, stats, epsilon)
    n = stats.dim
    half_n = 0.5 * n

    if isinstance(spec, FixedCovariance):
        decomp = eigh(spec.covariance)
        inv = decomp.eigenvectors @ np.diag(1.0 / decomp.eigenvalues) @ decomp.eigenvectors.T
        logdet = float(np.sum(np.log(decomp.eigenvalues)))
        return half_n * _LN_2PI + 0.5 * float(np.sum(inv * cov)) + 0.5 * logdet

    if isinstance(spec, FixedRadius):
        r = spec.radius
        return half_n * _LN_2PI + float(np.trace(cov)) / (2.0 * r) + half_n * math.log(r)

    if isinstance(spec, Spherical):
        tr = float(np.trace(cov))
        if tr <= 0.0:
            raise DegenerateCluster("spherical family needs a positive covariance trace")
        return half_n * math.log(2.0 * math.pi * math.e / n) + half_n * math.log(tr)

    if isinstance(spec, Diagonal):
        diag = np.diag(cov)
        if np.any(diag <= 0.0):
            raise DegenerateCluster("diagonal family needs positive per-axis variances")
        return half_n * (_LN_2PI + 1.0) + 0.5 * float(np.sum(np.log(diag)))

    if isinstance(spec, Full):
        values = _descending_eigenvalues(cov)
        if values[-1] <= 0.0:
            raise DegenerateCluster("full family needs a nonsingular covariance")
        return half_n * (_LN_2PI + 1.0) + 0.5 * float(np.sum(np.log(values)))

    if isinstance(spec, FixedEigenvalues):
        lam = np.asarray(spec.lambdas)
        values = _descending_eigenvalues(cov)  # descending, paired with descending lam
        return (
            half_n * _LN_2PI
            + 0.5 * float(np.sum(values / lam))
            + 0.5 * float(np.sum(np.log(lam)))
        )

    raise TypeError(f"unknown family spec {spec!r}")


def best_fit(spec: FamilySpec, stats: ClusterStats, epsilon: float = DEFAULT_EPSILON) -> FittedGaussian:
    """Gaussian attaining ``cross_entropy`` for the cluster within the family."""
    cov = _effective_covariance(spec, stats, epsilon)
    n = stats.dim
    mean = stats.mean.copy()

    if isinstance(spec, FixedCovariance):
        return FittedGaussian(mean, spec.covariance.copy())
    if isinstance(spec, FixedRadius):
        return FittedGaussian(mean, spec.radius * np.eye(n))
    if isinstance(spec, Spherical):
        tr = float(np.trace(cov))
        if tr <= 0.0:
            raise DegenerateCluster("spherical family needs a positive covariance trace")
        return FittedGaussian(mean, (tr / n) * np.eye(n))
    if isinstance(spec, Diagonal):
        diag = np.diag(cov)
        if np.any(diag <= 0.0):
            raise DegenerateCluster("diagonal family needs positive per-axis variances")
        return FittedGaussian(mean, np.diag(diag.copy()))
    if isinstance(spec, Full):
        if _descending_eigenvalues(cov)[-1] <= 0.0:
            raise DegenerateCluster("full family needs a nonsingular covariance")
        return FittedGaussian(mean, cov)
    if isinstance(spec, FixedEigenvalues):
        decomp = eigh(cov)
        v = decomp.eigenvectors
        fitted = symmetrize(v @ np.diag(np.asarray(spec.lambdas)) @ v.T)
        return FittedGaussian(mean, fitted)

    raise TypeError(f"unknown family spec {spec!r}")


def min_trace_product(lambdas_asc, b) -> float:
    """Minimum of tr(A @ b) over symmetric A with the prescribed spectrum.

    ``lambdas_asc`` must be nonnegative and sorted ascending; ``b`` must be
    symmetric PSD. The minimum pairs the ascending spectrum with the
    descending eigenvalues of ``b`` and is attained by aligning A's
    eigenvectors with b's (smallest lambda on b's largest direction).
    """
    lam = np.atleast_1d(np.asarray(lambdas_asc, dtype=np.float64))
    if lam.ndim != 1 or lam.size == 0:
        raise InvalidSpectrum("expected a nonempty eigenvalue list")
    if np.any(lam < 0.0) or not np.all(np.isfinite(lam)):
        raise InvalidSpectrum(f"spectrum must be nonnegative and finite, got {lam}")
    if np.any(lam[:-1] > lam[1:]):
        raise InvalidSpectrum(f"spectrum must be sorted ascending, got {lam}")
    beta = _descending_eigenvalues(symmetrize(b))
    if beta.size != lam.size:
        raise DimensionMismatch(
            f"spectrum of length {lam.size} does not match a {beta.size}x{beta.size} matrix"
        )
    return float(np.dot(lam, beta))
