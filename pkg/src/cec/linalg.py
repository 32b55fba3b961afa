"""Small dense symmetric-matrix algebra and incremental cluster moments.

Everything here works on plain float64 numpy arrays. Matrices are kept
exactly symmetric (use :func:`symmetrize` when building one from data), and
all operations are pure: inputs are never mutated and results own their
storage, so the module is safe to use from concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyCluster, InvalidMatrix

__all__ = [
    "EigenDecomp",
    "ClusterStats",
    "symmetrize",
    "eigh",
    "stats_from_points",
    "add_point",
    "remove_point",
]

# Off-diagonal Frobenius norm below this fraction of the input norm counts
# as converged for the Jacobi sweep.
_JACOBI_RTOL = 1e-12
_MAX_JACOBI_SWEEPS = 100


def symmetrize(m) -> np.ndarray:
    """Return 0.5*(m + m.T) as a fresh float64 array."""
    a = np.asarray(m, dtype=np.float64)
    return 0.5 * (a + a.T)


@dataclass
class EigenDecomp:
    """Eigenvalues (descending) and matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray   # shape (n,), sorted descending
    eigenvectors: np.ndarray  # shape (n, n), column i pairs with eigenvalues[i]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return symmetrize(v @ np.diag(self.eigenvalues) @ v.T)


def eigh(m) -> EigenDecomp:
    """Eigendecompose a symmetric matrix with cyclic Jacobi rotations.

    Suited to the small dense matrices this package works with (typically
    2x2, at most a few dozen rows). Output is deterministic: eigenvalues are
    sorted descending and each eigenvector's first component of nonnegligible
    magnitude is made positive.

    Raises InvalidMatrix if ``m`` has non-finite entries or is not symmetric.
    """
    a = np.array(m, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidMatrix(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix("matrix has non-finite entries")
    n = a.shape[0]
    scale = float(np.max(np.abs(a))) if n else 0.0
    if float(np.max(np.abs(a - a.T), initial=0.0)) > 1e-8 * (1.0 + scale):
        raise InvalidMatrix("matrix is not symmetric")
    a = 0.5 * (a + a.T)

    v = np.eye(n)
    target = _JACOBI_RTOL * max(np.linalg.norm(a), np.finfo(np.float64).tiny)
    hollow = ~np.eye(n, dtype=bool)
    with np.errstate(over="ignore"):
        for _ in range(_MAX_JACOBI_SWEEPS):
            off = np.linalg.norm(a[hollow]) if n > 1 else 0.0
            if off < target:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                    t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0.0 else 1.0
                    c = 1.0 / np.hypot(1.0, t)
                    s = t * c
                    # rotate rows/columns p and q
                    rp = c * a[p, :] - s * a[q, :]
                    rq = s * a[p, :] + c * a[q, :]
                    a[p, :], a[q, :] = rp, rq
                    cp = c * a[:, p] - s * a[:, q]
                    cq = s * a[:, p] + c * a[:, q]
                    a[:, p], a[:, q] = cp, cq
                    a[p, q] = a[q, p] = 0.0
                    vp = c * v[:, p] - s * v[:, q]
                    vq = s * v[:, p] + c * v[:, q]
                    v[:, p], v[:, q] = vp, vq

    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = v[:, order]
    # deterministic sign: first component of appreciable size made positive
    for j in range(n):
        col = vectors[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        pivot = nz[0] if nz.size else 0
        if col[pivot] < 0.0:
            vectors[:, j] = -col
    return EigenDecomp(eigenvalues=values, eigenvectors=vectors)


@dataclass
class ClusterStats:
    """Running point count, mean and unnormalized scatter of one cluster.

    ``scatter`` holds sum((x - mean)(x - mean)^T); divide by ``count`` to get
    the population covariance. A zero count is the empty sentinel with
    all-zero mean and scatter.
    """

    count: int
    mean: np.ndarray     # shape (dim,)
    scatter: np.ndarray  # shape (dim, dim), symmetric PSD

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def empty(cls, dim: int) -> "ClusterStats":
        return cls(count=0, mean=np.zeros(dim), scatter=np.zeros((dim, dim)))

    @classmethod
    def from_moments(cls, mean, covariance, count: int = 1) -> "ClusterStats":
        """Build stats equivalent to ``count`` points with the given moments."""
        mean = np.asarray(mean, dtype=np.float64)
        cov = symmetrize(covariance)
        if cov.shape != (mean.size, mean.size):
            raise DimensionMismatch(
                f"covariance shape {cov.shape} does not match mean of size {mean.size}"
            )
        if count < 1:
            raise EmptyCluster("from_moments needs count >= 1")
        return cls(count=int(count), mean=mean.copy(), scatter=cov * count)

    def covariance(self) -> np.ndarray:
        """Population covariance scatter/count (zero matrix for the sentinel)."""
        if self.count == 0:
            return np.zeros_like(self.scatter)
        return self.scatter / self.count

    def copy(self) -> "ClusterStats":
        return ClusterStats(self.count, self.mean.copy(), self.scatter.copy())


def _as_point(x, dim: int) -> np.ndarray:
    p = np.asarray(x, dtype=np.float64)
    if p.shape != (dim,):
        raise DimensionMismatch(f"point of shape {p.shape} does not match dimension {dim}")
    return p


def stats_from_points(points) -> ClusterStats:
    """Batch mean and population covariance of a point set.

    ``points`` is an (n, dim) array-like. The covariance normalizes by n (the
    points are treated as a probability measure), so a single point has zero
    covariance. An empty input yields the zero-count sentinel.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        dim = pts.shape[1] if pts.ndim == 2 else 0
        return ClusterStats.empty(dim)
    if pts.ndim != 2:
        raise DimensionMismatch(f"expected an (n, dim) array, got shape {pts.shape}")
    mean = pts.mean(axis=0)
    centered = pts - mean
    scatter = symmetrize(centered.T @ centered)
    return ClusterStats(count=pts.shape[0], mean=mean, scatter=scatter)


def add_point(s: ClusterStats, x) -> ClusterStats:
    """Stats of the multiset with ``x`` added (rank-one Welford update)."""
    if s.count == 0:
        p = _as_point(x, s.dim) if s.dim else np.asarray(x, dtype=np.float64)
        return ClusterStats(count=1, mean=p.copy(), scatter=np.zeros((p.size, p.size)))
    p = _as_point(x, s.dim)
    new_count = s.count + 1
    delta = p - s.mean
    mean = s.mean + delta / new_count
    scatter = s.scatter + np.outer(delta, delta) * (s.count / new_count)
    return ClusterStats(count=new_count, mean=mean, scatter=symmetrize(scatter))


def remove_point(s: ClusterStats, x) -> ClusterStats:
    """Stats of the multiset with one occurrence of ``x`` removed.

    ``x`` must have been added previously; removing the last point returns the
    zero-count sentinel exactly.
    """
    if s.count == 0:
        raise EmptyCluster("cannot remove a point from empty statistics")
    p = _as_point(x, s.dim)
    new_count = s.count - 1
    if new_count == 0:
        return ClusterStats.empty(s.dim)
    mean = s.mean + (s.mean - p) / new_count
    delta = p - mean
    scatter = s.scatter - np.outer(delta, delta) * (new_count / s.count)
    return ClusterStats(count=new_count, mean=mean, scatter=symmetrize(scatter))
