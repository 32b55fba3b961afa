"""Partition-energy minimization by Hartigan single-point moves.

The energy of a partition U_1..U_k with per-cluster coding families F_i is

    E = sum_i p_i * (-ln p_i + H(U_i | F_i)),      p_i = |U_i| / n,

the mean code length of encoding a point by its cluster id plus the best
in-family code for the cluster. ``run`` minimizes E by repeatedly moving
single points to the cluster giving the largest strict decrease, removing
clusters whose weight drops below a threshold after each sweep, and keeping
the best of several seeded restarts. Cluster removal is how the number of
clusters is discovered: start with more than you expect and let the id-cost
starve the ones that earn their keep nowhere.

The module-level partition operations (:func:`energy`, :func:`move_delta`,
:func:`apply_move`, :func:`remove_underweight`) are plain numpy
implementations of the same arithmetic. ``run`` itself drives the compiled
kernel in :mod:`cec._kernel`; the tests hold the two routes together.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .errors import (
    ConfigError,
    DegenerateCluster,
    DimensionMismatch,
    EmptyInput,
    ForbiddenMove,
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
    family_dim,
)
from .linalg import ClusterStats, add_point, eigh, remove_point, stats_from_points

__all__ = [
    "UNASSIGNED",
    "ClusterSlot",
    "Partition",
    "EngineConfig",
    "ClusterFit",
    "ClusteringResult",
    "energy",
    "move_delta",
    "apply_move",
    "remove_underweight",
    "run",
]

#: label value for points not (yet) assigned to any cluster
UNASSIGNED = -1

_U64 = (1 << 64) - 1


def _scramble64(x: int) -> int:
    """splitmix64 finalizer; spreads restart indices into far-apart states."""
    z = x & _U64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return z ^ (z >> 31)


def _default_min_size(spec: FamilySpec, dim: int) -> int:
    return dim + 1 if spec.needs_regularization else 1


@dataclass
class ClusterSlot:
    """One cluster of a partition: its stats, coding family and alive flag."""

    stats: ClusterStats
    family: FamilySpec
    alive: bool = True


@dataclass
class Partition:
    """Assignment of points to clusters plus tracked total energy."""

    points: np.ndarray          # (n, dim)
    labels: np.ndarray          # (n,) int64, cluster index or UNASSIGNED
    clusters: list              # of ClusterSlot
    epsilon: float = DEFAULT_EPSILON
    min_weight: float = 0.02
    min_sizes: np.ndarray = None
    tracked_energy: float = 0.0

    @property
    def total_count(self) -> int:
        return int(np.sum(self.labels >= 0))

    @classmethod
    def from_labels(cls, points, labels, families, epsilon: float = DEFAULT_EPSILON,
                    min_weight: float = 0.02, min_cluster_size=None) -> "Partition":
        pts = np.asarray(points, dtype=np.float64)
        lab = np.asarray(labels, dtype=np.int64).copy()
        dim = pts.shape[1]
        slots = []
        for c, fam in enumerate(families):
            members = pts[lab == c]
            slots.append(ClusterSlot(stats=stats_from_points(members)
                                     if len(members) else ClusterStats.empty(dim),
                                     family=fam, alive=True))
        sizes = np.array(
            [min_cluster_size if min_cluster_size is not None
             else _default_min_size(f, dim) for f in families],
            dtype=np.int64,
        )
        part = cls(points=pts, labels=lab, clusters=slots, epsilon=epsilon,
                   min_weight=min_weight, min_sizes=sizes)
        part.tracked_energy = energy(part)
        return part

    def copy(self) -> "Partition":
        return Partition(
            points=self.points,
            labels=self.labels.copy(),
            clusters=[ClusterSlot(s.stats.copy(), s.family, s.alive) for s in self.clusters],
            epsilon=self.epsilon,
            min_weight=self.min_weight,
            min_sizes=self.min_sizes.copy(),
            tracked_energy=self.tracked_energy,
        )


def _slot_contrib(slot: ClusterSlot, n: int, epsilon: float) -> float:
    if not slot.alive or slot.stats.count == 0:
        return 0.0
    p = slot.stats.count / n
    return p * (cross_entropy(slot.family, slot.stats, epsilon) - math.log(p))


def energy(p: Partition) -> float:
    """Partition energy recomputed from the stored cluster statistics."""
    n = p.total_count
    total = 0.0
    for idx, slot in enumerate(p.clusters):
        try:
            total += _slot_contrib(slot, n, p.epsilon)
        except DegenerateCluster as exc:
            raise DegenerateCluster(f"cluster {idx}: {exc}", cluster=idx) from exc
    return total


def move_delta(p: Partition, point_index: int, target_cluster: int) -> float:
    """Energy change of moving one point to ``target_cluster``.

    Computed incrementally from rank-one stat updates; raises ForbiddenMove
    when the move would shrink the source below its minimum size or the
    target is not alive.
    """
    s = int(p.labels[point_index])
    if s == UNASSIGNED:
        raise ForbiddenMove(f"point {point_index} is unassigned")
    t = int(target_cluster)
    if t < 0 or t >= len(p.clusters) or not p.clusters[t].alive:
        raise ForbiddenMove(f"target cluster {t} is not alive")
    if t == s:
        return 0.0
    src = p.clusters[s]
    if src.stats.count - 1 < int(p.min_sizes[s]):
        raise ForbiddenMove(
            f"moving point {point_index} would shrink cluster {s} below "
            f"{int(p.min_sizes[s])} points"
        )
    n = p.total_count
    x = p.points[point_index]
    dst = p.clusters[t]
    new_src = ClusterSlot(remove_point(src.stats, x), src.family)
    new_dst = ClusterSlot(add_point(dst.stats, x), dst.family)
    return (
        _slot_contrib(new_src, n, p.epsilon)
        + _slot_contrib(new_dst, n, p.epsilon)
        - _slot_contrib(src, n, p.epsilon)
        - _slot_contrib(dst, n, p.epsilon)
    )


def apply_move(p: Partition, point_index: int, target_cluster: int) -> Partition:
    """New partition with the point moved and tracked energy updated."""
    delta = move_delta(p, point_index, target_cluster)
    s = int(p.labels[point_index])
    t = int(target_cluster)
    out = p.copy()
    if t != s:
        x = p.points[point_index]
        out.clusters[s].stats = remove_point(p.clusters[s].stats, x)
        out.clusters[t].stats = add_point(p.clusters[t].stats, x)
        out.labels[point_index] = t
        out.tracked_energy = p.tracked_energy + delta
    return out


def remove_underweight(p: Partition, min_weight=None) -> Partition:
    """Kill alive clusters lighter than ``min_weight`` and refile their points.

    Every flagged cluster dies at once; each of its points then joins the
    surviving cluster whose energy contribution grows the least. If all
    clusters are underweight the largest one is kept. Idempotent once no
    cluster is underweight.
    """
    if min_weight is None:
        min_weight = p.min_weight
    n = p.total_count
    thr = min_weight * n
    out = p.copy()
    flagged = [
        i for i, slot in enumerate(out.clusters)
        if slot.alive and slot.stats.count < thr
    ]
    alive_ids = [i for i, slot in enumerate(out.clusters) if slot.alive]
    if len(flagged) == len(alive_ids) and flagged:
        keep = max(alive_ids, key=lambda i: (out.clusters[i].stats.count, -i))
        flagged.remove(keep)
    if not flagged:
        return out
    for dead in flagged:
        slot = out.clusters[dead]
        out.tracked_energy -= _slot_contrib(slot, n, out.epsilon)
        slot.alive = False
    survivors = [i for i, slot in enumerate(out.clusters) if slot.alive]
    for i in range(len(out.labels)):
        c = int(out.labels[i])
        if c == UNASSIGNED or out.clusters[c].alive:
            continue
        x = out.points[i]
        best_t = -1
        best_inc = math.inf
        for t in survivors:
            slot = out.clusters[t]
            cand = ClusterSlot(add_point(slot.stats, x), slot.family)
            inc = _slot_contrib(cand, n, out.epsilon) - _slot_contrib(slot, n, out.epsilon)
            if inc < best_inc:
                best_inc = inc
                best_t = t
        out.clusters[best_t].stats = add_point(out.clusters[best_t].stats, x)
        out.labels[i] = best_t
        out.tracked_energy += best_inc
    for dead in flagged:
        out.clusters[dead].stats = ClusterStats.empty(p.points.shape[1])
    return out


@dataclass
class EngineConfig:
    """Knobs of the minimizer; defaults follow the package conventions."""

    family_pool: list            # of (FamilySpec, initial cluster count)
    min_weight: float = 0.02
    max_sweeps: int = 100
    restarts: int = 10
    seed: int = 0
    epsilon_reg: float = DEFAULT_EPSILON
    min_cluster_size: int = None  # None: dim+1 for Full/Diagonal/Spherical, 1 otherwise

    def __post_init__(self):
        if not self.family_pool:
            raise ConfigError("family pool is empty")
        total = 0
        for entry in self.family_pool:
            try:
                _, cnt = entry
            except (TypeError, ValueError):
                raise ConfigError(
                    f"family pool entries must be (family, count) pairs, got {entry!r}"
                ) from None
            if int(cnt) < 0:
                raise ConfigError(f"initial cluster count must be nonnegative, got {cnt}")
            total += int(cnt)
        if total < 1:
            raise ConfigError("family pool must request at least one cluster")
        if not (0.0 < self.min_weight < 1.0):
            raise ConfigError(f"min_weight must lie in (0, 1), got {self.min_weight}")
        if self.max_sweeps < 1:
            raise ConfigError(f"max_sweeps must be >= 1, got {self.max_sweeps}")
        if self.restarts < 1:
            raise ConfigError(f"restarts must be >= 1, got {self.restarts}")
        if self.epsilon_reg < 0.0:
            raise ConfigError(f"epsilon_reg must be >= 0, got {self.epsilon_reg}")
        if self.min_cluster_size is not None and self.min_cluster_size < 1:
            raise ConfigError(f"min_cluster_size must be >= 1, got {self.min_cluster_size}")


@dataclass
class ClusterFit:
    """One surviving cluster of a finished run."""

    family: FamilySpec
    gaussian: FittedGaussian
    count: int
    weight: float


@dataclass
class ClusteringResult:
    labels: np.ndarray           # (n,) int64 cluster indices into ``fitted``
    fitted: list                 # of ClusterFit, ordered by label index
    final_energy: float
    sweeps_used: int
    restart_index_of_best: int
    energy_trace: np.ndarray     # tracked energy per sweep of the best restart
    restart_energies: np.ndarray
    families: list = field(default_factory=list)   # expanded per-slot family list
    sweep_labels: np.ndarray = None  # (sweeps+1, n) label history, if recorded


def _expand_pool(pool):
    families = []
    for spec, cnt in pool:
        families.extend([spec] * int(cnt))
    return families


def _family_arrays(families, dim):
    k = len(families)
    codes = np.zeros(k, dtype=np.int64)
    fmat = np.zeros((k, dim, dim))
    fvec = np.zeros((k, dim))
    fscal = np.zeros(k)
    for c, spec in enumerate(families):
        pinned = family_dim(spec)
        if pinned is not None and pinned != dim:
            raise DimensionMismatch(
                f"family {spec!r} is {pinned}-dimensional but the data are {dim}-dimensional"
            )
        if isinstance(spec, FixedCovariance):
            codes[c] = _kernel.FIXED_COV
            decomp = eigh(spec.covariance)
            v = decomp.eigenvectors
            fmat[c] = v @ np.diag(1.0 / decomp.eigenvalues) @ v.T
            fscal[c] = float(np.sum(np.log(decomp.eigenvalues)))
        elif isinstance(spec, FixedRadius):
            codes[c] = _kernel.FIXED_RADIUS
            fvec[c, 0] = spec.radius
        elif isinstance(spec, Spherical):
            codes[c] = _kernel.SPHERICAL
        elif isinstance(spec, Diagonal):
            codes[c] = _kernel.DIAGONAL
        elif isinstance(spec, Full):
            codes[c] = _kernel.FULL
        elif isinstance(spec, FixedEigenvalues):
            codes[c] = _kernel.FIXED_EIGS
            fvec[c] = np.asarray(spec.lambdas)
        else:
            raise ConfigError(f"unknown family spec {spec!r}")
    return codes, fmat, fvec, fscal


def run(points, config: EngineConfig, record_history: bool = False) -> ClusteringResult:
    """Cluster ``points`` with the configured family pool.

    Deterministic for a given (points, config.seed): points are brought to a
    canonical lexicographic order before any seeded choice, so permuting the
    input only permutes the output labels.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.size == 0:
        raise EmptyInput("no points to cluster")
    if pts.ndim != 2:
        raise DimensionMismatch(f"expected an (n, dim) array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ConfigError("points contain non-finite values")
    n, dim = pts.shape

    families = _expand_pool(config.family_pool)
    min_sizes = np.array(
        [config.min_cluster_size if config.min_cluster_size is not None
         else _default_min_size(f, dim) for f in families],
        dtype=np.int64,
    )
    needed = int(np.sum(min_sizes))
    if n < needed:
        raise ConfigError(
            f"{n} points cannot support {len(families)} initial clusters "
            f"needing at least {needed} points in total"
        )
    if config.min_weight * n < 1.0:
        warnings.warn(
            f"min_weight * n = {config.min_weight * n:.3g} < 1: the weight "
            "threshold cannot remove any cluster",
            stacklevel=2,
        )
    if np.all(pts == pts[0]):
        culprit = next((f for f in families if f.needs_regularization), None)
        if culprit is not None:
            raise DegenerateCluster(
                "all points are identical, which the "
                f"{type(culprit).__name__} family cannot encode; use a "
                "fixed-radius or fixed-eigenvalue family instead"
            )

    codes, fmat, fvec, fscal = _family_arrays(families, dim)

    perm = np.lexsort(pts.T[::-1])
    canon = np.ascontiguousarray(pts[perm])

    base = config.seed & _U64
    best = None
    restart_energies = np.empty(config.restarts)
    for r in range(config.restarts):
        seed_r = _scramble64(base + (r + 1) * 0x9E3779B97F4A7C15)
        labels_c, e, sweeps, trace, history, status, bad = _kernel.run_restart(
            canon, len(families), codes, fmat, fvec, fscal, min_sizes,
            float(config.epsilon_reg), float(config.min_weight),
            int(config.max_sweeps), np.uint64(seed_r), record_history,
        )
        if status == _kernel.STATUS_DEGENERATE:
            raise DegenerateCluster(
                f"cluster {bad} ({type(families[bad]).__name__} family) became "
                "degenerate during optimization; raise epsilon_reg or choose a "
                "fixed-radius/fixed-eigenvalue family",
                cluster=int(bad),
            )
        restart_energies[r] = e
        if best is None or e < best[1]:
            best = (r, e, labels_c.copy(), sweeps, trace.copy(),
                    history.copy() if record_history else None)

    r_best, e_best, labels_c, sweeps, trace, history = best
    labels = np.empty(n, dtype=np.int64)
    labels[perm] = labels_c

    alive_ids = np.unique(labels_c)
    remap = {int(c): i for i, c in enumerate(alive_ids)}
    final_labels = np.array([remap[int(c)] for c in labels], dtype=np.int64)

    fitted = []
    for c in alive_ids:
        members = pts[labels == c]
        stats = stats_from_points(members)
        fitted.append(ClusterFit(
            family=families[int(c)],
            gaussian=best_fit(families[int(c)], stats, config.epsilon_reg),
            count=int(stats.count),
            weight=stats.count / n,
        ))

    sweep_labels = None
    if record_history and history is not None:
        sweep_labels = np.empty_like(history)
        sweep_labels[:, perm] = history

    return ClusteringResult(
        labels=final_labels,
        fitted=fitted,
        final_energy=float(e_best),
        sweeps_used=int(sweeps),
        restart_index_of_best=int(r_best),
        energy_trace=np.asarray(trace),
        restart_energies=restart_energies,
        families=families,
        sweep_labels=sweep_labels,
    )
