"""Partition energy, single-point moves, cluster removal and the full run.

The incremental kernel is validated against from-scratch recomputation via
stats_from_points on label snapshots, and run() against scene generators
whose ground truth is known by construction.
"""

import math

import numpy as np
import pytest

from cec import (
    ClusterStats,
    ConfigError,
    DegenerateCluster,
    DimensionMismatch,
    EmptyInput,
    EngineConfig,
    FixedEigenvalues,
    FixedRadius,
    ForbiddenMove,
    Full,
    Partition,
    Spherical,
    apply_move,
    energy,
    move_delta,
    remove_underweight,
    run,
    stats_from_points,
)
from generators import gaussian_blobs, segment_scene

LN_2PIE = math.log(2.0 * math.pi * math.e)

# four points whose population covariance is exactly the identity
CROSS = np.array([[np.sqrt(2), 0.0], [-np.sqrt(2), 0.0],
                  [0.0, np.sqrt(2)], [0.0, -np.sqrt(2)]])


def simple_partition(points, labels, families, **kw):
    return Partition.from_labels(points, labels, families, **kw)


class TestEnergy:
    def test_single_cluster_identity_covariance(self):
        p = simple_partition(CROSS, [0, 0, 0, 0], [Full()], epsilon=0.0)
        assert abs(energy(p) - LN_2PIE) < 1e-12

    def test_two_equal_clusters_add_ln2(self):
        pts = np.vstack([CROSS, CROSS + [100.0, 0.0]])
        p = simple_partition(pts, [0] * 4 + [1] * 4, [Full(), Full()], epsilon=0.0)
        assert abs(energy(p) - (math.log(2.0) + LN_2PIE)) < 1e-12

    def test_matches_manual_recomputation(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(300, 2)) * [3.0, 1.0]
        labels = rng.integers(0, 3, 300)
        fams = [Full(), Spherical(), FixedRadius(2.0)]
        p = simple_partition(pts, labels, fams)
        from cec import cross_entropy
        total = 0.0
        for c, fam in enumerate(fams):
            members = pts[labels == c]
            w = len(members) / 300.0
            total += w * (-math.log(w) + cross_entropy(fam, stats_from_points(members)))
        assert abs(energy(p) - total) < 1e-9
        assert abs(p.tracked_energy - total) < 1e-9

    def test_degenerate_cluster_names_culprit(self):
        # cluster 0 is collinear; with a zero ridge its evaluation must fail
        # and the error must carry the cluster index
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [5.0, 5.0], [6.0, 5.0], [7.0, 6.0]])
        with pytest.raises(DegenerateCluster) as info:
            simple_partition(pts, [0, 0, 0, 1, 1, 1], [Full(), Full()], epsilon=0.0)
        assert info.value.cluster == 0


class TestMoveDelta:
    @pytest.fixture()
    def partition(self):
        rng = np.random.default_rng(3)
        pts = np.vstack([rng.normal((0, 0), 1, (20, 2)),
                         rng.normal((8, 0), 1, (20, 2)),
                         rng.normal((4, 7), 1, (20, 2))])
        labels = np.repeat([0, 1, 2], 20)
        return simple_partition(pts, labels, [Full(), Full(), Full()])

    def test_move_to_own_cluster_is_zero(self, partition):
        assert move_delta(partition, 5, 0) == 0.0

    def test_incremental_matches_from_scratch(self, partition):
        # oracle: batch-recompute both partitions from labels, no rank-one math
        fams = [slot.family for slot in partition.clusters]
        e0 = energy(Partition.from_labels(partition.points, partition.labels, fams))
        for i in range(0, 60, 7):
            for t in range(3):
                if t == int(partition.labels[i]):
                    continue
                delta = move_delta(partition, i, t)
                labels_after = partition.labels.copy()
                labels_after[i] = t
                scratch = energy(Partition.from_labels(partition.points, labels_after, fams)) - e0
                assert abs(delta - scratch) < 1e-7

    def test_apply_move_keeps_tracked_energy_consistent(self, partition):
        out = apply_move(partition, 0, 1)
        assert abs(out.tracked_energy - energy(out)) < 1e-9

    def test_shrinking_below_min_size_forbidden(self):
        pts = np.vstack([CROSS * 0.5 + [0, 0], CROSS + [30, 0]])
        labels = [0, 0, 0, 1, 1, 1, 1, 1]
        p = simple_partition(pts[:8], labels, [Full(), Full()])
        # source cluster 0 has 3 points == min size (dim + 1)
        with pytest.raises(ForbiddenMove):
            move_delta(p, 0, 1)

    def test_dead_target_forbidden(self, partition):
        partition.clusters[2].alive = False
        with pytest.raises(ForbiddenMove):
            move_delta(partition, 0, 2)


class TestRemoveUnderweight:
    def test_identity_when_no_cluster_is_light(self):
        pts, labels = gaussian_blobs(1, k=2, n_per=100)
        p = simple_partition(pts, labels, [Full(), Full()])
        out = remove_underweight(p, min_weight=0.02)
        assert np.array_equal(out.labels, p.labels)
        assert out.tracked_energy == p.tracked_energy

    def test_single_point_cluster_is_removed(self):
        rng = np.random.default_rng(2)
        pts = np.vstack([rng.normal(0, 1, (999, 2)), [[50.0, 50.0]]])
        labels = np.array([0] * 999 + [1])
        p = simple_partition(pts, labels, [Full(), FixedRadius(1.0)])
        out = remove_underweight(p, min_weight=0.02)
        assert not out.clusters[1].alive
        assert np.all(out.labels == 0)
        assert abs(out.tracked_energy - energy(out)) < 1e-9

    def test_idempotent(self):
        rng = np.random.default_rng(9)
        pts = np.vstack([rng.normal(0, 1, (500, 2)), rng.normal((9, 9), 0.5, (8, 2))])
        labels = np.array([0] * 500 + [1] * 8)
        p = simple_partition(pts, labels, [Full(), Full()])
        once = remove_underweight(p, min_weight=0.05)
        twice = remove_underweight(once, min_weight=0.05)
        assert np.array_equal(once.labels, twice.labels)
        assert once.tracked_energy == twice.tracked_energy

    def test_keeps_largest_when_all_underweight(self):
        rng = np.random.default_rng(5)
        pts = np.vstack([rng.normal(0, 1, (12, 2)), rng.normal((20, 0), 1, (8, 2))])
        labels = np.array([0] * 12 + [1] * 8)
        p = simple_partition(pts, labels, [Full(), Full()])
        out = remove_underweight(p, min_weight=0.99)
        assert out.clusters[0].alive and not out.clusters[1].alive
        assert np.all(out.labels == 0)


class TestRun:
    def test_single_blob_single_cluster(self):
        rng = np.random.default_rng(0)
        pts = rng.multivariate_normal([3.0, 5.0], [[2.0, 0.6], [0.6, 1.0]], size=400)
        res = run(pts, EngineConfig(family_pool=[(Full(), 1)], seed=1, restarts=2))
        assert len(res.fitted) == 1
        sample_cov = stats_from_points(pts).covariance()
        np.testing.assert_allclose(res.fitted[0].gaussian.covariance, sample_cov, atol=1e-4)
        assert np.all(res.labels == 0)

    def test_two_distant_blobs(self):
        rng = np.random.default_rng(0)
        pts = np.vstack([rng.normal((0, 0), 1.0, (500, 2)),
                         rng.normal((20, 0), 1.0, (500, 2))])
        truth = np.array([0] * 500 + [1] * 500)
        res = run(pts, EngineConfig(family_pool=[(Full(), 5)], seed=4))
        assert len(res.fitted) == 2
        agree = max(np.mean((res.labels == 0) == (truth == 0)),
                    np.mean((res.labels == 1) == (truth == 0)))
        assert agree >= 0.99

    def test_toothpick_segments(self):
        pts, _, _ = segment_scene(0, k=5, n_per=300, half_len=10.0, jitter=0.5)
        fam = FixedEigenvalues((10.0 ** 2 / 3.0, 0.25))
        res = run(pts, EngineConfig(family_pool=[(fam, 10)], seed=0))
        assert len(res.fitted) == 5

    def test_deterministic_given_seed(self):
        pts, _ = gaussian_blobs(3, k=3)
        cfg = EngineConfig(family_pool=[(Full(), 6)], seed=42, restarts=3)
        a, b = run(pts, cfg), run(pts, cfg)
        assert np.array_equal(a.labels, b.labels)
        assert a.final_energy == b.final_energy
        assert a.restart_index_of_best == b.restart_index_of_best

    def test_permutation_equivariance(self):
        pts, _ = gaussian_blobs(4, k=3)
        cfg = EngineConfig(family_pool=[(Full(), 6)], seed=5, restarts=3)
        base = run(pts, cfg)
        perm = np.random.default_rng(8).permutation(len(pts))
        permuted = run(pts[perm], cfg)
        assert np.array_equal(permuted.labels, base.labels[perm])

    def test_tracked_energy_matches_scratch_at_boundaries(self):
        pts, _ = gaussian_blobs(6, k=3)
        res = run(pts, EngineConfig(family_pool=[(Full(), 8)], seed=2, restarts=2),
                  record_history=True)
        for j in range(res.sweep_labels.shape[0]):
            part = Partition.from_labels(pts, res.sweep_labels[j], res.families)
            assert abs(energy(part) - res.energy_trace[j]) < 1e-7

    def test_energy_trace_non_increasing(self):
        for seed in range(5):
            pts, _ = gaussian_blobs(seed + 30, k=3)
            res = run(pts, EngineConfig(family_pool=[(Full(), 8)], seed=seed, restarts=3))
            assert np.all(np.diff(res.energy_trace) <= 1e-12)

    def test_termination_respects_max_sweeps(self):
        pts, _ = gaussian_blobs(7, k=3)
        res = run(pts, EngineConfig(family_pool=[(Full(), 8)], seed=0, restarts=1, max_sweeps=2))
        assert res.sweeps_used <= 2

    def test_final_energy_is_best_restart(self):
        pts, _ = gaussian_blobs(9, k=3)
        res = run(pts, EngineConfig(family_pool=[(Full(), 6)], seed=11, restarts=5))
        assert res.final_energy == res.restart_energies.min()
        assert res.restart_index_of_best == int(np.argmin(res.restart_energies))

    def test_labels_are_compressed(self):
        pts, _ = gaussian_blobs(10, k=3)
        res = run(pts, EngineConfig(family_pool=[(Full(), 8)], seed=1, restarts=2))
        assert set(np.unique(res.labels)) == set(range(len(res.fitted)))
        assert sum(f.count for f in res.fitted) == len(pts)
        assert abs(sum(f.weight for f in res.fitted) - 1.0) < 1e-12
        # full-family clusters never shrink below dim + 1 points
        assert all(f.count >= 3 for f in res.fitted)

    def test_empty_input_rejected(self):
        with pytest.raises(EmptyInput):
            run(np.empty((0, 2)), EngineConfig(family_pool=[(Full(), 1)]))

    def test_identical_points_rejected_for_full_family(self):
        pts = np.ones((50, 2))
        with pytest.raises(DegenerateCluster):
            run(pts, EngineConfig(family_pool=[(Full(), 2)], seed=0))

    def test_identical_points_fine_for_fixed_radius(self):
        pts = np.ones((50, 2))
        res = run(pts, EngineConfig(family_pool=[(FixedRadius(1.0), 2)], seed=0, restarts=1))
        assert len(res.fitted) >= 1

    def test_not_enough_points_rejected(self):
        pts = np.random.default_rng(0).normal(size=(5, 2))
        with pytest.raises(ConfigError):
            run(pts, EngineConfig(family_pool=[(Full(), 4)], seed=0))

    def test_family_dimension_mismatch_rejected(self):
        pts = np.random.default_rng(0).normal(size=(50, 2))
        with pytest.raises(DimensionMismatch):
            run(pts, EngineConfig(family_pool=[(FixedEigenvalues((3.0, 2.0, 1.0)), 2)], seed=0))

    def test_tiny_min_weight_warns(self):
        pts = np.random.default_rng(0).normal(size=(30, 2))
        with pytest.warns(UserWarning):
            run(pts, EngineConfig(family_pool=[(Full(), 2)], seed=0, restarts=1,
                                  min_weight=0.01))

    def test_three_dimensional_blobs(self):
        rng = np.random.default_rng(0)
        pts = np.vstack([rng.normal((0, 0, 0), 1.0, (300, 3)),
                         rng.normal((15, 0, 5), 1.0, (300, 3))])
        res = run(pts, EngineConfig(family_pool=[(Full(), 2)], seed=3, restarts=5))
        assert len(res.fitted) == 2
        truth = np.array([0] * 300 + [1] * 300)
        agree = max(np.mean((res.labels == 0) == (truth == 0)),
                    np.mean((res.labels == 1) == (truth == 0)))
        assert agree >= 0.99

    def test_three_dimensional_needles(self):
        from generators import needle_scene_3d
        pts, _ = needle_scene_3d(0, k=3)
        fam = FixedEigenvalues((100.0 / 3.0, 0.25, 0.25))
        res = run(pts, EngineConfig(family_pool=[(fam, 7)], seed=1, restarts=5))
        assert len(res.fitted) == 3


class TestEngineConfig:
    def test_empty_pool_rejected(self):
        with pytest.raises(ConfigError):
            EngineConfig(family_pool=[])

    def test_zero_total_clusters_rejected(self):
        with pytest.raises(ConfigError):
            EngineConfig(family_pool=[(Full(), 0)])

    def test_bad_min_weight_rejected(self):
        with pytest.raises(ConfigError):
            EngineConfig(family_pool=[(Full(), 1)], min_weight=1.5)

    def test_bad_restarts_rejected(self):
        with pytest.raises(ConfigError):
            EngineConfig(family_pool=[(Full(), 1)], restarts=0)
