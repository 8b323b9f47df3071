import math

import numpy as np
import pytest

from afforda.core import DirectionVector, DiscreteDirection, Trajectory3D
from afforda.errors import (
    AmbiguousSpectrumWarning,
    CancelledOutError,
    DegenerateTrajectoryError,
    EmptyAfterCleaningError,
    InvalidDirectionLabelError,
    NoUsableTrajectoriesError,
    ZeroVectorError,
)
from afforda.motion import (
    CAMERA_FORWARD_DOWN_LEFT_BASIS,
    DbscanConfig,
    DirectionCodebook,
    DEFAULT_CODEBOOK,
    aggregate_direction,
    clean_trajectory,
    dbscan,
    direction_label,
    discretize_direction,
    extract_motion_direction,
    parse_direction_label,
    principal_direction,
)
from oracles import check_dbscan_labels, discretize_reference


class TestDbscan:
    def test_one_cluster_one_noise(self):
        labels = dbscan([0.0, 0.1, 0.2, 10.0], DbscanConfig(eps=0.5, min_pts=2))
        assert labels[0] == labels[1] == labels[2] != -1
        assert labels[3] == -1

    def test_identical_points_single_cluster(self):
        labels = dbscan([(1.0, 1.0)] * 5, DbscanConfig(eps=0.5, min_pts=2))
        assert (labels == labels[0]).all() and labels[0] != -1

    def test_tiny_eps_all_noise(self):
        labels = dbscan([0.0, 1.0, 2.0], DbscanConfig(eps=0.3, min_pts=2))
        assert (labels == -1).all()

    def test_matches_reference_on_random_instances(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            n = int(rng.integers(2, 30))
            d = int(rng.integers(1, 4))
            pts = rng.uniform(0, 4, size=(n, d))
            eps = float(rng.uniform(0.2, 1.5))
            min_pts = int(rng.integers(1, 5))
            labels = dbscan(pts, DbscanConfig(eps=eps, min_pts=min_pts))
            check_dbscan_labels(pts.tolist(), eps, min_pts, labels.tolist())

    def test_label_order_is_scan_order(self):
        # two clusters: the one containing point 0 must get label 0
        pts = [(0.0,), (10.0,), (0.1,), (10.1,)]
        labels = dbscan(pts, DbscanConfig(eps=0.5, min_pts=2))
        assert labels[0] == 0 and labels[1] == 1

    def test_permutation_invariant_up_to_relabeling(self):
        # noise sets and core-point partitions are permutation-invariant;
        # only contested border points may legally switch clusters
        rng = np.random.default_rng(23)
        for _ in range(10):
            n = int(rng.integers(5, 30))
            pts = rng.uniform(0, 3, size=(n, 2))
            cfg = DbscanConfig(eps=0.6, min_pts=3)
            base = dbscan(pts, cfg)
            perm = rng.permutation(n)
            shuffled = dbscan(pts[perm], cfg)
            check_dbscan_labels(pts[perm].tolist(), cfg.eps, cfg.min_pts,
                                shuffled.tolist())
            assert np.array_equal(base[perm] == -1, shuffled == -1)
            d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
            core = (d2 <= cfg.eps ** 2).sum(1) >= cfg.min_pts

            def core_partition(labels, index_map, core=core):
                groups = {}
                for i, label in enumerate(labels):
                    original = index_map[i]
                    if label != -1 and core[original]:
                        groups.setdefault(label, set()).add(original)
                return {frozenset(g) for g in groups.values()}

            assert (core_partition(base, range(n))
                    == core_partition(shuffled, perm))


class TestCleanTrajectory:
    def test_truncates_to_ten(self):
        points = [(float(t), 2.0 * t, 0.0) for t in range(15)]
        cleaned = clean_trajectory(Trajectory3D(0, points),
                                   DbscanConfig(eps=10.0, min_pts=2))
        assert len(cleaned) == 10
        assert np.allclose(cleaned.points, points[:10])

    def test_removes_outlier_preserves_order(self):
        points = [(0.0, 0.0, 0.0), (0.1, 0.0, 0.0), (0.2, 0.0, 0.0),
                  (50.0, 50.0, 50.0), (0.3, 0.0, 0.0), (0.4, 0.0, 0.0),
                  (0.5, 0.0, 0.0), (0.6, 0.0, 0.0), (0.7, 0.0, 0.0)]
        cleaned = clean_trajectory(Trajectory3D(1, points),
                                   DbscanConfig(eps=0.15, min_pts=2))
        assert len(cleaned) == 8
        assert np.allclose(cleaned.points[:, 0],
                           [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7])

    def test_single_point_with_min_pts_one(self):
        cleaned = clean_trajectory(Trajectory3D(2, [(1.0, 2.0, 3.0)]),
                                   DbscanConfig(eps=1.0, min_pts=1))
        assert len(cleaned) == 1

    def test_empty_after_cleaning(self):
        with pytest.raises(EmptyAfterCleaningError):
            clean_trajectory(Trajectory3D(3, [(0.0, 0.0, 0.0), (9.0, 9.0, 9.0)]),
                             DbscanConfig(eps=0.1, min_pts=2))


class TestPrincipalDirection:
    def test_exact_line(self):
        points = [(float(t), 2.0 * t, 0.0) for t in range(10)]
        v = principal_direction(Trajectory3D(0, points))
        assert np.allclose([v.x, v.y, v.z], [0.4472, 0.8944, 0.0], atol=1e-4)

    def test_reversed_line_flips_sign(self):
        points = [(float(t), 2.0 * t, 0.0) for t in reversed(range(10))]
        v = principal_direction(Trajectory3D(0, points))
        assert np.allclose([v.x, v.y, v.z], [-0.4472, -0.8944, 0.0], atol=1e-4)

    def test_noisy_lines(self):
        rng = np.random.default_rng(99)
        for _ in range(100):
            u = rng.standard_normal(3)
            u /= np.linalg.norm(u)
            extent = rng.uniform(1.0, 20.0)
            t = np.linspace(0.0, extent, 12)
            pts = t[:, None] * u + rng.normal(0.0, 0.01 * extent, size=(12, 3))
            v = principal_direction(Trajectory3D(0, pts))
            assert float(np.dot([v.x, v.y, v.z], u)) >= 0.999

    def test_degenerate(self):
        with pytest.raises(DegenerateTrajectoryError):
            principal_direction(Trajectory3D(0, [(1.0, 1.0, 1.0)] * 4))

    def test_ambiguous_spectrum_warns(self):
        # a perfect square in the xy plane has two equal top eigenvalues
        points = [(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (1.0, 1.0, 0.0),
                  (0.0, 1.0, 0.0)]
        with pytest.warns(AmbiguousSpectrumWarning):
            principal_direction(Trajectory3D(0, points))

    def test_rotation_equivariance(self):
        rng = np.random.default_rng(4)
        pts = np.cumsum(rng.standard_normal((8, 3)), axis=0)
        theta = 0.7
        rot = np.array([[np.cos(theta), -np.sin(theta), 0.0],
                        [np.sin(theta), np.cos(theta), 0.0],
                        [0.0, 0.0, 1.0]])
        v = principal_direction(Trajectory3D(0, pts)).as_array()
        vr = principal_direction(Trajectory3D(0, pts @ rot.T)).as_array()
        assert np.abs(rot @ v - vr).max() <= 1e-9

    def test_scale_invariance(self):
        rng = np.random.default_rng(8)
        pts = np.cumsum(rng.standard_normal((8, 3)), axis=0)
        v = principal_direction(Trajectory3D(0, pts)).as_array()
        vs = principal_direction(Trajectory3D(0, 7.3 * pts)).as_array()
        assert np.abs(v - vs).max() <= 1e-9


class TestAggregate:
    def test_single(self):
        v = aggregate_direction([DirectionVector(1, 0, 0)])
        assert np.allclose([v.x, v.y, v.z], [1, 0, 0])

    def test_two_orthogonal(self):
        v = aggregate_direction([DirectionVector(1, 0, 0),
                                 DirectionVector(0, 1, 0)])
        assert np.allclose([v.x, v.y, v.z], [0.7071, 0.7071, 0.0], atol=1e-4)

    def test_cancellation(self):
        with pytest.raises(CancelledOutError):
            aggregate_direction([DirectionVector(1, 0, 0),
                                 DirectionVector(-1, 0, 0)])


class TestDiscretize:
    def test_codebook_self_map(self):
        v = DirectionVector(1 / math.sqrt(3), 1 / math.sqrt(3), 1 / math.sqrt(3))
        assert discretize_direction(v).as_tuple() == (1, 1, 1)

    def test_axis_beats_diagonal(self):
        assert discretize_direction(DirectionVector(1, 0, 0)).as_tuple() == (1, 0, 0)

    def test_off_axis(self):
        assert discretize_direction(
            DirectionVector(0.8, 0.55, 0.0)).as_tuple() == (1, 1, 0)

    def test_zero_vector(self):
        with pytest.raises(ZeroVectorError):
            discretize_direction(DirectionVector(0, 0, 0))

    def test_every_bin_maps_to_itself(self):
        for d, unit in DEFAULT_CODEBOOK.entries:
            got = discretize_direction(DirectionVector.from_array(unit))
            assert got == d

    def test_matches_brute_force_on_random_vectors(self):
        rng = np.random.default_rng(12)
        for _ in range(500):
            v = rng.standard_normal(3)
            v /= np.linalg.norm(v)
            got = discretize_direction(DirectionVector.from_array(v))
            assert got.as_tuple() == discretize_reference(*v)

    def test_configurable_basis(self):
        cb = DirectionCodebook(CAMERA_FORWARD_DOWN_LEFT_BASIS)
        # camera +z (forward) must land in the pure-axis0 bin under this basis
        got = discretize_direction(DirectionVector(0, 0, 1), cb)
        assert got.as_tuple() == (1, 0, 0)


class TestExtract:
    def test_five_noisy_copies_of_a_line(self):
        rng = np.random.default_rng(31)
        u = np.array([0.2, -0.5, 0.84])
        u /= np.linalg.norm(u)
        trajs = []
        for k in range(5):
            t = np.linspace(0, 5, 40)
            pts = t[:, None] * u + rng.normal(0, 0.005, size=(40, 3)) + k
            trajs.append(Trajectory3D(k, pts))
        estimate = extract_motion_direction(trajs)
        assert estimate.discrete.as_tuple() == discretize_reference(*u)
        assert estimate.dropped == 0

    def test_single_repeated_point(self):
        with pytest.raises(NoUsableTrajectoriesError):
            extract_motion_direction([Trajectory3D(0, [(1.0, 1.0, 1.0)] * 3)],
                                     DbscanConfig(eps=1.0, min_pts=1))

    def test_degenerate_minority_dropped(self):
        rng = np.random.default_rng(32)
        u = np.array([1.0, 0.0, 0.0])
        trajs = []
        for k in range(4):
            t = np.linspace(0, 3, 30)
            pts = t[:, None] * u + rng.normal(0, 0.005, size=(30, 3))
            trajs.append(Trajectory3D(k, pts))
        trajs.append(Trajectory3D(9, [(0.5, 0.5, 0.5)] * 30))
        estimate = extract_motion_direction(trajs)
        assert estimate.dropped == 1
        assert estimate.used == 4
        assert estimate.discrete.as_tuple() == (1, 0, 0)


class TestLabels:
    def test_paper_style_example(self):
        assert direction_label(DiscreteDirection(-1, -1, 1)) == \
            "[backward, upward, leftward]"

    def test_single_axis(self):
        assert direction_label(DiscreteDirection(1, 0, 0)) == "[forward]"

    def test_two_axes(self):
        assert direction_label(DiscreteDirection(0, 1, -1)) == \
            "[downward, rightward]"

    def test_round_trip_all_26(self):
        for d in DiscreteDirection.enumerate():
            assert parse_direction_label(direction_label(d)) == d

    def test_invalid_word(self):
        with pytest.raises(InvalidDirectionLabelError):
            parse_direction_label("[sideways]")

    def test_wrong_axis_order(self):
        with pytest.raises(InvalidDirectionLabelError):
            parse_direction_label("[leftward, forward]")

    def test_not_bracketed(self):
        with pytest.raises(InvalidDirectionLabelError):
            parse_direction_label("forward")
