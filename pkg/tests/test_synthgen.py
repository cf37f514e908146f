import math

import numpy as np
import pytest

from groovekit import (
    NormalParams,
    WorkpieceSpec,
    estimate_normals,
    generate_workpiece,
    reference_from_dict,
)
from groovekit.synthgen import ArcCurve, LineCurve


class TestSpecValidation:
    def test_plain_plate_grid_count_and_empty_truth(self):
        spec = WorkpieceSpec(shape="straight-line", length=0.2, width=0.15, pitch=0.001,
                             with_groove=False, noise_sigma=0.0)
        sample = generate_workpiece(spec)
        assert len(sample.cloud) == 200 * 150
        assert sample.truth.size == 0
        assert sample.reference is None

    def test_groove_deeper_than_thickness_rejected(self):
        with pytest.raises(ValueError, match="thickness"):
            WorkpieceSpec(shape="straight-line", groove_depth=0.05, plate_thickness=0.02)
        with pytest.raises(ValueError, match="thickness"):
            WorkpieceSpec(shape="cylinder", groove_depth=0.06, cylinder_radius=0.05)

    def test_bad_angle_and_pitch_rejected(self):
        with pytest.raises(ValueError):
            WorkpieceSpec(groove_angle=0.0)
        with pytest.raises(ValueError):
            WorkpieceSpec(groove_angle=math.pi)
        with pytest.raises(ValueError):
            WorkpieceSpec(pitch=0.0)

    def test_unknown_shape_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            WorkpieceSpec(shape="sphere")


class TestStraight:
    def test_wall_normals_match_dihedral_geometry(self):
        spec = WorkpieceSpec(shape="straight-line", groove_angle=math.pi / 2,
                             groove_depth=0.005, groove_bottom=0.0, noise_sigma=0.0)
        sample = generate_workpiece(spec)
        s = sample.cloud.points[:, 1] - spec.width / 2
        z = sample.cloud.points[:, 2]
        wall = z < -1e-9
        expected_tilt = math.pi / 4  # 90-degree opening: walls at 45 degrees
        nz = sample.true_normals[wall, 2]
        assert np.allclose(nz, math.cos(expected_tilt), atol=1e-12)
        # lateral component points back toward the seam centerline
        assert np.all(np.sign(sample.true_normals[wall, 1]) == -np.sign(s[wall]))

    def test_truth_is_exactly_the_constructed_groove_faces(self):
        spec = WorkpieceSpec(shape="straight-line", noise_sigma=0.0)
        sample = generate_workpiece(spec)
        below = np.flatnonzero(sample.cloud.points[:, 2] < 0)
        assert np.array_equal(sample.truth, below)

    def test_truth_survives_noise_unchanged(self):
        clean = generate_workpiece(WorkpieceSpec(noise_sigma=0.0))
        noisy = generate_workpiece(WorkpieceSpec(noise_sigma=0.0005, seed=3))
        assert np.array_equal(clean.truth, noisy.truth)

    def test_seeded_generation_is_bitwise_deterministic(self):
        a = generate_workpiece(WorkpieceSpec(noise_sigma=0.0004, seed=11))
        b = generate_workpiece(WorkpieceSpec(noise_sigma=0.0004, seed=11))
        assert np.array_equal(a.cloud.points, b.cloud.points)
        c = generate_workpiece(WorkpieceSpec(noise_sigma=0.0004, seed=12))
        assert not np.array_equal(a.cloud.points, c.cloud.points)

    def test_reference_is_bottom_line(self):
        spec = WorkpieceSpec(shape="straight-line", noise_sigma=0.0)
        sample = generate_workpiece(spec)
        assert isinstance(sample.reference, LineCurve)
        assert sample.reference.start[2] == pytest.approx(-spec.groove_depth)
        bottom = np.abs(sample.cloud.points[:, 1] - spec.width / 2) <= spec.groove_bottom / 2
        d = sample.reference.distances(sample.cloud.points[bottom])
        assert d.max() <= spec.groove_bottom / 2 + 1e-12

    def test_estimated_normals_match_analytic_within_two_degrees(self):
        # walls wide enough to have an interior beyond the estimation radius
        radius = 0.004
        spec = WorkpieceSpec(shape="straight-line", length=0.06, width=0.08,
                             groove_depth=0.009, groove_bottom=0.010,
                             plate_thickness=0.02, noise_sigma=0.0)
        sample = generate_workpiece(spec)
        est = estimate_normals(sample.cloud, NormalParams(radius))
        s = np.abs(sample.cloud.points[:, 1] - spec.width / 2)
        creases = np.array([spec.groove_bottom / 2, spec.half_top()])
        away_from_creases = np.min(np.abs(s[:, None] - creases[None, :]), axis=1) > radius
        border = (
            (sample.cloud.points[:, 0] > 0.005)
            & (sample.cloud.points[:, 0] < 0.055)
            & (sample.cloud.points[:, 1] > 0.005)
            & (sample.cloud.points[:, 1] < 0.075)
        )
        sel = away_from_creases & border
        assert sel.sum() > 1000
        cosang = np.abs(np.einsum("ij,ij->i", est.normals[sel], sample.true_normals[sel]))
        assert np.degrees(np.arccos(np.clip(cosang, -1, 1))).max() <= 2.0


class TestCurve:
    def test_truth_follows_the_arc(self):
        spec = WorkpieceSpec(shape="curve-line", noise_sigma=0.0)
        sample = generate_workpiece(spec)
        assert isinstance(sample.reference, ArcCurve)
        pts = sample.cloud.points[sample.truth]
        planar = pts.copy()
        planar[:, 2] = -spec.groove_depth
        d = sample.reference.distances(planar)
        assert d.max() <= spec.half_top() + 1e-9

    def test_arc_length_spans_the_plate(self):
        spec = WorkpieceSpec(shape="curve-line", noise_sigma=0.0)
        sample = generate_workpiece(spec)
        chord = spec.length
        assert sample.reference.length() >= chord
        assert sample.reference.length() <= chord * math.pi / 2

    def test_curve_radius_must_exceed_half_chord(self):
        with pytest.raises(ValueError, match="radius"):
            generate_workpiece(WorkpieceSpec(shape="curve-line", curve_radius=0.05))


class TestBox:
    def test_two_faces_meet_at_right_angle(self):
        spec = WorkpieceSpec(shape="box", noise_sigma=0.0)
        sample = generate_workpiece(spec)
        pts = sample.cloud.points
        face = np.ones(len(sample.cloud), dtype=bool)
        face[sample.truth] = False
        on_top = np.isclose(pts[face, 2], spec.box_height, atol=1e-12)
        on_front = np.isclose(pts[face, 1], 0.0, atol=1e-12)
        assert np.all(on_top | on_front)
        assert on_top.any() and on_front.any()
        assert np.allclose(sample.true_normals[face][on_top], [0, 0, 1], atol=1e-12)
        assert np.allclose(sample.true_normals[face][on_front], [0, -1, 0], atol=1e-12)

    def test_groove_sits_on_the_corner_bisector(self):
        spec = WorkpieceSpec(shape="box", noise_sigma=0.0)
        sample = generate_workpiece(spec)
        groove_pts = sample.cloud.points[sample.truth]
        # groove region is displaced inward from both faces
        assert np.all(groove_pts[:, 2] < spec.box_height + 1e-12)
        assert np.all(groove_pts[:, 1] > -1e-12)
        # the flat bottom faces along the outward bisector
        bisector = np.array([0.0, -1.0, 1.0]) / np.sqrt(2)
        bottom = np.einsum("ij,j->i", sample.true_normals[sample.truth], bisector) > 1 - 1e-9
        assert bottom.any()
        d = spec.groove_depth
        expect = np.array([d / np.sqrt(2), spec.box_height - d / np.sqrt(2)])
        got = sample.cloud.points[sample.truth][bottom][:, 1:]
        assert np.abs(got - expect).max() <= spec.groove_bottom / 2 + 1e-9

    def test_reference_line_is_the_bottom_center(self):
        spec = WorkpieceSpec(shape="box", noise_sigma=0.0)
        sample = generate_workpiece(spec)
        d = spec.groove_depth
        assert np.allclose(
            sample.reference.start,
            [0.0, d / np.sqrt(2), spec.box_height - d / np.sqrt(2)],
        )

    def test_shallow_bottom_heavy_groove_rejected(self):
        with pytest.raises(ValueError, match="bottom"):
            generate_workpiece(
                WorkpieceSpec(shape="box", groove_depth=0.002, groove_bottom=0.005,
                              noise_sigma=0.0)
            )


class TestCylinder:
    def test_points_lie_on_grooved_radius(self):
        spec = WorkpieceSpec(shape="cylinder", noise_sigma=0.0)
        sample = generate_workpiece(spec)
        y = sample.cloud.points[:, 1]
        z = sample.cloud.points[:, 2]
        rho = np.hypot(y, z)
        assert rho.max() <= spec.cylinder_radius + 1e-12
        assert rho.min() >= spec.cylinder_radius - spec.groove_depth - 1e-12
        groove = np.abs(sample.cloud.points[:, 0] - spec.length / 2) < spec.half_top()
        assert np.all(rho[~groove] == pytest.approx(spec.cylinder_radius, abs=1e-12))

    def test_arc_extent_matches_spec(self):
        spec = WorkpieceSpec(shape="cylinder", noise_sigma=0.0)
        sample = generate_workpiece(spec)
        phi = np.arctan2(sample.cloud.points[:, 1], sample.cloud.points[:, 2])
        assert math.degrees(phi.max() - phi.min()) <= spec.cylinder_arc_deg
        assert math.degrees(phi.max() - phi.min()) >= spec.cylinder_arc_deg - 5

    def test_reference_is_circumferential_arc_at_bottom_radius(self):
        spec = WorkpieceSpec(shape="cylinder", noise_sigma=0.0)
        sample = generate_workpiece(spec)
        assert isinstance(sample.reference, ArcCurve)
        assert sample.reference.radius == pytest.approx(spec.cylinder_radius - spec.groove_depth)
        assert sample.reference.length() == pytest.approx(
            sample.reference.radius * (sample.reference.phi_max - sample.reference.phi_min)
        )

    def test_normals_tilt_only_inside_groove(self):
        spec = WorkpieceSpec(shape="cylinder", noise_sigma=0.0)
        sample = generate_workpiece(spec)
        outside = np.abs(sample.cloud.points[:, 0] - spec.length / 2) > spec.half_top()
        radial = sample.cloud.points[outside].copy()
        radial[:, 0] = 0.0
        radial /= np.linalg.norm(radial, axis=1, keepdims=True)
        assert np.allclose(sample.true_normals[outside], radial, atol=1e-12)


class TestReferenceCurves:
    def test_line_distances_and_length(self):
        line = LineCurve(np.array([0.0, 0, 0]), np.array([2.0, 0, 0]))
        assert line.length() == 2.0
        d = line.distances(np.array([[1.0, 0.5, 0.0], [3.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))
        assert np.allclose(d, [0.5, 1.0, 0.0])

    def test_arc_distances_and_length(self):
        arc = ArcCurve(np.zeros(3), 1.0, np.array([1.0, 0, 0]), np.array([0, 1.0, 0]),
                       -math.pi / 2, math.pi / 2)
        assert arc.length() == pytest.approx(math.pi)
        d = arc.distances(np.array([[2.0, 0, 0], [0.0, 1.5, 0], [0, 0, 0.5]]))
        assert np.allclose(d, [1.0, 0.5, math.sqrt(1.25)])
        behind = arc.distances(np.array([[-1.0, 0.0, 0.0]]))  # outside angular range
        assert behind[0] == pytest.approx(math.sqrt(2.0))

    def test_round_trip_through_dict(self):
        arc = ArcCurve(np.array([1.0, 2, 3]), 0.5, np.array([0, 0, 1.0]),
                       np.array([0, 1.0, 0]), -1.0, 1.2)
        back = reference_from_dict(arc.to_dict())
        assert isinstance(back, ArcCurve)
        assert back.radius == arc.radius
        assert np.array_equal(back.center, arc.center)
        line = LineCurve(np.zeros(3), np.ones(3))
        back = reference_from_dict(line.to_dict())
        assert np.array_equal(back.end, line.end)
        with pytest.raises(ValueError, match="kind"):
            reference_from_dict({"kind": "spline"})
