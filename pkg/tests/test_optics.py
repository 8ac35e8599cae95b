import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ledvlc.errors import DistortionError, FocusError, GeometryError
from ledvlc.optics import (
    CameraModel,
    DistortionParams,
    IsiDegree,
    LinkGeometry,
    blur_diameter,
    chief_ray_limits,
    distort_point,
    distort_points,
    infer_distance,
    isi_degree,
    pixel_scale,
    undistort_point,
    visibility_level,
    visible_area_ratio,
)

from _common import K_REF


class TestPixelScale:
    def test_reference_distance(self, camera, geometry):
        # 30 mm / 10 um = 3000 px focal length; 3000 * 0.03 / 6 = 15 px.
        assert pixel_scale(camera, geometry) == pytest.approx(15.0)

    def test_half_distance_doubles_scale(self, camera, geometry):
        from dataclasses import replace

        near = replace(geometry, comm_m=3.0)
        assert pixel_scale(camera, near) == pytest.approx(30.0)

    def test_zero_pitch_rejected(self):
        with pytest.raises(GeometryError):
            LinkGeometry(n_leds=16, pitch_m=0.0, focus_m=1.0, comm_m=6.0)

    def test_missing_distance_rejected(self, camera, geometry):
        from dataclasses import replace

        with pytest.raises(GeometryError):
            pixel_scale(camera, replace(geometry, comm_m=None))


class TestDistortion:
    def test_principal_point_fixed(self, camera):
        from dataclasses import replace

        cam = replace(camera, distortion=K_REF)
        assert distort_point((cam.cx, cam.cy), cam) == (cam.cx, cam.cy)

    def test_identity_for_zero_coefficients(self, camera):
        xs = np.linspace(0, camera.image_w - 1, 9)
        ys = np.linspace(0, camera.image_h - 1, 9)
        for a in xs:
            for b in ys:
                assert distort_point((a, b), camera) == (a, b)

    def test_displacement_matches_scalar_polynomial(self, camera):
        # Independent scalar evaluation: point on the x axis at normalized
        # radius 0.2 from the principal point.
        from dataclasses import replace

        cam = replace(camera, distortion=K_REF)
        r = 0.2
        a = cam.cx + r * cam.focal_px
        factor = 1.0 + K_REF.k1 * r**2 + K_REF.k2 * r**4 + K_REF.k3 * r**6
        expected_a = cam.cx + (a - cam.cx) * factor
        got = distort_point((a, cam.cy), cam)
        assert got[0] == pytest.approx(expected_a, abs=1e-9)
        assert got[1] == pytest.approx(cam.cy, abs=1e-12)

    def test_barrel_contracts_radius(self, camera):
        from dataclasses import replace

        cam = replace(camera, distortion=DistortionParams(k1=-0.5))
        for r in (0.05, 0.1, 0.2, 0.3):
            a = cam.cx + r * cam.focal_px
            a2, _ = distort_point((a, cam.cy), cam)
            assert abs(a2 - cam.cx) < abs(a - cam.cx)

    def test_vector_matches_scalar(self, camera):
        from dataclasses import replace

        cam = replace(camera, distortion=K_REF)
        pts = np.array([[100.0, 200.0], [640.0, 512.0], [900.0, 333.0]])
        out = distort_points(pts, cam)
        for p, q in zip(pts, out):
            assert distort_point(p, cam) == pytest.approx(tuple(q))


class TestUndistort:
    def test_identity_for_zero_coefficients(self, camera):
        for p in [(0.0, 0.0), (123.4, 567.8), (1279.0, 1023.0)]:
            assert undistort_point(p, camera) == pytest.approx(p)

    def test_round_trip_grid(self, camera):
        # 20x20 grid spanning normalized radius <= 0.3 around the principal
        # point; forward map then 3 refinement iterations must return within
        # 0.1 px.
        from dataclasses import replace

        cam = replace(camera, distortion=K_REF)
        span = 0.3 * cam.focal_px / math.sqrt(2.0)
        xs = np.linspace(cam.cx - span, cam.cx + span, 20)
        ys = np.linspace(cam.cy - span, cam.cy + span, 20)
        worst = 0.0
        for a in xs:
            for b in ys:
                a2, b2 = distort_point((a, b), cam)
                a3, b3 = undistort_point((a2, b2), cam, refine_iters=3)
                worst = max(worst, math.hypot(a3 - a, b3 - b))
        assert worst <= 0.1

    def test_first_order_residual_grows_with_radius(self, camera):
        from dataclasses import replace

        cam = replace(camera, distortion=K_REF)

        def residual(r):
            a = cam.cx + r * cam.focal_px
            p2 = distort_point((a, cam.cy), cam)
            a3, b3 = undistort_point(p2, cam, refine_iters=0)
            return math.hypot(a3 - a, b3 - cam.cy)

        assert residual(0.3) > residual(0.1)

    def test_degenerate_factor_raises(self, camera):
        from dataclasses import replace

        cam = replace(camera, distortion=DistortionParams(k1=-4.0))
        # distorted radius 0.6 -> factor 1 - 4*0.36 < 0
        p = (cam.cx + 0.6 * cam.focal_px, cam.cy)
        with pytest.raises(DistortionError):
            undistort_point(p, cam, refine_iters=0)

    def test_negative_refine_iters_rejected(self, camera):
        with pytest.raises(GeometryError):
            undistort_point((1.0, 1.0), camera, refine_iters=-1)


class TestBlurDiameter:
    def test_in_focus_zero(self, camera):
        c_calc, c_exp = blur_diameter(camera, focus_m=6.0, comm_m=6.0)
        assert c_calc == 0.0
        assert c_exp == 0

    def test_matches_scalar_oracle(self, camera):
        # Independent arithmetic in micrometres.
        f = 30.0 * 1000.0
        d = f / 1.8
        s = 1.0e6
        sp = 6.0e6
        oracle = d * f * abs(s - sp) / (sp * (s - f))
        c_calc, c_exp = blur_diameter(camera, 1.0, 6.0)
        assert c_calc == pytest.approx(oracle, rel=1e-12)
        assert c_exp == round(1.3 * oracle / 10.0)

    def test_sign_symmetric_in_defocus(self, camera):
        # |s - s'| makes near- and far-defocus symmetric once the other
        # denominator terms match.
        a, _ = blur_diameter(camera, 2.0, 4.0)
        f_um = 30e3
        d_um = f_um / 1.8
        expected = d_um * f_um * 2e6 / (4e6 * (2e6 - f_um))
        assert a == pytest.approx(expected, rel=1e-12)

    def test_focus_at_or_below_focal_length_rejected(self, camera):
        with pytest.raises(FocusError):
            blur_diameter(camera, 0.03, 6.0)

    def test_nonpositive_distance_rejected(self, camera):
        with pytest.raises(GeometryError):
            blur_diameter(camera, 1.0, 0.0)


class TestChiefRay:
    @pytest.mark.parametrize(
        "f_number,theta_deg,r_px",
        [(1.8, 5.3, 278.0), (4.0, 2.4, 126.0), (8.0, 1.19, 62.0)],
    )
    def test_reference_table(self, camera, f_number, theta_deg, r_px):
        from dataclasses import replace

        cam = replace(camera, f_number=f_number)
        limits = chief_ray_limits(cam)
        assert limits.theta_max_deg == pytest.approx(theta_deg, abs=0.05)
        assert limits.r_max_px == pytest.approx(r_px, abs=1.0)

    def test_r_max_consistent_with_theta(self, camera):
        limits = chief_ray_limits(camera)
        assert limits.r_max_mm == pytest.approx(
            camera.f_mm * math.tan(math.radians(limits.theta_max_deg))
        )


class TestVisibleArea:
    def test_no_clipping(self):
        assert visible_area_ratio(100.0, 278.0, 54.0) == 1.0
        assert visible_area_ratio(278.0, 278.0, 54.0) == 1.0

    def test_half_disk_at_zero_plus(self):
        assert visible_area_ratio(278.0 + 1e-9, 278.0, 54.0) == pytest.approx(0.5, abs=1e-6)

    def test_fully_clipped(self):
        assert visible_area_ratio(278.0 + 27.0, 278.0, 54.0) == 0.0
        assert visible_area_ratio(400.0, 278.0, 54.0) == 0.0

    @given(st.floats(0.0, 400.0), st.floats(1.0, 100.0))
    def test_range_and_monotonicity(self, r_max, c):
        rs = np.linspace(0.0, r_max + c, 40)
        values = [visible_area_ratio(r, r_max, c) for r in rs]
        assert all(0.0 <= v <= 1.0 for v in values)
        for lo, hi in zip(values, values[1:]):
            assert hi <= lo + 1e-12

    def test_nonpositive_diameter_rejected(self):
        with pytest.raises(GeometryError):
            visible_area_ratio(10.0, 5.0, 0.0)

    def test_visibility_levels(self):
        assert visibility_level(100.0) == 0
        assert visibility_level(280.0) == 1
        assert visibility_level(300.0) == 2
        assert visibility_level(400.0) == 3


class TestIsiDegree:
    @pytest.mark.parametrize(
        "delta_a,c,expected",
        [
            (33.0, 42.0, IsiDegree.DEGREE1),
            (22.0, 52.0, IsiDegree.DEGREE2),
            (15.0, 62.0, IsiDegree.DEGREE3),
        ],
    )
    def test_reference_rows(self, delta_a, c, expected):
        assert isi_degree(delta_a, c) == expected

    def test_boundaries_go_to_higher_degree(self):
        # g = 0 -> degree 2; g = -delta_a -> degree 3; g = -2*delta_a -> beyond
        assert isi_degree(20.0, 40.0) == IsiDegree.DEGREE2
        assert isi_degree(20.0, 80.0) == IsiDegree.DEGREE3
        assert isi_degree(20.0, 120.0) == IsiDegree.BEYOND

    @given(st.floats(0.1, 200.0), st.floats(0.0, 1000.0))
    def test_partition(self, delta_a, c):
        degree = isi_degree(delta_a, c)
        g = delta_a - c / 2.0
        if g > 0:
            assert degree == IsiDegree.DEGREE1
        elif g > -delta_a:
            assert degree == IsiDegree.DEGREE2
        elif g > -2 * delta_a:
            assert degree == IsiDegree.DEGREE3
        else:
            assert degree == IsiDegree.BEYOND

    def test_invalid_inputs(self):
        with pytest.raises(GeometryError):
            isi_degree(0.0, 10.0)
        with pytest.raises(GeometryError):
            isi_degree(10.0, -1.0)


class TestInferDistance:
    def test_identity_ratio(self, geometry):
        assert infer_distance(25.0, geometry) == pytest.approx(6.0)

    def test_half_spacing_doubles_distance(self, geometry):
        assert infer_distance(12.5, geometry) == pytest.approx(12.0)

    def test_double_spacing_halves_distance(self, geometry):
        assert infer_distance(50.0, geometry) == pytest.approx(3.0)

    def test_nonpositive_spacing_rejected(self, geometry):
        with pytest.raises(GeometryError):
            infer_distance(0.0, geometry)


class TestModelValidation:
    def test_camera_invariants(self):
        with pytest.raises(GeometryError):
            CameraModel(f_mm=-1, f_number=1.8, pixel_pitch_um=10, lens_length_mm=90,
                        image_w=100, image_h=100)
        with pytest.raises(GeometryError):
            CameraModel(f_mm=30, f_number=1.8, pixel_pitch_um=10, lens_length_mm=90,
                        image_w=100, image_h=100, cx=150.0)

    def test_principal_point_defaults_to_centre(self):
        cam = CameraModel(f_mm=30, f_number=1.8, pixel_pitch_um=10,
                          lens_length_mm=90, image_w=100, image_h=80)
        assert cam.principal_point == (50.0, 40.0)

    def test_aperture_is_derived(self, camera):
        assert camera.aperture_mm == pytest.approx(30.0 / 1.8)

    def test_nonfinite_coefficients_rejected(self):
        with pytest.raises(GeometryError):
            DistortionParams(k1=float("nan"))
