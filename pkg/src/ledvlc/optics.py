"""Geometric and radiometric formulas shared by the simulator and the receiver.

Projection scaling, radial lens distortion (forward and inverse), defocus
blur prediction, chief-ray vignetting limits, clipped-spot visibility,
interference classification and distance inference. Every public function
states its units; internally lengths are converted to micrometres and image
coordinates are pixels. All functions are pure and thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import DistortionError, FocusError, GeometryError

UM_PER_MM = 1000.0
UM_PER_M = 1_000_000.0

# Default correction factor mapping the thin-lens blur estimate to the
# blur diameter actually observed on the sensor.
BLUR_CORRECTION = 1.3

# Radial breakpoints (pixels) separating the visibility levels used for
# reporting clipped spots: level 0 is fully visible, level 3 mostly dark.
VISIBILITY_BREAKPOINTS = (278.0, 290.0, 308.0)


@dataclass(frozen=True)
class DistortionParams:
    """Radial distortion coefficients of the polynomial model.

    The forward map scales the displacement from the principal point by
    1 + k1*r^2 + k2*r^4 + k3*r^6 where r is the radius normalized by the
    focal length in pixels. k1 < 0 produces barrel contraction, k1 > 0
    pincushion expansion.
    """

    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0

    def __post_init__(self):
        for name in ("k1", "k2", "k3"):
            if not math.isfinite(getattr(self, name)):
                raise GeometryError(f"distortion coefficient {name} must be finite")

    def factor(self, r2):
        """Radial scale 1 + k1*r2 + k2*r2^2 + k3*r2^3 at squared radius r2."""
        return 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3))

    def factor_derivative(self, r):
        """d/dr of factor(r^2)."""
        r2 = r * r
        return r * (2.0 * self.k1 + r2 * (4.0 * self.k2 + r2 * 6.0 * self.k3))

    def is_zero(self) -> bool:
        return self.k1 == 0.0 and self.k2 == 0.0 and self.k3 == 0.0


@dataclass(frozen=True)
class CameraModel:
    """Optical and sensor constants; the single source of geometric truth.

    f_mm: focal length, f_number: aperture value, pixel_pitch_um: physical
    pixel size, lens_length_mm: barrel length bounding the chief ray,
    (cx, cy): principal point in pixels (defaults to the image centre),
    image_w/image_h: sensor resolution in pixels.
    """

    f_mm: float
    f_number: float
    pixel_pitch_um: float
    lens_length_mm: float
    image_w: int
    image_h: int
    cx: float | None = None
    cy: float | None = None
    distortion: DistortionParams = field(default_factory=DistortionParams)

    def __post_init__(self):
        if self.f_mm <= 0 or self.f_number <= 0:
            raise GeometryError("focal length and F-number must be positive")
        if self.pixel_pitch_um <= 0 or self.lens_length_mm <= 0:
            raise GeometryError("pixel pitch and lens length must be positive")
        if self.image_w <= 0 or self.image_h <= 0:
            raise GeometryError("image dimensions must be positive")
        if self.cx is None:
            object.__setattr__(self, "cx", self.image_w / 2.0)
        if self.cy is None:
            object.__setattr__(self, "cy", self.image_h / 2.0)
        if not (0 <= self.cx < self.image_w and 0 <= self.cy < self.image_h):
            raise GeometryError("principal point must lie inside the image")

    @property
    def aperture_mm(self) -> float:
        """Effective aperture diameter D = f/F (derived, never stored)."""
        return self.f_mm / self.f_number

    @property
    def focal_px(self) -> float:
        """Focal length expressed in pixels, f / P."""
        return self.f_mm * UM_PER_MM / self.pixel_pitch_um

    @property
    def principal_point(self) -> tuple[float, float]:
        return (self.cx, self.cy)


@dataclass(frozen=True)
class LinkGeometry:
    """Physical layout of the LED array and the working distances.

    n_leds: LEDs per side, pitch_m: physical LED spacing, focus_m: camera
    focusing distance s, comm_m: communication distance s' (None when the
    receiver must infer it), ref_spacing_px / ref_distance_m: inter-LED
    pixel spacing observed at a known reference distance.
    """

    n_leds: int
    pitch_m: float
    focus_m: float
    comm_m: float | None = None
    ref_spacing_px: float = 25.0
    ref_distance_m: float = 6.0

    def __post_init__(self):
        if self.n_leds < 2:
            raise GeometryError("need at least a 2x2 LED array")
        if self.pitch_m <= 0:
            raise GeometryError("LED pitch must be positive")
        if self.focus_m <= 0:
            raise GeometryError("focusing distance must be positive")
        if self.comm_m is not None and self.comm_m <= 0:
            raise GeometryError("communication distance must be positive")
        if self.ref_spacing_px <= 0 or self.ref_distance_m <= 0:
            raise GeometryError("reference spacing and distance must be positive")


class IsiDegree(Enum):
    """Interference class of a (spacing, blur) pair; higher is worse."""

    DEGREE1 = 1
    DEGREE2 = 2
    DEGREE3 = 3
    BEYOND = 4


class ChiefRayLimits(NamedTuple):
    theta_max_deg: float
    r_max_mm: float
    r_max_px: float


def pixel_scale(camera: CameraModel, geometry: LinkGeometry) -> float:
    """Pixels per LED step at the communication distance: (f/P)*(pitch/s')."""
    if geometry.comm_m is None or geometry.comm_m <= 0:
        raise GeometryError("pixel_scale requires a positive communication distance")
    return camera.focal_px * geometry.pitch_m / geometry.comm_m


def distort_point(p, camera: CameraModel) -> tuple[float, float]:
    """Map an ideal pixel coordinate through the radial distortion model.

    The displacement from the principal point is scaled by the distortion
    polynomial evaluated at the focal-length-normalized radius; the
    principal point is a fixed point for every parameter set.
    """
    a, b = float(p[0]), float(p[1])
    dx = a - camera.cx
    dy = b - camera.cy
    r2 = (dx * dx + dy * dy) / (camera.focal_px**2)
    g = camera.distortion.factor(r2)
    return (camera.cx + dx * g, camera.cy + dy * g)


def distort_points(points: np.ndarray, camera: CameraModel) -> np.ndarray:
    """Vectorized distort_point for an (n, 2) array of pixel coordinates."""
    pts = np.asarray(points, dtype=np.float64)
    d = pts - np.array(camera.principal_point)
    r2 = (d * d).sum(axis=1) / (camera.focal_px**2)
    g = camera.distortion.factor(r2)
    return np.array(camera.principal_point) + d * g[:, None]


def _invert_radius(r_d: float, dist: DistortionParams, refine_iters: int) -> float:
    """Solve r_u * factor(r_u^2) = r_d for the undistorted radius.

    Starts from the first-order inverse (polynomial evaluated at the
    distorted radius) and applies `refine_iters` Newton updates that
    re-evaluate the polynomial at the current undistorted estimate. A plain
    Picard iteration stalls at strong barrel distortion, so the update uses
    the radial derivative as well.
    """
    g0 = dist.factor(r_d * r_d)
    if g0 <= 0.0:
        raise DistortionError(
            f"distortion factor {g0:.6g} <= 0 at distorted radius {r_d:.6g}"
        )
    r_u = r_d / g0
    for _ in range(refine_iters):
        g = dist.factor(r_u * r_u)
        slope = g + r_u * dist.factor_derivative(r_u)
        if g <= 0.0 or slope <= 0.0:
            raise DistortionError(
                f"radial map not invertible near normalized radius {r_u:.6g}"
            )
        r_u -= (r_u * g - r_d) / slope
    return r_u


def undistort_point(p, camera: CameraModel, refine_iters: int = 3) -> tuple[float, float]:
    """Inverse of distort_point.

    refine_iters=0 reproduces the first-order inverse (divide the
    displacement by the polynomial at the distorted radius); positive
    values refine the estimate as described in _invert_radius. Raises
    DistortionError where the map is not invertible.
    """
    if refine_iters < 0:
        raise GeometryError("refine_iters must be >= 0")
    a, b = float(p[0]), float(p[1])
    dx = a - camera.cx
    dy = b - camera.cy
    r_d = math.hypot(dx, dy) / camera.focal_px
    if r_d == 0.0:
        # Still reject parameter sets that are degenerate at the origin.
        if camera.distortion.factor(0.0) <= 0:
            raise DistortionError("distortion factor <= 0 at zero radius")
        return (a, b)
    r_u = _invert_radius(r_d, camera.distortion, refine_iters)
    scale = r_u / r_d
    return (camera.cx + dx * scale, camera.cy + dy * scale)


def undistort_points(points: np.ndarray, camera: CameraModel, refine_iters: int = 3) -> np.ndarray:
    """Vectorized undistort_point for an (n, 2) array."""
    pts = np.asarray(points, dtype=np.float64)
    out = np.empty_like(pts)
    for i, p in enumerate(pts):
        out[i] = undistort_point(p, camera, refine_iters)
    return out


def blur_diameter(
    camera: CameraModel,
    focus_m: float,
    comm_m: float,
    k_corr: float = BLUR_CORRECTION,
) -> tuple[float, int]:
    """Predict the defocus blur diameter of a point emitter.

    Returns (c_calc_um, c_exp_px) where
        c_calc = D*f*|s - s'| / (s'*(s - f))      [micrometres]
        c_exp  = round(k_corr * c_calc / P)       [pixels]
    with D = f/F the effective aperture, s the focusing distance and s'
    the communication distance. Rounding is half away from zero.
    """
    if comm_m <= 0:
        raise GeometryError("communication distance must be positive")
    f_um = camera.f_mm * UM_PER_MM
    s_um = focus_m * UM_PER_M
    sc_um = comm_m * UM_PER_M
    if s_um <= f_um:
        raise FocusError("focusing distance must exceed the focal length")
    d_um = f_um / camera.f_number
    c_calc = d_um * f_um * abs(s_um - sc_um) / (sc_um * (s_um - f_um))
    c_exp = int(math.floor(k_corr * c_calc / camera.pixel_pitch_um + 0.5))
    return c_calc, c_exp


def chief_ray_limits(camera: CameraModel) -> ChiefRayLimits:
    """Maximum unvignetted chief ray angle and the usable image radius.

    theta_max = atan(D / (2L)); r_max = f * tan(theta_max) = f*D/(2L),
    returned in degrees, millimetres and pixels.
    """
    d_mm = camera.aperture_mm
    theta = math.atan(d_mm / (2.0 * camera.lens_length_mm))
    r_max_mm = camera.f_mm * math.tan(theta)
    r_max_px = r_max_mm * UM_PER_MM / camera.pixel_pitch_um
    return ChiefRayLimits(math.degrees(theta), r_max_mm, r_max_px)


def visible_area_ratio(r_px: float, r_max_px: float, c_px: float) -> float:
    """Fraction of a blur disk left visible when clipped at the usable radius.

    For radial exceedance delta = r_px - r_max_px the visible crescent of a
    disk of diameter c_px is
        1                                     delta <= 0
        [R^2 acos(delta/R) - delta sqrt(R^2 - delta^2)] / (pi R^2)
                                              0 < delta < R, R = c/2
        0                                     delta >= R
    Note the ratio steps from 1 to 0.5 as delta crosses zero.
    """
    if c_px <= 0:
        raise GeometryError("blur diameter must be positive")
    delta = r_px - r_max_px
    if delta <= 0:
        return 1.0
    radius = c_px / 2.0
    if delta >= radius:
        return 0.0
    area = radius * radius * math.acos(delta / radius) - delta * math.sqrt(
        radius * radius - delta * delta
    )
    return area / (math.pi * radius * radius)


def visibility_level(r_px: float, breakpoints=VISIBILITY_BREAKPOINTS) -> int:
    """Reporting label 0..3 for a spot at radial distance r_px (pixels)."""
    level = 0
    for edge in breakpoints:
        if r_px >= edge:
            level += 1
    return level


def isi_degree(delta_a: float, c_px: float) -> IsiDegree:
    """Classify interference from the spacing/blur gap g = delta_a - C/2.

    Degree 1 when g > 0 (blur never reaches a neighbouring centre),
    degree 2 when -delta_a < g <= 0 (one neighbour reached), degree 3 when
    -2*delta_a < g <= -delta_a (two neighbours), and beyond otherwise.
    Boundaries are assigned to the higher-interference class.
    """
    if delta_a <= 0:
        raise GeometryError("inter-LED spacing must be positive")
    if c_px < 0:
        raise GeometryError("blur diameter must be non-negative")
    g = delta_a - c_px / 2.0
    if g > 0:
        return IsiDegree.DEGREE1
    if g > -delta_a:
        return IsiDegree.DEGREE2
    if g > -2.0 * delta_a:
        return IsiDegree.DEGREE3
    return IsiDegree.BEYOND


def infer_distance(delta_a_obs: float, geometry: LinkGeometry) -> float:
    """Communication distance from the observed inter-LED pixel spacing.

    Assumes spacing inversely proportional to distance:
    s' = (ref_spacing_px / delta_a_obs) * ref_distance_m.
    """
    if delta_a_obs <= 0:
        raise GeometryError("observed spacing must be positive")
    return geometry.ref_spacing_px / delta_a_obs * geometry.ref_distance_m
