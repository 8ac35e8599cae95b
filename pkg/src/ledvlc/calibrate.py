"""Pilot phase: detect pilot spots, fit the radial distortion, rebuild the grid.

The pipeline runs detect -> match -> reference selection -> distortion fit
(two passes so the ideal lattice is anchored at a rectified reference) ->
rectification -> grid estimation -> distance inference -> blur prediction,
and reports the residual RMSE over the pilot set.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import Frame, IdealGrid, SymbolMatrix, check_pilot_spacing, pilot_pattern
from .errors import (
    AmbiguousCornerError,
    CalibrationError,
    FitError,
    GeometryError,
)
from .hough import Circle, HoughParams, hough_circles
from .optics import (
    BLUR_CORRECTION,
    CameraModel,
    DistortionParams,
    LinkGeometry,
    blur_diameter,
    infer_distance,
    pixel_scale,
    undistort_point,
    undistort_points,
)

# Conservative coefficient bounds for the bounded fitting option.
FIT_BOUNDS = ((-10.0, 10.0), (-50.0, 50.0), (-200.0, 200.0))


@dataclass
class PilotCorrespondence:
    """Association of one detected pilot with its lattice index.

    observed is the distorted image position; ideal is the matching
    undistorted lattice position (filled in by the pipeline).
    """

    index: tuple[int, int]
    observed: tuple[float, float]
    ideal: tuple[float, float] = (math.nan, math.nan)


@dataclass(frozen=True)
class GridEstimate:
    """Rectified LED grid reconstructed from the pilot corners."""

    center: tuple[float, float]
    tl: tuple[float, float]
    tr: tuple[float, float]
    bl: tuple[float, float]
    br: tuple[float, float]
    width: float
    height: float
    delta_a: float
    delta_b: float
    grid: IdealGrid

    def corners_json(self):
        return {
            "tl": list(self.tl),
            "tr": list(self.tr),
            "bl": list(self.bl),
            "br": list(self.br),
        }


@dataclass(frozen=True)
class FitResult:
    """Distortion coefficients with the fit's own residual statistics."""

    params: DistortionParams
    rmse: float
    clamped: bool


@dataclass
class CalibrationReport:
    """Everything the information phase needs from the pilot phase."""

    camera: CameraModel
    model_order: int
    rmse: float
    rmse_x: float
    rmse_y: float
    s_comm_est: float
    c_exp: int
    grid_estimate: GridEstimate
    spot_amplitude: float = 0.0
    background: float = 0.0
    overlap_warning: bool = False
    clamped: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def distortion(self) -> DistortionParams:
        return self.camera.distortion

    def to_json(self) -> str:
        cam = self.camera
        doc = {
            "k1": cam.distortion.k1,
            "k2": cam.distortion.k2,
            "k3": cam.distortion.k3,
            "model_order": self.model_order,
            "rmse": self.rmse,
            "rmse_x": self.rmse_x,
            "rmse_y": self.rmse_y,
            "delta_a": self.grid_estimate.delta_a,
            "delta_b": self.grid_estimate.delta_b,
            "c_exp": self.c_exp,
            "s_comm_est": self.s_comm_est,
            "corners": self.grid_estimate.corners_json(),
            "grid": {
                "origin": list(self.grid_estimate.grid.origin),
                "n": self.grid_estimate.grid.n,
            },
            "camera": {
                "f_mm": cam.f_mm,
                "f_number": cam.f_number,
                "pixel_pitch_um": cam.pixel_pitch_um,
                "lens_length_mm": cam.lens_length_mm,
                "cx": cam.cx,
                "cy": cam.cy,
                "image_w": cam.image_w,
                "image_h": cam.image_h,
            },
            "spot_amplitude": self.spot_amplitude,
            "background": self.background,
            "overlap_warning": self.overlap_warning,
            "clamped": self.clamped,
            "notes": self.notes,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CalibrationReport":
        doc = json.loads(text)
        cam = CameraModel(
            distortion=DistortionParams(doc["k1"], doc["k2"], doc["k3"]),
            **doc["camera"],
        )
        corners = doc["corners"]
        grid = IdealGrid(
            tuple(doc["grid"]["origin"]), doc["delta_a"], doc["delta_b"],
            doc["grid"]["n"],
        )
        tl, tr = tuple(corners["tl"]), tuple(corners["tr"])
        bl, br = tuple(corners["bl"]), tuple(corners["br"])
        width = math.dist(tl, tr)
        height = math.dist(tl, bl)
        center = (
            (tl[0] + tr[0] + bl[0] + br[0]) / 4.0,
            (tl[1] + tr[1] + bl[1] + br[1]) / 4.0,
        )
        estimate = GridEstimate(center, tl, tr, bl, br, width, height,
                                doc["delta_a"], doc["delta_b"], grid)
        return cls(
            camera=cam,
            model_order=doc["model_order"],
            rmse=doc["rmse"],
            rmse_x=doc["rmse_x"],
            rmse_y=doc["rmse_y"],
            s_comm_est=doc["s_comm_est"],
            c_exp=doc["c_exp"],
            grid_estimate=estimate,
            spot_amplitude=doc.get("spot_amplitude", 0.0),
            background=doc.get("background", 0.0),
            overlap_warning=doc.get("overlap_warning", False),
            clamped=doc.get("clamped", False),
            notes=list(doc.get("notes", [])),
        )


@dataclass(frozen=True)
class PilotConfig:
    """Knobs of the pilot pipeline."""

    stride: int = 3
    model_order: int = 2
    bounded: bool = True
    refine_iters: int = 3
    detect_epsilon: float = 0.2
    vote_threshold: float = 0.15
    grad_threshold: float = 0.1
    k_corr: float = BLUR_CORRECTION
    expected_c_px: float | None = None


def detect_pilots(
    frame: Frame,
    expected_c: float,
    params: HoughParams | None = None,
    expected_count: int | None = None,
    detect_epsilon: float = 0.2,
) -> list[Circle]:
    """Find pilot spots with a radius band centred on the predicted blur.

    Centres are polished with an intensity-weighted centroid over each
    candidate disk (pilots are isolated, so the centroid is unbiased).
    Raises a calibration failure when fewer than half the expected pilots
    are found.
    """
    if expected_c <= 0:
        raise GeometryError("expected blur diameter must be positive")
    if params is None:
        r0 = expected_c / 2.0
        params = HoughParams(
            r_min=max(2.0, math.floor(r0 * (1.0 - 2.0 * detect_epsilon))),
            r_max=math.ceil(r0 * (1.0 + 2.0 * detect_epsilon)),
            vote_threshold=0.15,
            min_center_dist=max(3.0, expected_c / 2.0),
        )
    circles = hough_circles(frame, params)
    circles = [_centroid_polish(frame, c) for c in circles]
    if expected_count is not None and len(circles) < expected_count / 2.0:
        raise CalibrationError(
            "detect_pilots",
            f"found {len(circles)} of {expected_count} expected pilots",
        )
    return circles


def _centroid_polish(frame: Frame, circle: Circle) -> Circle:
    """Sub-pixel centre from the intensity centroid over the spot disk."""
    img = frame.data
    h, w = img.shape
    radius = circle.r
    x0 = max(0, int(math.floor(circle.a - radius)))
    x1 = min(w - 1, int(math.ceil(circle.a + radius)))
    y0 = max(0, int(math.floor(circle.b - radius)))
    y1 = min(h - 1, int(math.ceil(circle.b + radius)))
    if x0 > x1 or y0 > y1:
        return circle
    px = np.arange(x0, x1 + 1, dtype=np.float64)
    py = np.arange(y0, y1 + 1, dtype=np.float64)[:, None]
    dx = px - circle.a
    dy = py - circle.b
    mask = dx * dx + dy * dy <= radius * radius
    win = img[y0 : y1 + 1, x0 : x1 + 1]
    weights = np.where(mask, win, 0.0)
    total = weights.sum()
    if total <= 0:
        return circle
    ca = float((weights * px).sum() / total)
    cb = float((weights * py).sum() / total)
    return Circle(a=ca, b=cb, r=circle.r, score=circle.score)


def _pattern_stride(pattern: SymbolMatrix) -> int:
    """Smallest index gap between active rows/columns (1 for dense)."""
    active = pattern.active_indices()
    gaps = []
    for axis in (0, 1):
        vals = np.unique(active[:, axis])
        if len(vals) > 1:
            gaps.append(int(np.diff(vals).min()))
    return min(gaps) if gaps else max(pattern.n - 1, 1)


def match_pilots(
    candidates: list[Circle],
    nominal: IdealGrid,
    pattern: SymbolMatrix,
) -> list[PilotCorrespondence]:
    """Greedy nearest-neighbour association of candidates to active pilots.

    A candidate may claim a pilot only within half the pilot spacing; each
    pilot keeps its closest candidate and spurious candidates are dropped.
    Fails when fewer than 75% of the pilots are matched.
    """
    if pattern.n != nominal.n:
        raise GeometryError("pattern size does not match the nominal grid")
    active = pattern.active_indices()
    positions = nominal.points(active)
    stride = _pattern_stride(pattern)
    gate = 0.5 * stride * min(nominal.delta_a, nominal.delta_b)
    pairs = []
    for ci, circle in enumerate(candidates):
        d = np.hypot(positions[:, 0] - circle.a, positions[:, 1] - circle.b)
        for pi in np.nonzero(d <= gate)[0]:
            pairs.append((float(d[pi]), ci, int(pi)))
    pairs.sort()
    used_c: set[int] = set()
    used_p: set[int] = set()
    corrs = []
    for dist, ci, pi in pairs:
        if ci in used_c or pi in used_p:
            continue
        used_c.add(ci)
        used_p.add(pi)
        circle = candidates[ci]
        corrs.append(
            PilotCorrespondence(
                index=(int(active[pi, 0]), int(active[pi, 1])),
                observed=(circle.a, circle.b),
                ideal=tuple(positions[pi]),
            )
        )
    if len(corrs) < 0.75 * len(active):
        raise CalibrationError(
            "match_pilots",
            f"matched only {len(corrs)} of {len(active)} pilots",
        )
    corrs.sort(key=lambda c: c.index)
    return corrs


def select_reference(
    corrs: list[PilotCorrespondence], camera: CameraModel
) -> tuple[int, int]:
    """Index of the pilot whose observation is closest to the principal point."""
    if not corrs:
        raise CalibrationError("select_reference", "no correspondences")
    best = min(
        corrs,
        key=lambda c: (
            (c.observed[0] - camera.cx) ** 2 + (c.observed[1] - camera.cy) ** 2,
            c.index,
        ),
    )
    return best.index


def ideal_pilot_grid(
    reference: PilotCorrespondence,
    alpha: float,
    pattern: SymbolMatrix,
) -> dict[tuple[int, int], tuple[float, float]]:
    """Ideal pilot positions anchored at the reference: ref + alpha*(idx - ref_idx)."""
    if alpha <= 0:
        raise GeometryError("pixel scale must be positive")
    a_ref, b_ref = reference.ideal
    i0, j0 = reference.index
    out = {}
    for i, j in pattern.active_indices():
        out[(int(i), int(j))] = (
            a_ref + alpha * (int(i) - i0),
            b_ref + alpha * (int(j) - j0),
        )
    return out


def fit_distortion(
    corrs: list[PilotCorrespondence],
    camera: CameraModel,
    order: int = 2,
    bounded: bool = True,
) -> FitResult:
    """Least-squares radial coefficients from observed/ideal pairs.

    The forward model is linear in the coefficients for fixed ideal
    points, so the stacked residual system solves in closed form. The
    reported rmse is the fit residual, sqrt(sum of squared component
    residuals / number of points); coefficients beyond `order` stay zero.
    """
    if order not in (1, 2, 3):
        raise GeometryError("model order must be 1, 2 or 3")
    if len(corrs) < order + 3:
        raise FitError(f"need at least {order + 3} correspondences, got {len(corrs)}")
    f2 = camera.focal_px**2
    rows = []
    target = []
    for corr in corrs:
        ax, by = corr.ideal
        dx = ax - camera.cx
        dy = by - camera.cy
        r2 = (dx * dx + dy * dy) / f2
        powers = [r2, r2 * r2, r2 * r2 * r2][:order]
        rows.append([dx * p for p in powers])
        rows.append([dy * p for p in powers])
        target.append(corr.observed[0] - ax)
        target.append(corr.observed[1] - by)
    a_mat = np.asarray(rows, dtype=np.float64)
    t_vec = np.asarray(target, dtype=np.float64)
    sol, _, rank, _ = np.linalg.lstsq(a_mat, t_vec, rcond=None)
    if rank < order:
        raise FitError(
            f"rank-deficient distortion system (rank {rank} < order {order}); "
            "pilot radii do not span the model"
        )
    coeffs = list(sol) + [0.0] * (3 - order)
    clamped = False
    if bounded:
        for idx, (lo, hi) in enumerate(FIT_BOUNDS):
            if coeffs[idx] < lo or coeffs[idx] > hi:
                coeffs[idx] = min(max(coeffs[idx], lo), hi)
                clamped = True
    params = DistortionParams(*coeffs)
    residual = a_mat @ np.array([params.k1, params.k2, params.k3][:order]) - t_vec
    rmse = float(np.sqrt((residual**2).sum() / len(corrs)))
    return FitResult(params=params, rmse=rmse, clamped=clamped)


def rectify_centers(
    corrs: list[PilotCorrespondence],
    camera: CameraModel,
    refine_iters: int = 3,
) -> np.ndarray:
    """Undistort every observed centre with the camera's fitted coefficients."""
    observed = np.array([c.observed for c in corrs], dtype=np.float64)
    return undistort_points(observed, camera, refine_iters)


def estimate_grid(points: np.ndarray, n: int, stride: int = 1) -> GridEstimate:
    """Rebuild the full LED lattice from rectified pilot positions.

    The four points farthest from the centroid take corner roles by
    quadrant; grid width/height are the top and left edge lengths, the
    spacing divides them by (n - 1), and the lattice is materialized from
    the bottom-left corner.
    """
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 4:
        raise CalibrationError("estimate_grid", "need at least four pilot points")
    center = pts.mean(axis=0)
    d2 = ((pts - center) ** 2).sum(axis=1)
    order = np.lexsort((np.arange(len(pts)), -d2))
    corners = {}
    for idx in order[:4]:
        a_star, b_star = pts[idx]
        if a_star == center[0] or b_star == center[1]:
            raise AmbiguousCornerError(
                f"farthest point {pts[idx]} lies on a quadrant boundary"
            )
        role = ("t" if b_star > center[1] else "b") + ("l" if a_star < center[0] else "r")
        if role in corners:
            raise AmbiguousCornerError(f"two farthest points share corner role {role}")
        corners[role] = (float(a_star), float(b_star))
    if set(corners) != {"tl", "tr", "bl", "br"}:
        raise AmbiguousCornerError("could not assign all four corner roles")
    tl, tr = corners["tl"], corners["tr"]
    bl, br = corners["bl"], corners["br"]
    width = math.dist(tl, tr)
    height = math.dist(tl, bl)
    delta_a = width / (n - 1)
    delta_b = height / (n - 1)
    grid = IdealGrid(origin=bl, delta_a=delta_a, delta_b=delta_b, n=n)
    return GridEstimate(
        center=(float(center[0]), float(center[1])),
        tl=tl, tr=tr, bl=bl, br=br,
        width=width, height=height,
        delta_a=delta_a, delta_b=delta_b,
        grid=grid,
    )


def _stage(name: str):
    """Decorator-ish context: re-raise non-calibration errors with the stage name."""

    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, CalibrationError):
                raise CalibrationError(name, str(exc)) from exc
            return False

    return _Ctx()


def calibrate_pilot_frame(
    frame: Frame,
    camera: CameraModel,
    geometry: LinkGeometry,
    config: PilotConfig | None = None,
) -> CalibrationReport:
    """Run the whole pilot phase on one frame and report the link geometry."""
    config = config or PilotConfig()
    pattern = pilot_pattern(geometry.n_leds, config.stride)

    with _stage("predict_blur"):
        if config.expected_c_px is not None:
            expected_c = float(config.expected_c_px)
        elif geometry.comm_m is not None:
            expected_c = float(
                blur_diameter(camera, geometry.focus_m, geometry.comm_m,
                              config.k_corr)[1]
            )
        else:
            raise GeometryError(
                "no expected blur diameter: configure comm_m or expected_c_px"
            )

    candidates = detect_pilots(
        frame, expected_c, expected_count=pattern.ones(),
        detect_epsilon=config.detect_epsilon,
    )

    with _stage("nominal_grid"):
        if geometry.comm_m is not None:
            alpha = pixel_scale(camera, geometry)
        else:
            alpha = _spacing_from_candidates(candidates) / config.stride
        centers = np.array([[c.a, c.b] for c in candidates])
        centroid = centers.mean(axis=0)
        half_span = (geometry.n_leds - 1) / 2.0 * alpha
        nominal = IdealGrid(
            origin=(float(centroid[0] - half_span), float(centroid[1] - half_span)),
            delta_a=alpha, delta_b=alpha, n=geometry.n_leds,
        )

    corrs = match_pilots(candidates, nominal, pattern)

    with _stage("select_reference"):
        ref_index = select_reference(corrs, camera)
        by_index = {c.index: c for c in corrs}
        reference = by_index[ref_index]

    with _stage("fit_distortion"):
        # Pass 1: anchor the ideal lattice at the raw reference observation.
        reference.ideal = reference.observed
        ideal = ideal_pilot_grid(reference, alpha, pattern)
        for corr in corrs:
            corr.ideal = ideal[corr.index]
        first = fit_distortion(corrs, camera, config.model_order, config.bounded)
        # Pass 2: re-anchor at the rectified reference and refit once.
        cam1 = replace(camera, distortion=first.params)
        reference.ideal = undistort_point(reference.observed, cam1,
                                          config.refine_iters)
        ideal = ideal_pilot_grid(reference, alpha, pattern)
        for corr in corrs:
            corr.ideal = ideal[corr.index]
        fit = fit_distortion(corrs, camera, config.model_order, config.bounded)
        cam_fitted = replace(camera, distortion=fit.params)

    with _stage("rectify"):
        rectified = rectify_centers(corrs, cam_fitted, config.refine_iters)

    with _stage("estimate_grid"):
        estimate = estimate_grid(rectified, geometry.n_leds, config.stride)

    with _stage("infer_distance"):
        s_comm = infer_distance(estimate.delta_a, geometry)

    with _stage("predict_blur"):
        _, c_exp = blur_diameter(camera, geometry.focus_m, s_comm, config.k_corr)

    with _stage("report"):
        ideal_pts = np.array([ideal[c.index] for c in corrs])
        res = rectified - ideal_pts
        rmse_x = float(np.sqrt((res[:, 0] ** 2).mean()))
        rmse_y = float(np.sqrt((res[:, 1] ** 2).mean()))
        rmse = float(math.hypot(rmse_x, rmse_y))
        img = frame.data
        amps = []
        for corr in corrs:
            xi = int(math.floor(corr.observed[0] + 0.5))
            yi = int(math.floor(corr.observed[1] + 0.5))
            if 0 <= xi < img.shape[1] and 0 <= yi < img.shape[0]:
                amps.append(float(img[yi, xi]))
        notes = ["rectification uses the radial model only (no homography)"]
        overlap = not check_pilot_spacing(estimate.grid, pattern, c_exp)
        if overlap:
            notes.append("pilot spacing below the blur diameter; spots may overlap")
        return CalibrationReport(
            camera=cam_fitted,
            model_order=config.model_order,
            rmse=rmse,
            rmse_x=rmse_x,
            rmse_y=rmse_y,
            s_comm_est=float(s_comm),
            c_exp=int(c_exp),
            grid_estimate=estimate,
            spot_amplitude=float(np.median(amps)) if amps else 0.0,
            background=float(np.median(img)),
            overlap_warning=overlap,
            clamped=fit.clamped,
            notes=notes,
        )


def _spacing_from_candidates(candidates: list[Circle]) -> float:
    """Median nearest-neighbour distance among detected pilot spots."""
    pts = np.array([[c.a, c.b] for c in candidates])
    if len(pts) < 2:
        raise GeometryError("cannot infer spacing from fewer than two pilots")
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.sqrt((diff**2).sum(axis=2))
    np.fill_diagonal(d, np.inf)
    return float(np.median(d.min(axis=1)))
