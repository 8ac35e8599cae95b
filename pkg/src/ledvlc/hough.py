"""Circle-candidate extraction by gradient voting.

Each edge pixel votes along both gradient directions at every radius in
the search band; accumulator peaks normalized by circle circumference
become candidates, deduplicated by a minimum centre distance and refined
to sub-pixel centres with a vote-weighted centroid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter

from . import _kernels as kernels
from .channel import Frame
from .errors import GeometryError


@dataclass(frozen=True)
class Circle:
    """One detected candidate: sub-pixel centre, radius and normalized score."""

    a: float
    b: float
    r: float
    score: float


@dataclass(frozen=True)
class HoughParams:
    """Search band and thresholds for the circle detector.

    grad_threshold is a fraction of the frame's intensity dynamic range;
    vote_threshold is a fraction of the ideal full-circle vote count
    (the circumference in pixels) for the candidate radius.
    """

    r_min: float
    r_max: float
    grad_threshold: float = 0.1
    vote_threshold: float = 0.22
    min_center_dist: float = 5.0
    radius_step: float = 1.0

    def __post_init__(self):
        if not (0 < self.r_min <= self.r_max):
            raise GeometryError("need 0 < r_min <= r_max")
        if self.radius_step <= 0:
            raise GeometryError("radius step must be positive")
        if not (0 < self.vote_threshold <= 1):
            raise GeometryError("vote threshold must be in (0, 1]")
        if self.grad_threshold <= 0:
            raise GeometryError("gradient threshold must be positive")

    def radii(self) -> np.ndarray:
        return np.arange(self.r_min, self.r_max + self.radius_step * 0.5,
                         self.radius_step, dtype=np.float64)


@dataclass
class EdgeMap:
    """Interior edge pixels with their unit gradient directions."""

    x: np.ndarray
    y: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    magnitude: np.ndarray

    def __len__(self):
        return len(self.x)


def _empty_edges() -> EdgeMap:
    return EdgeMap(
        x=np.empty(0, dtype=np.int64),
        y=np.empty(0, dtype=np.int64),
        ux=np.empty(0, dtype=np.float64),
        uy=np.empty(0, dtype=np.float64),
        magnitude=np.empty(0, dtype=np.float64),
    )


def edge_map(frame: Frame, grad_threshold: float = 0.1) -> EdgeMap:
    """Central-difference gradient thresholded at a fraction of the range.

    A pixel is an edge point iff its gradient magnitude reaches
    grad_threshold times (max - min) of the frame. Border pixels carry no
    central difference and are excluded.
    """
    img = frame.data
    empty = _empty_edges()
    if img.shape[0] < 3 or img.shape[1] < 3:
        return empty
    lo = float(img.min())
    hi = float(img.max())
    if hi <= lo:
        return empty
    gx = (img[1:-1, 2:] - img[1:-1, :-2]) * 0.5
    gy = (img[2:, 1:-1] - img[:-2, 1:-1]) * 0.5
    mag = np.hypot(gx, gy)
    thr = grad_threshold * (hi - lo)
    ys, xs = np.nonzero(mag >= thr)
    if len(xs) == 0:
        return empty
    m = mag[ys, xs]
    keep = m > 0
    ys, xs, m = ys[keep], xs[keep], m[keep]
    return EdgeMap(
        x=(xs + 1).astype(np.int64),
        y=(ys + 1).astype(np.int64),
        ux=gx[ys, xs] / m,
        uy=gy[ys, xs] / m,
        magnitude=m,
    )


def _refine_center(plane: np.ndarray, b: int, a: int) -> tuple[float, float]:
    """Vote-weighted centroid of the 3x3 accumulator neighbourhood."""
    h, w = plane.shape
    b0, b1 = max(0, b - 1), min(h, b + 2)
    a0, a1 = max(0, a - 1), min(w, a + 2)
    win = plane[b0:b1, a0:a1].astype(np.float64)
    total = win.sum()
    if total <= 0:
        return float(a), float(b)
    bs, as_ = np.mgrid[b0:b1, a0:a1]
    return float((as_ * win).sum() / total), float((bs * win).sum() / total)


def hough_circles(frame: Frame, params: HoughParams) -> list[Circle]:
    """Detect circles, strongest first.

    Local accumulator maxima whose normalized score reaches
    vote_threshold become candidates; among candidates closer than
    min_center_dist only the best survives. Equal scores break ties by
    smaller (b, a, r) so the result is deterministic.
    """
    radii = params.radii()
    if len(radii) == 0:
        raise GeometryError("empty radius band")
    edges = edge_map(frame, params.grad_threshold)
    if len(edges) == 0:
        return []
    acc = kernels.hough_accumulate(
        edges.x, edges.y, edges.ux, edges.uy, radii,
        frame.height, frame.width,
    )
    norm = acc.astype(np.float64) / (2.0 * math.pi * radii)[:, None, None]
    local_max = norm >= maximum_filter(norm, size=3, mode="constant")
    peaks = np.argwhere(local_max & (norm >= params.vote_threshold))
    if len(peaks) == 0:
        return []
    candidates = []
    for ri, b, a in peaks:
        score = float(norm[ri, b, a])
        ca, cb = _refine_center(acc[ri], int(b), int(a))
        candidates.append((score, float(b), float(a), float(radii[ri]), ca, cb))
    candidates.sort(key=lambda t: (-t[0], t[1], t[2], t[3]))
    kept: list[Circle] = []
    for score, _b, _a, r, ca, cb in candidates:
        if any((ca - k.a) ** 2 + (cb - k.b) ** 2 < params.min_center_dist**2
               for k in kept):
            continue
        kept.append(Circle(a=ca, b=cb, r=r, score=score))
    return kept
