"""Forward channel simulator: symbol matrices to sensor frames.

Active LEDs become blur disks accumulated onto the frame; optional radial
distortion displaces the spot centres, optional vignetting clips pixels
beyond the usable radius and attenuates spot amplitudes, Gaussian noise is
added from a counter-based generator, and the result is clipped to the
saturation level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kernels
from .errors import GeometryError, PatternError
from .optics import CameraModel, chief_ray_limits, distort_points, visible_area_ratio

PSF_PROFILES = {
    "uniform": kernels.PROFILE_UNIFORM,
    "feathered": kernels.PROFILE_FEATHERED,
    "gaussian-taper": kernels.PROFILE_GAUSSIAN,
}


@dataclass
class Frame:
    """A received image: row-major intensity samples, nominally in [0, 1].

    data is indexed [b, a] (row = vertical coordinate b, column =
    horizontal coordinate a).
    """

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.size == 0:
            raise GeometryError("frame data must be a non-empty 2-D array")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @classmethod
    def zeros(cls, width: int, height: int) -> "Frame":
        if width <= 0 or height <= 0:
            raise GeometryError("frame dimensions must be positive")
        return cls(np.zeros((height, width), dtype=np.float64))


@dataclass
class SymbolMatrix:
    """n x n binary OOK symbols; bits[i, j] with i horizontal, j vertical."""

    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 2 or self.bits.shape[0] != self.bits.shape[1]:
            raise PatternError("symbol matrix must be square")
        if self.bits.shape[0] < 1:
            raise PatternError("symbol matrix must be non-empty")
        if not np.isin(self.bits, (0, 1)).all():
            raise PatternError("symbols must be 0 or 1")

    @property
    def n(self) -> int:
        return self.bits.shape[0]

    def ones(self) -> int:
        return int(self.bits.sum())

    @property
    def lighting_ratio(self) -> float:
        return self.ones() / float(self.n * self.n)

    def active_indices(self) -> np.ndarray:
        """(m, 2) array of active (i, j) index pairs, lexicographic order."""
        idx = np.argwhere(self.bits == 1)
        return idx.astype(np.int64)

    @classmethod
    def zeros(cls, n: int) -> "SymbolMatrix":
        return cls(np.zeros((n, n), dtype=np.uint8))

    def to_text(self) -> str:
        """0/1 text grid, one row (fixed j) per line."""
        lines = ["".join(str(int(v)) for v in self.bits[:, j]) for j in range(self.n)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SymbolMatrix":
        rows = [line.strip() for line in text.splitlines() if line.strip()]
        if not rows:
            raise PatternError("empty symbol grid")
        n = len(rows)
        bits = np.zeros((n, n), dtype=np.uint8)
        for j, line in enumerate(rows):
            if len(line) != n or any(c not in "01" for c in line):
                raise PatternError(f"bad symbol grid line {j}: {line!r}")
            bits[:, j] = [int(c) for c in line]
        return cls(bits)

    def __eq__(self, other):
        return isinstance(other, SymbolMatrix) and np.array_equal(self.bits, other.bits)


@dataclass(frozen=True)
class IdealGrid:
    """Rectified LED lattice: origin plus integer multiples of the spacing."""

    origin: tuple[float, float]
    delta_a: float
    delta_b: float
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise GeometryError("grid must have at least one LED per side")
        if self.delta_a <= 0 or self.delta_b <= 0:
            raise GeometryError("grid spacing must be positive")

    def point(self, i: int, j: int) -> tuple[float, float]:
        return (self.origin[0] + i * self.delta_a, self.origin[1] + j * self.delta_b)

    def points(self, indices: np.ndarray) -> np.ndarray:
        """(m, 2) pixel positions for an (m, 2) array of (i, j) indices."""
        idx = np.asarray(indices, dtype=np.float64)
        return np.column_stack(
            (self.origin[0] + idx[:, 0] * self.delta_a,
             self.origin[1] + idx[:, 1] * self.delta_b)
        )

    def all_points(self) -> np.ndarray:
        ii, jj = np.meshgrid(np.arange(self.n), np.arange(self.n), indexing="ij")
        idx = np.column_stack((ii.ravel(), jj.ravel()))
        return self.points(idx)

    @classmethod
    def centered(cls, width: int, height: int, delta_a: float, delta_b: float, n: int) -> "IdealGrid":
        """Grid centred in a width x height frame, origin rounded to integers."""
        span_a = (n - 1) * delta_a
        span_b = (n - 1) * delta_b
        origin = (
            float(round((width - 1) / 2.0 - span_a / 2.0)),
            float(round((height - 1) / 2.0 - span_b / 2.0)),
        )
        return cls(origin, delta_a, delta_b, n)


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian noise and the sensor saturation level.

    Identical (sigma, seed, saturation) always reproduce the same noise
    field bit for bit (counter-based generator). saturation=inf disables
    clipping, for linearity checks.
    """

    sigma: float = 0.0
    seed: int = 0
    saturation: float = 1.0

    def __post_init__(self):
        if self.sigma < 0:
            raise GeometryError("noise sigma must be >= 0")
        if not (self.saturation > 0):
            raise GeometryError("saturation level must be positive")


@dataclass(frozen=True)
class ChannelFlags:
    """Composition switches of the received-signal model."""

    apply_distortion: bool = False
    apply_vignetting: bool = False
    psf_profile: str = "feathered"
    feather_px: float = 2.0
    gain: float = 0.8

    def __post_init__(self):
        if self.psf_profile not in PSF_PROFILES:
            raise GeometryError(
                f"unknown PSF profile {self.psf_profile!r}; "
                f"expected one of {sorted(PSF_PROFILES)}"
            )
        if self.feather_px < 0:
            raise GeometryError("feather width must be >= 0")
        if self.gain <= 0:
            raise GeometryError("gain must be positive")


def pilot_pattern(n: int, stride: int) -> SymbolMatrix:
    """Sparse pilot activation: ones where both indices are multiples of stride.

    Requires stride >= 1 and (n - 1) divisible by stride so the pattern
    includes all four corners. n=16, stride=3 yields the 36-pilot grid on
    indices {0, 3, 6, 9, 12, 15}.
    """
    if stride < 1:
        raise PatternError("stride must be >= 1")
    if (n - 1) % stride != 0:
        raise PatternError(f"(n-1)={n - 1} is not divisible by stride={stride}")
    bits = np.zeros((n, n), dtype=np.uint8)
    idx = np.arange(0, n, stride)
    bits[np.ix_(idx, idx)] = 1
    return SymbolMatrix(bits)


def check_pilot_spacing(grid: IdealGrid, pattern: SymbolMatrix, c_px: float) -> bool:
    """True when every pair of active pilots is more than c_px apart."""
    if pattern.n != grid.n:
        raise PatternError("pattern size does not match the grid")
    pts = grid.points(pattern.active_indices())
    m = len(pts)
    if m < 2:
        return True
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = (diff * diff).sum(axis=2)
    iu = np.triu_indices(m, k=1)
    return bool((d2[iu] > c_px * c_px).all())


def render_frame(
    symbols: SymbolMatrix,
    grid: IdealGrid,
    camera: CameraModel,
    c_px: float,
    noise: NoiseModel,
    flags: ChannelFlags,
) -> Frame:
    """Render the received frame for one symbol matrix.

    Each active LED contributes a disk of diameter c_px centred on its
    (optionally distorted) grid position, scaled by the gain and, under
    vignetting, by eta * h_eta with h_eta = eta (eta the visible-area
    ratio of the spot centre). Pixels beyond the chief-ray radius are
    clipped to zero when vignetting applies. Noise is then added and the
    frame clipped to [0, saturation].
    """
    if c_px < 0:
        raise GeometryError("blur diameter must be >= 0")
    if symbols.n != grid.n:
        raise PatternError("symbol matrix size does not match the grid")
    frame = Frame.zeros(camera.image_w, camera.image_h)
    active = symbols.active_indices()
    if len(active) > 0 and c_px > 0:
        if flags.psf_profile == "feathered" and flags.feather_px >= c_px / 2.0 and flags.feather_px > 0:
            raise GeometryError("feather width must be smaller than the disk radius")
        centers = grid.points(active)
        if flags.apply_distortion:
            centers = distort_points(centers, camera)
        amps = np.full(len(centers), flags.gain, dtype=np.float64)
        clip = 0
        r_max_px = 0.0
        if flags.apply_vignetting:
            clip = 1
            r_max_px = chief_ray_limits(camera).r_max_px
            d = centers - np.array(camera.principal_point)
            radial = np.hypot(d[:, 0], d[:, 1])
            eta = np.array([visible_area_ratio(r, r_max_px, c_px) for r in radial])
            amps *= eta * eta
        kernels.render_spots(
            frame.data,
            np.ascontiguousarray(centers[:, 0]),
            np.ascontiguousarray(centers[:, 1]),
            amps,
            float(c_px),
            PSF_PROFILES[flags.psf_profile],
            float(flags.feather_px),
            clip,
            camera.cx,
            camera.cy,
            r_max_px,
        )
    if noise.sigma > 0:
        rng = np.random.Generator(np.random.Philox(noise.seed))
        frame.data += rng.normal(0.0, noise.sigma, frame.data.shape)
    if math.isinf(noise.saturation):
        np.clip(frame.data, 0.0, None, out=frame.data)
    else:
        np.clip(frame.data, 0.0, noise.saturation, out=frame.data)
    return frame
