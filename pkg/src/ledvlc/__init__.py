"""Simulator and pilot-aided decoder for high-density LED-array camera links."""

__version__ = "0.1.0"

from ._kernels import backend_name
from .optics import (
    CameraModel,
    ChiefRayLimits,
    DistortionParams,
    IsiDegree,
    LinkGeometry,
    blur_diameter,
    chief_ray_limits,
    distort_point,
    infer_distance,
    isi_degree,
    pixel_scale,
    undistort_point,
    visible_area_ratio,
)
from .channel import (
    ChannelFlags,
    Frame,
    IdealGrid,
    NoiseModel,
    SymbolMatrix,
    check_pilot_spacing,
    pilot_pattern,
    render_frame,
)
from .pgm import read_pgm, write_pgm
