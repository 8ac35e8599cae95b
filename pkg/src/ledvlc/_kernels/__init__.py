"""Pixel kernels with a compiled core and a pure-NumPy fallback.

The Cython extension (ledvlc._kernels._core) is used when it imported
successfully; otherwise the NumPy implementation takes over. Set
LEDVLC_KERNELS=python or LEDVLC_KERNELS=compiled to force a backend
(the latter raises if the extension is unavailable). Both backends are
behaviourally identical and cross-checked by the test suite.
"""

import os

from . import _numpy
from ._numpy import PROFILE_FEATHERED, PROFILE_GAUSSIAN, PROFILE_UNIFORM

_BACKENDS = {"python": _numpy}

try:
    from . import _core

    _BACKENDS["compiled"] = _core
except ImportError:
    _core = None


def available_backends():
    """Names of the importable kernel backends."""
    return sorted(_BACKENDS)


def get_backend(name):
    """Return the kernel module registered under `name`."""
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ImportError(
            f"kernel backend {name!r} is not available "
            f"(have: {', '.join(available_backends())})"
        ) from None


_requested = os.environ.get("LEDVLC_KERNELS", "auto").lower()
if _requested == "auto":
    _active_name = "compiled" if "compiled" in _BACKENDS else "python"
else:
    get_backend(_requested)
    _active_name = _requested
_active = _BACKENDS[_active_name]


def backend_name():
    """Name of the backend selected at import time."""
    return _active_name


render_spots = _active.render_spots
hough_accumulate = _active.hough_accumulate
sector_sums = _active.sector_sums
